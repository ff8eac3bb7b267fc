#include "jssm/schema.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace jssm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string require_string(const ordered_json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string() || obj[key].get<std::string>().empty()) {
    throw ParseError(where + ": missing " + key);
  }
  return obj[key].get<std::string>();
}

void check_unique(std::unordered_set<std::string>& seen, const std::string& name,
                  const std::string& where) {
  if (!seen.insert(name).second) throw ParseError(where + ": duplicate name '" + name + "'");
}

}  // namespace

EventSchema EventSchema::make(std::vector<EventDef> events, std::vector<TypeDef> slots,
                              std::vector<TypeDef> entities,
                              std::map<int, std::vector<std::string>> triggers) {
  if (events.empty()) throw ParseError("empty schema: at least one event type is required");
  EventSchema s;
  s.events_.push_back({0, "None", "no event of interest", {}});
  s.slots_.push_back({0, "None", "no slot of interest"});
  s.entities_.push_back({0, "None", "no entity of interest"});
  int id = 1;
  for (EventDef& e : events) {
    e.id = id++;
    s.events_.push_back(std::move(e));
  }
  id = 1;
  for (TypeDef& t : slots) {
    t.id = id++;
    s.slots_.push_back(std::move(t));
  }
  id = 1;
  for (TypeDef& t : entities) {
    t.id = id++;
    s.entities_.push_back(std::move(t));
  }
  std::unordered_set<std::string> seen;
  for (const EventDef& e : s.events_) check_unique(seen, e.name, "events");
  seen.clear();
  for (const TypeDef& t : s.slots_) check_unique(seen, t.name, "slots");
  seen.clear();
  for (const TypeDef& t : s.entities_) check_unique(seen, t.name, "entities");
  for (const EventDef& e : s.events_) {
    for (int sid : e.slot_ids) {
      if (sid < 1 || sid > s.num_slots()) {
        throw ParseError("event '" + e.name + "': slot id " + std::to_string(sid) +
                         " out of range");
      }
    }
  }
  for (auto& [eid, words] : triggers) {
    if (eid < 1 || eid > s.num_events()) {
      throw ParseError("triggers: event id " + std::to_string(eid) + " out of range");
    }
  }
  s.triggers_ = std::move(triggers);
  return s;
}

EventSchema EventSchema::parse(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("schema: top level must be an object");
  if (!doc.contains("events") || !doc["events"].is_array() || doc["events"].empty()) {
    throw ParseError("empty schema: 'events' must be a non-empty array");
  }

  std::vector<TypeDef> slots;
  if (doc.contains("slots")) {
    if (!doc["slots"].is_array()) throw ParseError("schema: 'slots' must be an array");
    int i = 0;
    for (const auto& entry : doc["slots"]) {
      const std::string where = "slots[" + std::to_string(i++) + "]";
      if (!entry.is_object()) throw ParseError(where + ": entry must be an object");
      slots.push_back(
          {0, require_string(entry, "name", where), require_string(entry, "definition", where)});
    }
  }
  std::vector<TypeDef> entities;
  if (doc.contains("entities")) {
    if (!doc["entities"].is_array()) throw ParseError("schema: 'entities' must be an array");
    int i = 0;
    for (const auto& entry : doc["entities"]) {
      const std::string where = "entities[" + std::to_string(i++) + "]";
      if (!entry.is_object()) throw ParseError(where + ": entry must be an object");
      entities.push_back(
          {0, require_string(entry, "name", where), require_string(entry, "definition", where)});
    }
  }

  std::vector<EventDef> events;
  int i = 0;
  for (const auto& entry : doc["events"]) {
    const std::string where = "events[" + std::to_string(i++) + "]";
    if (!entry.is_object()) throw ParseError(where + ": entry must be an object");
    EventDef e;
    e.name = require_string(entry, "name", where);
    e.definition = require_string(entry, "definition", where);
    if (entry.contains("slots")) {
      if (!entry["slots"].is_array()) throw ParseError(where + ": 'slots' must be an array");
      for (const auto& sname : entry["slots"]) {
        if (!sname.is_string()) throw ParseError(where + ": slot names must be strings");
        const std::string name = sname.get<std::string>();
        int sid = 0;
        for (std::size_t k = 0; k < slots.size(); ++k) {
          if (slots[k].name == name) {
            sid = static_cast<int>(k) + 1;
            break;
          }
        }
        if (sid == 0) throw ParseError(where + ": unknown slot '" + name + "'");
        e.slot_ids.push_back(sid);
      }
    }
    events.push_back(std::move(e));
  }

  std::map<int, std::vector<std::string>> triggers;
  if (doc.contains("triggers")) {
    if (!doc["triggers"].is_object()) throw ParseError("schema: 'triggers' must be an object");
    for (const auto& [ename, words] : doc["triggers"].items()) {
      int eid = 0;
      for (std::size_t k = 0; k < events.size(); ++k) {
        if (events[k].name == ename) {
          eid = static_cast<int>(k) + 1;
          break;
        }
      }
      if (eid == 0) throw ParseError("triggers: unknown event '" + ename + "'");
      if (!words.is_array()) throw ParseError("triggers['" + ename + "']: must be an array");
      std::vector<std::string> list;
      for (const auto& w : words) {
        if (!w.is_string()) throw ParseError("triggers['" + ename + "']: words must be strings");
        list.push_back(w.get<std::string>());
      }
      triggers[eid] = std::move(list);
    }
  }

  return make(std::move(events), std::move(slots), std::move(entities), std::move(triggers));
}

EventSchema EventSchema::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("schema: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string EventSchema::serialize() const {
  ordered_json doc;
  doc["events"] = ordered_json::array();
  for (int k = 1; k <= num_events(); ++k) {
    const EventDef& e = events_[k];
    ordered_json entry;
    entry["name"] = e.name;
    entry["definition"] = e.definition;
    ordered_json snames = ordered_json::array();
    for (int sid : e.slot_ids) snames.push_back(slots_[sid].name);
    entry["slots"] = snames;
    doc["events"].push_back(entry);
  }
  doc["slots"] = ordered_json::array();
  for (int k = 1; k <= num_slots(); ++k) {
    doc["slots"].push_back({{"name", slots_[k].name}, {"definition", slots_[k].definition}});
  }
  doc["entities"] = ordered_json::array();
  for (int k = 1; k <= num_entities(); ++k) {
    doc["entities"].push_back(
        {{"name", entities_[k].name}, {"definition", entities_[k].definition}});
  }
  if (!triggers_.empty()) {
    ordered_json trig = ordered_json::object();
    for (const auto& [eid, words] : triggers_) trig[events_[eid].name] = words;
    doc["triggers"] = trig;
  }
  return doc.dump(2);
}

void EventSchema::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("schema: cannot write " + path);
  out << serialize() << "\n";
}

const EventDef& EventSchema::event(int id) const {
  if (id < 0 || id > num_events()) {
    throw ContractError("event id " + std::to_string(id) + " out of range [0," +
                        std::to_string(num_events()) + "]");
  }
  return events_[id];
}

const TypeDef& EventSchema::slot(int id) const {
  if (id < 0 || id > num_slots()) {
    throw ContractError("slot id " + std::to_string(id) + " out of range [0," +
                        std::to_string(num_slots()) + "]");
  }
  return slots_[id];
}

const TypeDef& EventSchema::entity(int id) const {
  if (id < 0 || id > num_entities()) {
    throw ContractError("entity id " + std::to_string(id) + " out of range [0," +
                        std::to_string(num_entities()) + "]");
  }
  return entities_[id];
}

std::optional<int> EventSchema::event_id(std::string_view name) const {
  for (const EventDef& e : events_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

std::optional<int> EventSchema::slot_id(std::string_view name) const {
  for (const TypeDef& t : slots_) {
    if (t.name == name) return t.id;
  }
  return std::nullopt;
}

std::optional<int> EventSchema::entity_id(std::string_view name) const {
  for (const TypeDef& t : entities_) {
    if (t.name == name) return t.id;
  }
  return std::nullopt;
}

const std::vector<std::string>* EventSchema::triggers_for(int event_id) const {
  auto it = triggers_.find(event_id);
  return it == triggers_.end() ? nullptr : &it->second;
}

EventSlotMask build_mask(const EventSchema& schema) {
  EventSlotMask mask;
  mask.num_events = schema.num_events();
  mask.num_slots = schema.num_slots();
  mask.bits.assign(static_cast<std::size_t>(mask.num_events + 1) * (mask.num_slots + 1), 0);
  for (int k = 1; k <= mask.num_events; ++k) {
    for (int sid : schema.event(k).slot_ids) {
      mask.bits[static_cast<std::size_t>(k) * (mask.num_slots + 1) + sid] = 1;
    }
  }
  return mask;
}

QuestionStrategy parse_strategy(std::string_view text) {
  if (text == "name") return QuestionStrategy::name;
  if (text == "triggers") return QuestionStrategy::triggers;
  if (text == "definition") return QuestionStrategy::definition;
  throw ConfigError("unknown question strategy '" + std::string(text) +
                    "' (expected name|triggers|definition)");
}

std::string to_string(QuestionStrategy s) {
  switch (s) {
    case QuestionStrategy::name:
      return "name";
    case QuestionStrategy::triggers:
      return "triggers";
    case QuestionStrategy::definition:
      return "definition";
  }
  return "?";
}

std::vector<std::string> event_questions(const EventSchema& schema, QuestionStrategy strategy) {
  if (strategy == QuestionStrategy::triggers && !schema.has_triggers()) {
    throw ConfigError("question strategy 'triggers' requires a trigger lexicon in the schema");
  }
  std::vector<std::string> out(schema.num_events() + 1);
  out[0] = schema.event(0).definition;
  for (int k = 1; k <= schema.num_events(); ++k) {
    switch (strategy) {
      case QuestionStrategy::name:
        out[k] = schema.event(k).name;
        break;
      case QuestionStrategy::definition:
        out[k] = schema.event(k).definition;
        break;
      case QuestionStrategy::triggers: {
        const auto* words = schema.triggers_for(k);
        if (words == nullptr || words->empty()) {
          throw ConfigError("no trigger words for event '" + schema.event(k).name + "'");
        }
        std::string q;
        const std::size_t top = std::min<std::size_t>(5, words->size());
        for (std::size_t i = 0; i < top; ++i) {
          if (i) q += " ";
          q += (*words)[i];
        }
        out[k] = q;
        break;
      }
    }
    if (out[k].empty()) {
      throw ConfigError("empty question for event '" + schema.event(k).name + "'");
    }
  }
  return out;
}

std::vector<std::string> slot_questions(const EventSchema& schema) {
  std::vector<std::string> out(schema.num_slots() + 1);
  for (int k = 0; k <= schema.num_slots(); ++k) out[k] = schema.slot(k).definition;
  return out;
}

std::vector<std::string> entity_questions(const EventSchema& schema) {
  std::vector<std::string> out(schema.num_entities() + 1);
  for (int k = 0; k <= schema.num_entities(); ++k) out[k] = schema.entity(k).definition;
  return out;
}

}  // namespace jssm
