#include "jssm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace jssm {

namespace {
using nlohmann::json;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "?";
}

std::vector<std::uint8_t> spans_to_labels(const std::vector<ArgSpan>& spans, int num_tokens,
                                          int num_slots) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(num_tokens) * (num_slots + 1), 0);
  for (const ArgSpan& s : spans) {
    for (int t = s.start; t < s.end; ++t) {
      labels[static_cast<std::size_t>(t) * (num_slots + 1) + s.slot] = 1;
    }
  }
  return labels;
}

std::vector<ArgSpan> labels_to_spans(const std::vector<std::uint8_t>& labels, int num_tokens,
                                     int num_slots) {
  std::vector<ArgSpan> spans;
  for (int slot = 1; slot <= num_slots; ++slot) {
    int start = -1;
    for (int t = 0; t <= num_tokens; ++t) {
      const bool on =
          t < num_tokens && labels[static_cast<std::size_t>(t) * (num_slots + 1) + slot] != 0;
      if (on && start < 0) start = t;
      if (!on && start >= 0) {
        spans.push_back({start, t, slot});
        start = -1;
      }
    }
  }
  return spans;
}

int synthetic_slot_entity(int slot_id, int num_entities) {
  if (num_entities <= 0 || slot_id <= 0) return 0;
  return (slot_id - 1) % num_entities + 1;
}

EventSchema make_synthetic_schema(int num_events, int num_slots, int num_entities) {
  if (num_events < 1) throw ConfigError("synthetic schema needs at least one event type");
  std::vector<TypeDef> slots;
  for (int j = 1; j <= num_slots; ++j) {
    const int ent = synthetic_slot_entity(j, num_entities);
    std::string def = "Slot" + std::to_string(j) + " role";
    if (ent > 0) def += " filled by Ent" + std::to_string(ent) + " participants";
    slots.push_back({0, "Slot" + std::to_string(j), def});
  }
  std::vector<TypeDef> entities;
  for (int t = 1; t <= num_entities; ++t) {
    entities.push_back(
        {0, "Ent" + std::to_string(t), "Ent" + std::to_string(t) + " kind of participant"});
  }
  std::vector<EventDef> events;
  std::map<int, std::vector<std::string>> triggers;
  for (int k = 1; k <= num_events; ++k) {
    EventDef e;
    e.name = "Evt" + std::to_string(k);
    const std::string ks = std::to_string(k);
    std::vector<std::string> cues = {"cue" + ks + "a", "cue" + ks + "b", "cue" + ks + "c"};
    std::string def = "Evt" + ks + " event signaled by " + cues[0] + " " + cues[1] + " " + cues[2];
    if (num_slots > 0) {
      // Overlapping 4-slot windows so events share some slots but not all.
      const int want = std::min(4, num_slots);
      def += " involving";
      for (int j = 0; j < want; ++j) {
        const int sid = ((k - 1) * 3 + j) % num_slots + 1;
        if (std::find(e.slot_ids.begin(), e.slot_ids.end(), sid) == e.slot_ids.end()) {
          e.slot_ids.push_back(sid);
          def += " Slot" + std::to_string(sid);
        }
      }
    }
    e.definition = def;
    triggers[k] = cues;
    events.push_back(std::move(e));
  }
  return EventSchema::make(std::move(events), std::move(slots), std::move(entities),
                           std::move(triggers));
}

namespace {

struct GenVocab {
  std::vector<std::string> generic;
  std::vector<std::vector<std::string>> cues;     // index = event id, [0] unused
  std::vector<std::vector<std::string>> fillers;  // index = slot id, [0] unused
  std::vector<std::string> all;
};

GenVocab build_gen_vocab(const EventSchema& schema, const GenConfig& cfg) {
  const int E = schema.num_events(), S = schema.num_slots();
  GenVocab v;
  v.cues.resize(E + 1);
  int cue_count = 0;
  for (int k = 1; k <= E; ++k) {
    const auto* words = schema.triggers_for(k);
    if (words != nullptr && !words->empty()) {
      const std::size_t top = std::min<std::size_t>(3, words->size());
      v.cues[k].assign(words->begin(), words->begin() + top);
    } else {
      const std::string ks = std::to_string(k);
      v.cues[k] = {"cue" + ks + "a", "cue" + ks + "b", "cue" + ks + "c"};
    }
    cue_count += static_cast<int>(v.cues[k].size());
  }
  const int generic_count = std::max(4, cfg.vocab_size / 10);
  const int filler_budget = cfg.vocab_size - generic_count - cue_count;
  const int per_slot = S > 0 ? filler_budget / S : 0;
  if (S > 0 && per_slot < 2) {
    throw ConfigError("vocabulary size " + std::to_string(cfg.vocab_size) +
                      " too small to keep per-slot filler vocabularies disjoint (" +
                      std::to_string(S) + " slots, " + std::to_string(cue_count) + " cue words, " +
                      std::to_string(generic_count) + " generic words)");
  }
  for (int i = 0; i < generic_count; ++i) v.generic.push_back("g" + std::to_string(i));
  v.fillers.resize(S + 1);
  for (int s = 1; s <= S; ++s) {
    for (int i = 0; i < per_slot; ++i) {
      v.fillers[s].push_back("s" + std::to_string(s) + "f" + std::to_string(i));
    }
  }
  v.all = v.generic;
  for (int k = 1; k <= E; ++k) v.all.insert(v.all.end(), v.cues[k].begin(), v.cues[k].end());
  for (int s = 1; s <= S; ++s) v.all.insert(v.all.end(), v.fillers[s].begin(), v.fillers[s].end());
  return v;
}

struct SlotPlan {
  int slot = 0;
  int len = 1;
  bool connector = false;
};

struct RealizationPlan {
  int event_id = 0;
  std::vector<SlotPlan> slots;

  int length() const {
    int n = 1;  // cue token
    for (const SlotPlan& s : slots) n += s.len + (s.connector ? 1 : 0);
    return n;
  }
  void minimize() {
    for (SlotPlan& s : slots) {
      s.len = 1;
      s.connector = false;
    }
  }
};

int sample_event(const std::vector<double>& cumulative, Rng& rng) {
  const double r = rng.uniform() * cumulative.back();
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    if (r < cumulative[k]) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(cumulative.size());
}

RealizationPlan plan_realization(const EventSchema& schema, int event_id, Rng& rng) {
  RealizationPlan plan;
  plan.event_id = event_id;
  for (int sid : schema.event(event_id).slot_ids) {
    SlotPlan sp;
    sp.slot = sid;
    sp.connector = rng.bernoulli(0.25);
    sp.len = rng.bernoulli(0.35) ? 2 : 1;
    plan.slots.push_back(sp);
  }
  return plan;
}

void emit_realization(const RealizationPlan& plan, const EventSchema& schema, const GenVocab& v,
                      Rng& rng, Example& ex) {
  const int T = schema.num_entities();
  const auto& cues = v.cues[plan.event_id];
  ex.tokens.push_back(cues[rng.uniform_int(0, static_cast<int>(cues.size()) - 1)]);
  ex.entity_ids.push_back(0);
  for (const SlotPlan& sp : plan.slots) {
    if (sp.connector) {
      ex.tokens.push_back(v.generic[rng.uniform_int(0, static_cast<int>(v.generic.size()) - 1)]);
      ex.entity_ids.push_back(0);
    }
    const int start = static_cast<int>(ex.tokens.size());
    const auto& pool = v.fillers[sp.slot];
    for (int i = 0; i < sp.len; ++i) {
      ex.tokens.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
      ex.entity_ids.push_back(synthetic_slot_entity(sp.slot, T));
    }
    ex.gold_spans.push_back({start, static_cast<int>(ex.tokens.size()), sp.slot});
  }
}

}  // namespace

Corpus generate_corpus(std::shared_ptr<const EventSchema> schema, const GenConfig& cfg) {
  if (!schema) throw ContractError("generate_corpus: null schema");
  const int E = schema->num_events(), S = schema->num_slots();
  if (cfg.sentences < 1) throw ConfigError("generate_corpus: sentence count must be positive");
  if (cfg.noise_rate < 0.0 || cfg.noise_rate >= 1.0) {
    throw ConfigError("generate_corpus: noise rate must be in [0,1)");
  }
  std::vector<double> weights = cfg.event_weights;
  if (weights.empty()) weights.assign(E, 1.0);
  if (static_cast<int>(weights.size()) != E) {
    throw ConfigError("generate_corpus: need " + std::to_string(E) + " event weights, got " +
                      std::to_string(weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("generate_corpus: event weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("generate_corpus: event weights must not be all zero");
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  const GenVocab vocab = build_gen_vocab(*schema, cfg);
  int max_slots = 0;
  for (int k = 1; k <= E; ++k) {
    max_slots = std::max(max_slots, static_cast<int>(schema->event(k).slot_ids.size()));
  }
  if (1 + max_slots > cfg.max_length) {
    throw ConfigError("generate_corpus: max length " + std::to_string(cfg.max_length) +
                      " cannot fit an event with " + std::to_string(max_slots) + " slots");
  }

  Rng rng(cfg.seed);
  Corpus corpus;
  corpus.schema = schema;
  corpus.split = Split::train;
  corpus.examples.reserve(cfg.sentences);

  for (int i = 0; i < cfg.sentences; ++i) {
    Example ex;
    ex.event_labels.assign(E, 0);
    if (rng.bernoulli(0.08)) {
      // No-event sentence: generic context only.
      const int len = rng.uniform_int(2, std::min(5, cfg.max_length));
      for (int t = 0; t < len; ++t) {
        ex.tokens.push_back(
            vocab.generic[rng.uniform_int(0, static_cast<int>(vocab.generic.size()) - 1)]);
        ex.entity_ids.push_back(0);
      }
    } else {
      const bool two_events = rng.bernoulli(0.25);
      int preamble = rng.uniform_int(0, 3);
      RealizationPlan first = plan_realization(*schema, sample_event(cumulative, rng), rng);
      if (preamble + first.length() > cfg.max_length) first.minimize();
      if (preamble + first.length() > cfg.max_length) preamble = 0;
      for (int t = 0; t < preamble; ++t) {
        ex.tokens.push_back(
            vocab.generic[rng.uniform_int(0, static_cast<int>(vocab.generic.size()) - 1)]);
        ex.entity_ids.push_back(0);
      }
      emit_realization(first, *schema, vocab, rng, ex);
      ex.event_labels[first.event_id - 1] = 1;
      if (two_events) {
        RealizationPlan second = plan_realization(*schema, sample_event(cumulative, rng), rng);
        if (ex.num_tokens() + second.length() > cfg.max_length) second.minimize();
        if (ex.num_tokens() + second.length() <= cfg.max_length) {
          emit_realization(second, *schema, vocab, rng, ex);
          ex.event_labels[second.event_id - 1] = 1;
        }
      }
    }
    if (cfg.noise_rate > 0.0) {
      for (const ArgSpan& s : ex.gold_spans) {
        for (int t = s.start; t < s.end; ++t) {
          if (rng.bernoulli(cfg.noise_rate)) {
            ex.tokens[t] =
                vocab.all[rng.uniform_int(0, static_cast<int>(vocab.all.size()) - 1)];
          }
        }
      }
    }
    std::sort(ex.gold_spans.begin(), ex.gold_spans.end(),
              [](const ArgSpan& a, const ArgSpan& b) {
                return a.slot != b.slot ? a.slot < b.slot : a.start < b.start;
              });
    ex.arg_labels = spans_to_labels(ex.gold_spans, ex.num_tokens(), S);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_corpus: cannot write " + path);
  const EventSchema& schema = *corpus.schema;
  for (const Example& ex : corpus.examples) {
    json rec;
    rec["tokens"] = ex.tokens;
    json ents = json::array();
    for (int id : ex.entity_ids) ents.push_back(schema.entity(id).name);
    rec["entities"] = ents;
    json evts = json::array();
    for (std::size_t k = 0; k < ex.event_labels.size(); ++k) {
      if (ex.event_labels[k]) evts.push_back(schema.event(static_cast<int>(k) + 1).name);
    }
    rec["events"] = evts;
    json args = json::array();
    for (const ArgSpan& s : ex.gold_spans) {
      args.push_back({{"start", s.start}, {"end", s.end}, {"slot", schema.slot(s.slot).name}});
    }
    rec["arguments"] = args;
    out << rec.dump() << "\n";
  }
}

Corpus read_corpus(const std::string& path, std::shared_ptr<const EventSchema> schema,
                   Split split) {
  if (!schema) throw ContractError("read_corpus: null schema");
  std::ifstream in(path);
  if (!in) throw ParseError("read_corpus: cannot open " + path);
  const int E = schema->num_events(), S = schema->num_slots();
  Corpus corpus;
  corpus.schema = schema;
  corpus.split = split;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("tokens") || !rec["tokens"].is_array()) {
      throw ParseError(where + ": record must be an object with a 'tokens' array");
    }
    Example ex;
    for (const auto& t : rec["tokens"]) {
      if (!t.is_string()) throw ParseError(where + ": tokens must be strings");
      ex.tokens.push_back(t.get<std::string>());
    }
    const int n = ex.num_tokens();
    if (rec.contains("entities")) {
      if (!rec["entities"].is_array() || static_cast<int>(rec["entities"].size()) != n) {
        throw ValidationError(where + ": 'entities' must list one entity type per token");
      }
      for (const auto& ename : rec["entities"]) {
        if (!ename.is_string()) throw ParseError(where + ": entity names must be strings");
        auto id = schema->entity_id(ename.get<std::string>());
        if (!id) {
          throw ValidationError(where + ": unknown entity type '" +
                                ename.get<std::string>() + "'");
        }
        ex.entity_ids.push_back(*id);
      }
    } else {
      ex.entity_ids.assign(n, 0);
    }
    ex.event_labels.assign(E, 0);
    if (rec.contains("events")) {
      if (!rec["events"].is_array()) throw ParseError(where + ": 'events' must be an array");
      for (const auto& ename : rec["events"]) {
        if (!ename.is_string()) throw ParseError(where + ": event names must be strings");
        auto id = schema->event_id(ename.get<std::string>());
        if (!id || *id == 0) {
          throw ValidationError(where + ": unknown event type '" + ename.get<std::string>() +
                                "'");
        }
        ex.event_labels[*id - 1] = 1;
      }
    }
    if (rec.contains("arguments")) {
      if (!rec["arguments"].is_array()) throw ParseError(where + ": 'arguments' must be an array");
      for (const auto& arg : rec["arguments"]) {
        if (!arg.is_object() || !arg.contains("start") || !arg.contains("end") ||
            !arg.contains("slot")) {
          throw ParseError(where + ": argument entries need start, end, slot");
        }
        if (!arg["start"].is_number_integer() || !arg["end"].is_number_integer() ||
            !arg["slot"].is_string()) {
          throw ParseError(where + ": argument fields have wrong types");
        }
        ArgSpan s;
        s.start = arg["start"].get<int>();
        s.end = arg["end"].get<int>();
        auto sid = schema->slot_id(arg["slot"].get<std::string>());
        if (!sid || *sid == 0) {
          throw ValidationError(where + ": unknown slot '" + arg["slot"].get<std::string>() +
                                "'");
        }
        s.slot = *sid;
        if (s.start < 0 || s.start >= s.end || s.end > n) {
          throw ValidationError(where + ": span [" + std::to_string(s.start) + "," +
                                std::to_string(s.end) + ") out of range for " +
                                std::to_string(n) + " tokens");
        }
        ex.gold_spans.push_back(s);
      }
    }
    std::sort(ex.gold_spans.begin(), ex.gold_spans.end(),
              [](const ArgSpan& a, const ArgSpan& b) {
                return a.slot != b.slot ? a.slot < b.slot : a.start < b.start;
              });
    ex.arg_labels = spans_to_labels(ex.gold_spans, n, S);
    if (labels_to_spans(ex.arg_labels, n, S) != ex.gold_spans) {
      throw ValidationError(where + ": overlapping or touching spans for the same slot");
    }
    bool any_event = false;
    for (auto b : ex.event_labels) any_event = any_event || b != 0;
    if (!any_event && !ex.gold_spans.empty()) {
      throw ValidationError(where + ": arguments present but no event labels");
    }
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

SplitResult split_corpus(const Corpus& corpus, double train_frac, double dev_frac,
                         double test_frac, std::uint64_t seed) {
  const double fracs[3] = {train_frac, dev_frac, test_frac};
  double sum = 0.0;
  for (double f : fracs) {
    if (f <= 0.0) throw ConfigError("split_corpus: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_corpus: fractions must sum to 1");
  const std::size_t n = corpus.size();

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }

  // Largest-remainder apportionment keeps counts consistent with fractions.
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = static_cast<double>(n) * fracs[p];
    counts[p] = static_cast<std::size_t>(exact);
    remainders[p] = exact - static_cast<double>(counts[p]);
    assigned += counts[p];
  }
  while (assigned < n) {
    int best = 0;
    for (int p = 1; p < 3; ++p) {
      if (remainders[p] > remainders[best]) best = p;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  if (n > 0 && (counts[0] == 0 || counts[1] == 0 || counts[2] == 0)) {
    throw ConfigError("split_corpus: fractions produce an empty split for " + std::to_string(n) +
                      " examples");
  }

  SplitResult out;
  out.train.schema = out.dev.schema = out.test.schema = corpus.schema;
  out.train.split = Split::train;
  out.dev.split = Split::dev;
  out.test.split = Split::test;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < counts[0]; ++i) out.train.examples.push_back(corpus.examples[idx[pos++]]);
  for (std::size_t i = 0; i < counts[1]; ++i) out.dev.examples.push_back(corpus.examples[idx[pos++]]);
  for (std::size_t i = 0; i < counts[2]; ++i) out.test.examples.push_back(corpus.examples[idx[pos++]]);
  return out;
}

}  // namespace jssm
