// schema.hpp - event ontology: event/slot/entity types, their definition texts,
// the event->slot structure, and the question texts derived from them.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jssm/common.hpp"

namespace jssm {

struct TypeDef {
  int id = 0;
  std::string name;
  std::string definition;
};

struct EventDef {
  int id = 0;
  std::string name;
  std::string definition;
  std::vector<int> slot_ids;  // declared argument slots, ids into the slot family
};

/// Immutable after parse. Ids are dense: 0 is the reserved None type in each
/// family, real types are 1..E / 1..S / 1..T in document order.
class EventSchema {
 public:
  /// Parses the JSON schema document (see README for the format).
  static EventSchema parse(const std::string& json_text);
  static EventSchema load_file(const std::string& path);
  /// Constructs directly from type lists (ids are assigned by position).
  static EventSchema make(std::vector<EventDef> events, std::vector<TypeDef> slots,
                          std::vector<TypeDef> entities,
                          std::map<int, std::vector<std::string>> triggers = {});

  std::string serialize() const;
  void save_file(const std::string& path) const;

  int num_events() const { return static_cast<int>(events_.size()) - 1; }
  int num_slots() const { return static_cast<int>(slots_.size()) - 1; }
  int num_entities() const { return static_cast<int>(entities_.size()) - 1; }

  const EventDef& event(int id) const;
  const TypeDef& slot(int id) const;
  const TypeDef& entity(int id) const;

  std::optional<int> event_id(std::string_view name) const;
  std::optional<int> slot_id(std::string_view name) const;
  std::optional<int> entity_id(std::string_view name) const;

  bool has_triggers() const { return !triggers_.empty(); }
  const std::vector<std::string>* triggers_for(int event_id) const;

 private:
  std::vector<EventDef> events_;    // [0] = None
  std::vector<TypeDef> slots_;      // [0] = None
  std::vector<TypeDef> entities_;   // [0] = None
  std::map<int, std::vector<std::string>> triggers_;  // event id -> ranked trigger words
};

/// Hard binary event->slot map of shape (E+1) x (S+1). Row k has ones exactly
/// at the slots event k declares; the None event row and None slot column stay
/// zero.
struct EventSlotMask {
  int num_events = 0;  // E
  int num_slots = 0;   // S
  std::vector<std::uint8_t> bits;

  bool at(int event_id, int slot_id) const {
    return bits[static_cast<std::size_t>(event_id) * (num_slots + 1) + slot_id] != 0;
  }
  std::span<const std::uint8_t> row(int event_id) const {
    return {bits.data() + static_cast<std::size_t>(event_id) * (num_slots + 1),
            static_cast<std::size_t>(num_slots + 1)};
  }
  int row_sum(int event_id) const {
    int s = 0;
    for (int j = 0; j <= num_slots; ++j) s += at(event_id, j) ? 1 : 0;
    return s;
  }
};

EventSlotMask build_mask(const EventSchema& schema);

enum class QuestionStrategy { name, triggers, definition };

QuestionStrategy parse_strategy(std::string_view text);
std::string to_string(QuestionStrategy s);

/// Question text per event id (index 0..E). The None event always uses its
/// definition; real events follow the strategy. The triggers strategy
/// concatenates the top five trigger words and requires a lexicon.
std::vector<std::string> event_questions(const EventSchema& schema, QuestionStrategy strategy);
/// Slot and entity questions always use the definition texts (index 0..S / 0..T).
std::vector<std::string> slot_questions(const EventSchema& schema);
std::vector<std::string> entity_questions(const EventSchema& schema);

}  // namespace jssm
