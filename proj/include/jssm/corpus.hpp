// corpus.hpp - annotated sentences, the JSONL corpus format, splitting, and a
// seeded synthetic generator with controllable event imbalance.
#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "jssm/schema.hpp"

namespace jssm {

/// Token span [start, end) filling argument slot `slot`.
struct ArgSpan {
  int start = 0;
  int end = 0;
  int slot = 0;
  auto operator<=>(const ArgSpan&) const = default;
};

/// One sentence with gold annotations. arg_labels is n x (S+1) row-major with
/// the None column (0) always zero; maximal runs of ones per slot column are
/// exactly gold_spans.
struct Example {
  std::vector<std::string> tokens;
  std::vector<int> entity_ids;
  std::vector<std::uint8_t> event_labels;  // length E; index k-1 <-> event id k
  std::vector<std::uint8_t> arg_labels;    // n x (S+1)
  std::vector<ArgSpan> gold_spans;         // sorted by (slot, start)

  int num_tokens() const { return static_cast<int>(tokens.size()); }
  std::uint8_t arg_label(int token, int slot, int num_slots) const {
    return arg_labels[static_cast<std::size_t>(token) * (num_slots + 1) + slot];
  }
};

enum class Split { train, dev, test };
std::string to_string(Split s);

struct Corpus {
  std::shared_ptr<const EventSchema> schema;
  std::vector<Example> examples;
  Split split = Split::train;

  std::size_t size() const { return examples.size(); }
};

struct GenConfig {
  int sentences = 2000;
  int vocab_size = 200;
  int max_length = 40;
  std::vector<double> event_weights;  // length E; empty means uniform
  double noise_rate = 0.0;            // fraction of filler tokens flipped to random words
  std::uint64_t seed = 42;
};

/// Multi-hot span/label conversion. Labels are n x (S+1), column 0 unused.
std::vector<std::uint8_t> spans_to_labels(const std::vector<ArgSpan>& spans, int num_tokens,
                                          int num_slots);
/// Maximal-run decoding; returns spans sorted by (slot, start).
std::vector<ArgSpan> labels_to_spans(const std::vector<std::uint8_t>& labels, int num_tokens,
                                     int num_slots);

/// Entity type the generator assigns to fillers of a slot (fixed convention).
int synthetic_slot_entity(int slot_id, int num_entities);

/// Schema with E events, S slots, T entities, trigger lexicon, and definition
/// texts that mention each type's cue words and slot structure.
EventSchema make_synthetic_schema(int num_events, int num_slots, int num_entities);

Corpus generate_corpus(std::shared_ptr<const EventSchema> schema, const GenConfig& cfg);

Corpus read_corpus(const std::string& path, std::shared_ptr<const EventSchema> schema,
                   Split split = Split::train);
void write_corpus(const Corpus& corpus, const std::string& path);

struct SplitResult {
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Disjoint, exhaustive, seed-deterministic partition. Fractions must be
/// positive and sum to 1; a fraction that would produce an empty part on a
/// non-empty corpus is a configuration error.
SplitResult split_corpus(const Corpus& corpus, double train_frac, double dev_frac,
                         double test_frac, std::uint64_t seed);

}  // namespace jssm
