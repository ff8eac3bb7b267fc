// metrics.hpp - decode head outputs into event sets and argument spans, and
// score them: sentence-level event ID&CLS, span-level argument ID / CLS,
// macro and micro P-R-F1, and the per-event-type breakdown.
#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "jssm/corpus.hpp"

namespace jssm {

enum class Averaging { macro, micro };
enum class ArgMatchMode { id, cls };

Averaging parse_averaging(std::string_view text);
std::string to_string(Averaging a);

struct Prediction {
  std::set<int> events;            // event ids, 1..E
  std::vector<ArgSpan> spans;      // non-overlapping per slot, sorted (slot, start)
};

struct PRF {
  double p = 0.0;
  double r = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

PRF prf_from_counts(long tp, long fp, long fn);

/// {k : score[k-1] >= threshold} over event ids 1..E.
std::set<int> decode_events(std::span<const double> scores, double threshold);

/// Maximal runs of score >= threshold per slot column (the None column never
/// emits); scores are n x (S+1) row-major.
std::vector<ArgSpan> decode_spans(std::span<const double> scores, int num_tokens, int num_slots,
                                  double threshold);

/// Sentence-level event set matching. Macro averages per-type P/R/F1 over all
/// event types (counts in the result stay pooled); micro pools the counts.
PRF score_events(std::span<const Prediction> preds, std::span<const Prediction> golds,
                 Averaging averaging, int num_events);

/// Span matching: id mode ignores the slot, cls mode requires span and slot to
/// both match. Matching is one-to-one per example.
PRF score_arguments(std::span<const Prediction> preds, std::span<const Prediction> golds,
                    ArgMatchMode mode, Averaging averaging, int num_slots);

struct PerTypeRow {
  int event_id = 0;
  std::string name;
  long gold_count = 0;
  double f1 = 0.0;
};

/// One row per event type with gold count >= min_count, sorted by count
/// descending (ties by id).
std::vector<PerTypeRow> per_type_breakdown(std::span<const Prediction> preds,
                                           std::span<const Prediction> golds,
                                           const EventSchema& schema, int min_count);

struct MetricsReport {
  Averaging averaging = Averaging::macro;  // primary averaging of the top-level triples
  double threshold = 0.5;
  PRF event_id_cls;
  PRF argument_id;
  PRF argument_cls;
  PRF event_id_cls_secondary;  // the other averaging mode, clearly labeled
  PRF argument_id_secondary;
  PRF argument_cls_secondary;
  std::vector<PerTypeRow> per_type;

  std::string to_json() const;
  std::string to_csv() const;
  std::string to_text() const;
};

MetricsReport build_report(std::span<const Prediction> preds, std::span<const Prediction> golds,
                           const EventSchema& schema, Averaging primary, double threshold,
                           int per_type_min_count = 1);

}  // namespace jssm
