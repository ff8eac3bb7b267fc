#include "jssm/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "json.hpp"

namespace jssm {

Averaging parse_averaging(std::string_view text) {
  if (text == "macro") return Averaging::macro;
  if (text == "micro") return Averaging::micro;
  throw ConfigError("unknown averaging '" + std::string(text) + "' (expected macro|micro)");
}

std::string to_string(Averaging a) { return a == Averaging::macro ? "macro" : "micro"; }

PRF prf_from_counts(long tp, long fp, long fn) {
  PRF out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = out.p + out.r > 0.0 ? 2.0 * out.p * out.r / (out.p + out.r) : 0.0;
  return out;
}

std::set<int> decode_events(std::span<const double> scores, double threshold) {
  std::set<int> out;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] >= threshold) out.insert(static_cast<int>(k) + 1);
  }
  return out;
}

std::vector<ArgSpan> decode_spans(std::span<const double> scores, int num_tokens, int num_slots,
                                  double threshold) {
  if (scores.size() != static_cast<std::size_t>(num_tokens) * (num_slots + 1)) {
    throw ContractError("decode_spans: expected " + std::to_string(num_tokens) + "x" +
                        std::to_string(num_slots + 1) + " scores, got " +
                        std::to_string(scores.size()));
  }
  std::vector<ArgSpan> spans;
  for (int slot = 1; slot <= num_slots; ++slot) {
    int start = -1;
    for (int t = 0; t <= num_tokens; ++t) {
      const bool on = t < num_tokens &&
                      scores[static_cast<std::size_t>(t) * (num_slots + 1) + slot] >= threshold;
      if (on && start < 0) start = t;
      if (!on && start >= 0) {
        spans.push_back({start, t, slot});
        start = -1;
      }
    }
  }
  return spans;
}

namespace {

void check_lengths(std::span<const Prediction> preds, std::span<const Prediction> golds,
                   const char* who) {
  if (preds.size() != golds.size()) {
    throw ContractError(std::string(who) + ": " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(golds.size()) + " golds");
  }
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

}  // namespace

PRF score_events(std::span<const Prediction> preds, std::span<const Prediction> golds,
                 Averaging averaging, int num_events) {
  check_lengths(preds, golds, "score_events");
  std::vector<Counts> per_type(num_events + 1);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int k = 1; k <= num_events; ++k) {
      const bool in_pred = preds[i].events.count(k) != 0;
      const bool in_gold = golds[i].events.count(k) != 0;
      if (in_pred && in_gold) ++per_type[k].tp;
      if (in_pred && !in_gold) ++per_type[k].fp;
      if (!in_pred && in_gold) ++per_type[k].fn;
    }
  }
  long tp = 0, fp = 0, fn = 0;
  for (int k = 1; k <= num_events; ++k) {
    tp += per_type[k].tp;
    fp += per_type[k].fp;
    fn += per_type[k].fn;
  }
  if (averaging == Averaging::micro) return prf_from_counts(tp, fp, fn);
  PRF out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  for (int k = 1; k <= num_events; ++k) {
    const PRF t = prf_from_counts(per_type[k].tp, per_type[k].fp, per_type[k].fn);
    out.p += t.p;
    out.r += t.r;
    out.f1 += t.f1;
  }
  out.p /= num_events;
  out.r /= num_events;
  out.f1 /= num_events;
  return out;
}

PRF score_arguments(std::span<const Prediction> preds, std::span<const Prediction> golds,
                    ArgMatchMode mode, Averaging averaging, int num_slots) {
  check_lengths(preds, golds, "score_arguments");

  if (averaging == Averaging::micro) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      // One-to-one multiset matching per example.
      std::map<std::tuple<int, int, int>, long> gold_buckets;
      for (const ArgSpan& s : golds[i].spans) {
        const int slot_key = mode == ArgMatchMode::cls ? s.slot : 0;
        ++gold_buckets[{s.start, s.end, slot_key}];
      }
      long matched = 0;
      for (const ArgSpan& s : preds[i].spans) {
        const int slot_key = mode == ArgMatchMode::cls ? s.slot : 0;
        auto it = gold_buckets.find({s.start, s.end, slot_key});
        if (it != gold_buckets.end() && it->second > 0) {
          --it->second;
          ++matched;
        }
      }
      tp += matched;
      fp += static_cast<long>(preds[i].spans.size()) - matched;
      fn += static_cast<long>(golds[i].spans.size()) - matched;
    }
    return prf_from_counts(tp, fp, fn);
  }

  // Macro over slot types.
  std::vector<long> matched_pred(num_slots + 1, 0), matched_gold(num_slots + 1, 0);
  std::vector<long> total_pred(num_slots + 1, 0), total_gold(num_slots + 1, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (const ArgSpan& s : preds[i].spans) ++total_pred[s.slot];
    for (const ArgSpan& s : golds[i].spans) ++total_gold[s.slot];
    if (mode == ArgMatchMode::cls) {
      std::map<std::tuple<int, int, int>, long> gold_buckets;
      for (const ArgSpan& s : golds[i].spans) ++gold_buckets[{s.start, s.end, s.slot}];
      for (const ArgSpan& s : preds[i].spans) {
        auto it = gold_buckets.find({s.start, s.end, s.slot});
        if (it != gold_buckets.end() && it->second > 0) {
          --it->second;
          ++matched_pred[s.slot];
          ++matched_gold[s.slot];
        }
      }
    } else {
      // Boundary matching ignores the slot; matched spans are attributed to
      // each side's own slot type (slot order breaks ties deterministically).
      std::map<std::pair<int, int>, std::vector<int>> gold_by_span, pred_by_span;
      for (const ArgSpan& s : golds[i].spans) gold_by_span[{s.start, s.end}].push_back(s.slot);
      for (const ArgSpan& s : preds[i].spans) pred_by_span[{s.start, s.end}].push_back(s.slot);
      for (auto& [span, gslots] : gold_by_span) {
        auto it = pred_by_span.find(span);
        if (it == pred_by_span.end()) continue;
        auto& pslots = it->second;
        std::sort(gslots.begin(), gslots.end());
        std::sort(pslots.begin(), pslots.end());
        const std::size_t m = std::min(gslots.size(), pslots.size());
        for (std::size_t j = 0; j < m; ++j) {
          ++matched_gold[gslots[j]];
          ++matched_pred[pslots[j]];
        }
      }
    }
  }
  long tp = 0, fp = 0, fn = 0;
  PRF out;
  for (int k = 1; k <= num_slots; ++k) {
    tp += matched_gold[k];
    fp += total_pred[k] - matched_pred[k];
    fn += total_gold[k] - matched_gold[k];
    const double p = total_pred[k] > 0
                         ? static_cast<double>(matched_pred[k]) / static_cast<double>(total_pred[k])
                         : 0.0;
    const double r = total_gold[k] > 0
                         ? static_cast<double>(matched_gold[k]) / static_cast<double>(total_gold[k])
                         : 0.0;
    out.p += p;
    out.r += r;
    out.f1 += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  if (num_slots > 0) {
    out.p /= num_slots;
    out.r /= num_slots;
    out.f1 /= num_slots;
  }
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  return out;
}

std::vector<PerTypeRow> per_type_breakdown(std::span<const Prediction> preds,
                                           std::span<const Prediction> golds,
                                           const EventSchema& schema, int min_count) {
  check_lengths(preds, golds, "per_type_breakdown");
  if (min_count < 1) throw ContractError("per_type_breakdown: min_count must be >= 1");
  std::vector<PerTypeRow> rows;
  for (int k = 1; k <= schema.num_events(); ++k) {
    long tp = 0, fp = 0, fn = 0, gold_count = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool in_pred = preds[i].events.count(k) != 0;
      const bool in_gold = golds[i].events.count(k) != 0;
      if (in_gold) ++gold_count;
      if (in_pred && in_gold) ++tp;
      if (in_pred && !in_gold) ++fp;
      if (!in_pred && in_gold) ++fn;
    }
    if (gold_count < min_count) continue;
    rows.push_back({k, schema.event(k).name, gold_count, prf_from_counts(tp, fp, fn).f1});
  }
  std::sort(rows.begin(), rows.end(), [](const PerTypeRow& a, const PerTypeRow& b) {
    return a.gold_count != b.gold_count ? a.gold_count > b.gold_count : a.event_id < b.event_id;
  });
  return rows;
}

MetricsReport build_report(std::span<const Prediction> preds, std::span<const Prediction> golds,
                           const EventSchema& schema, Averaging primary, double threshold,
                           int per_type_min_count) {
  const Averaging secondary =
      primary == Averaging::macro ? Averaging::micro : Averaging::macro;
  MetricsReport r;
  r.averaging = primary;
  r.threshold = threshold;
  const int E = schema.num_events(), S = schema.num_slots();
  r.event_id_cls = score_events(preds, golds, primary, E);
  r.argument_id = score_arguments(preds, golds, ArgMatchMode::id, primary, S);
  r.argument_cls = score_arguments(preds, golds, ArgMatchMode::cls, primary, S);
  r.event_id_cls_secondary = score_events(preds, golds, secondary, E);
  r.argument_id_secondary = score_arguments(preds, golds, ArgMatchMode::id, secondary, S);
  r.argument_cls_secondary = score_arguments(preds, golds, ArgMatchMode::cls, secondary, S);
  r.per_type = per_type_breakdown(preds, golds, schema, per_type_min_count);
  return r;
}

namespace {

nlohmann::ordered_json prf_json(const PRF& x, Averaging a) {
  return {{"p", x.p}, {"r", x.r}, {"f1", x.f1},   {"tp", x.tp},
          {"fp", x.fp}, {"fn", x.fn}, {"averaging", to_string(a)}};
}

}  // namespace

std::string MetricsReport::to_json() const {
  const Averaging secondary =
      averaging == Averaging::macro ? Averaging::micro : Averaging::macro;
  nlohmann::ordered_json doc;
  doc["threshold"] = threshold;
  doc["averaging"] = to_string(averaging);
  doc["event_id_cls"] = prf_json(event_id_cls, averaging);
  doc["argument_id"] = prf_json(argument_id, averaging);
  doc["argument_cls"] = prf_json(argument_cls, averaging);
  doc["secondary"] = {{"event_id_cls", prf_json(event_id_cls_secondary, secondary)},
                      {"argument_id", prf_json(argument_id_secondary, secondary)},
                      {"argument_cls", prf_json(argument_cls_secondary, secondary)}};
  doc["per_type"] = nlohmann::ordered_json::array();
  for (const PerTypeRow& row : per_type) {
    doc["per_type"].push_back({{"event", row.name},
                               {"event_id", row.event_id},
                               {"gold_count", row.gold_count},
                               {"f1", row.f1}});
  }
  return doc.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "section,name,averaging,p,r,f1,tp,fp,fn\n";
  auto line = [&os](const char* name, const PRF& x, Averaging a) {
    os << "task," << name << "," << to_string(a) << "," << x.p << "," << x.r << "," << x.f1 << ","
       << x.tp << "," << x.fp << "," << x.fn << "\n";
  };
  const Averaging secondary =
      averaging == Averaging::macro ? Averaging::micro : Averaging::macro;
  line("event_id_cls", event_id_cls, averaging);
  line("argument_id", argument_id, averaging);
  line("argument_cls", argument_cls, averaging);
  line("event_id_cls", event_id_cls_secondary, secondary);
  line("argument_id", argument_id_secondary, secondary);
  line("argument_cls", argument_cls_secondary, secondary);
  for (const PerTypeRow& row : per_type) {
    os << "per_type," << row.name << ",,," << row.gold_count << "," << row.f1 << ",,,\n";
  }
  return os.str();
}

namespace {

void text_row(std::ostringstream& os, const std::string& label, const PRF& e, const PRF& id,
              const PRF& cls) {
  os << label;
  for (std::size_t i = label.size(); i < 12; ++i) os << ' ';
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%6.3f %6.3f %6.3f   %6.3f %6.3f %6.3f   %6.3f %6.3f %6.3f",
                e.p, e.r, e.f1, id.p, id.r, id.f1, cls.p, cls.r, cls.f1);
  os << buf << "\n";
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "            |   Event ID & CLS       |    Argument ID         |   Argument CLS\n";
  os << "            |    P      R     F1     |    P      R     F1     |    P      R     F1\n";
  text_row(os, to_string(averaging), event_id_cls, argument_id, argument_cls);
  const Averaging secondary =
      averaging == Averaging::macro ? Averaging::micro : Averaging::macro;
  text_row(os, to_string(secondary), event_id_cls_secondary, argument_id_secondary,
           argument_cls_secondary);
  if (!per_type.empty()) {
    os << "\nper event type (gold count, F1):\n";
    for (const PerTypeRow& row : per_type) {
      os << "  " << row.name << "  " << row.gold_count << "  ";
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.3f", row.f1);
      os << buf << "\n";
    }
  }
  return os.str();
}

}  // namespace jssm
