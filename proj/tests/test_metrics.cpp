// Unit tests for decoding and scoring, cross-checked against brute-force
// oracles on randomized inputs.
#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "jssm/metrics.hpp"
#include "support/oracles.hpp"

using namespace jssm;
using jssm::testing::brute_score_arguments_micro;
using jssm::testing::brute_score_events;

namespace {

// Random but structurally valid prediction: spans decoded from random labels
// are guaranteed non-overlapping per slot.
Prediction random_prediction(Rng& rng, int num_events, int num_tokens, int num_slots) {
  Prediction p;
  for (int k = 1; k <= num_events; ++k) {
    if (rng.bernoulli(0.35)) p.events.insert(k);
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(num_tokens) * (num_slots + 1), 0);
  for (int t = 0; t < num_tokens; ++t) {
    for (int s = 1; s <= num_slots; ++s) {
      if (rng.bernoulli(0.18)) labels[static_cast<std::size_t>(t) * (num_slots + 1) + s] = 1;
    }
  }
  p.spans = labels_to_spans(labels, num_tokens, num_slots);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("decode_events thresholds scores") {
  const std::vector<double> scores = {0.9, 0.1, 0.8};  // the [1, 0, 1] case
  CHECK(decode_events(scores, 0.5) == std::set<int>{1, 3});
  const std::vector<double> low = {0.2, 0.1};
  CHECK(decode_events(low, 0.5).empty());
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(decode_events(scores, ninf) == std::set<int>{1, 2, 3});
}

TEST_CASE("decode_spans finds maximal runs") {
  // Two slots; column 1 holds scores 0.9 0.9 0.1: one span (0,2).
  const int n = 3, S = 2;
  std::vector<double> scores = {
      0.0, 0.9, 0.0,  //
      0.0, 0.9, 0.0,  //
      0.0, 0.1, 0.0,
  };
  auto spans = decode_spans(scores, n, S, 0.5);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == ArgSpan{0, 2, 1});

  // All below threshold: nothing.
  CHECK(decode_spans(std::vector<double>(9, 0.0), n, S, 0.5).empty());

  // The None column never emits, even with high scores.
  std::vector<double> none_only = {0.9, 0.0, 0.0, 0.9, 0.0, 0.0, 0.9, 0.0, 0.0};
  CHECK(decode_spans(none_only, n, S, 0.5).empty());
}

TEST_CASE("decode_spans matches a brute-force run finder on random scores") {
  Rng rng(31);
  for (int it = 0; it < 50; ++it) {
    const int n = rng.uniform_int(1, 12);
    const int S = rng.uniform_int(1, 4);
    std::vector<double> scores(static_cast<std::size_t>(n) * (S + 1));
    for (double& x : scores) x = rng.uniform();
    const double tau = 0.5;
    auto fast = decode_spans(scores, n, S, tau);
    // Oracle: for every (start, end, slot) candidate, emit iff all inside are
    // on and both boundaries are off.
    std::vector<ArgSpan> slow;
    for (int slot = 1; slot <= S; ++slot) {
      auto on = [&](int t) {
        return scores[static_cast<std::size_t>(t) * (S + 1) + slot] >= tau;
      };
      for (int start = 0; start < n; ++start) {
        for (int end = start + 1; end <= n; ++end) {
          bool all_on = true;
          for (int t = start; t < end; ++t) all_on = all_on && on(t);
          const bool left_closed = start == 0 || !on(start - 1);
          const bool right_closed = end == n || !on(end);
          if (all_on && left_closed && right_closed) slow.push_back({start, end, slot});
        }
      }
    }
    std::sort(slow.begin(), slow.end(), [](const ArgSpan& a, const ArgSpan& b) {
      return a.slot != b.slot ? a.slot < b.slot : a.start < b.start;
    });
    CHECK(fast == slow);
  }
}

TEST_CASE("decode_spans inverts span-to-label encoding") {
  Rng rng(55);
  for (int it = 0; it < 30; ++it) {
    const int n = rng.uniform_int(1, 12);
    const int S = rng.uniform_int(1, 4);
    Prediction p = random_prediction(rng, 1, n, S);
    const auto labels = spans_to_labels(p.spans, n, S);
    const std::vector<double> scores(labels.begin(), labels.end());
    CHECK(decode_spans(scores, n, S, 0.5) == p.spans);
  }
}

TEST_CASE("score_events worked examples") {
  // Perfect prediction.
  std::vector<Prediction> golds(3), preds(3);
  golds[0].events = {1};
  golds[1].events = {2};
  golds[2].events = {1, 2};
  preds = golds;
  for (auto avg : {Averaging::micro, Averaging::macro}) {
    const PRF r = score_events(preds, golds, avg, 2);
    CHECK(r.p == doctest::Approx(1.0));
    CHECK(r.r == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(1.0));
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
  }
  CHECK(score_events(preds, golds, Averaging::micro, 2).tp == 4);

  // gold {Attack}, pred {Attack, Die}: micro P = 0.5, R = 1, F1 = 2/3.
  std::vector<Prediction> g1(1), p1(1);
  g1[0].events = {1};
  p1[0].events = {1, 2};
  const PRF r = score_events(p1, g1, Averaging::micro, 2);
  CHECK(r.p == doctest::Approx(0.5));
  CHECK(r.r == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("score_events equals the brute-force scorer on 100 random corpora") {
  for (int corpus = 0; corpus < 100; ++corpus) {
    Rng rng(500 + corpus);
    const int E = rng.uniform_int(1, 5);
    const int sentences = rng.uniform_int(1, 40);
    std::vector<Prediction> preds, golds;
    for (int i = 0; i < sentences; ++i) {
      preds.push_back(random_prediction(rng, E, 6, 2));
      golds.push_back(random_prediction(rng, E, 6, 2));
    }
    for (auto avg : {Averaging::micro, Averaging::macro}) {
      const PRF mine = score_events(preds, golds, avg, E);
      const PRF oracle = brute_score_events(preds, golds, avg, E);
      CHECK(mine.tp == oracle.tp);
      CHECK(mine.fp == oracle.fp);
      CHECK(mine.fn == oracle.fn);
      CHECK(mine.p == doctest::Approx(oracle.p).epsilon(1e-12));
      CHECK(mine.r == doctest::Approx(oracle.r).epsilon(1e-12));
      CHECK(mine.f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
    }
  }
}

TEST_CASE("score_arguments worked examples") {
  std::vector<Prediction> golds(1), preds(1);
  golds[0].spans = {{0, 2, 1}, {3, 4, 2}};
  preds[0].spans = {{0, 2, 1}, {3, 4, 2}};
  CHECK(score_arguments(preds, golds, ArgMatchMode::cls, Averaging::micro, 3).f1 ==
        doctest::Approx(1.0));

  // Right span, wrong role: counts for ID, not CLS.
  preds[0].spans = {{0, 2, 3}, {3, 4, 2}};
  const PRF id = score_arguments(preds, golds, ArgMatchMode::id, Averaging::micro, 3);
  const PRF cls = score_arguments(preds, golds, ArgMatchMode::cls, Averaging::micro, 3);
  CHECK(id.tp == 2);
  CHECK(cls.tp == 1);
  CHECK(id.tp >= cls.tp);
}

TEST_CASE("score_arguments equals the brute-force scorer on 100 random corpora") {
  for (int corpus = 0; corpus < 100; ++corpus) {
    Rng rng(900 + corpus);
    const int S = rng.uniform_int(1, 4);
    const int sentences = rng.uniform_int(1, 30);
    std::vector<Prediction> preds, golds;
    for (int i = 0; i < sentences; ++i) {
      const int n = rng.uniform_int(1, 10);
      preds.push_back(random_prediction(rng, 2, n, S));
      golds.push_back(random_prediction(rng, 2, n, S));
    }
    for (bool need_slot : {false, true}) {
      const auto mode = need_slot ? ArgMatchMode::cls : ArgMatchMode::id;
      const PRF mine = score_arguments(preds, golds, mode, Averaging::micro, S);
      const PRF oracle = brute_score_arguments_micro(preds, golds, need_slot);
      CHECK(mine.tp == oracle.tp);
      CHECK(mine.fp == oracle.fp);
      CHECK(mine.fn == oracle.fn);
      CHECK(mine.f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
    }
    // ID never counts fewer matches than CLS.
    CHECK(score_arguments(preds, golds, ArgMatchMode::id, Averaging::micro, S).tp >=
          score_arguments(preds, golds, ArgMatchMode::cls, Averaging::micro, S).tp);
  }
}

TEST_CASE("micro scores are invariant under example permutation") {
  Rng rng(77);
  std::vector<Prediction> preds, golds;
  for (int i = 0; i < 20; ++i) {
    preds.push_back(random_prediction(rng, 3, 8, 3));
    golds.push_back(random_prediction(rng, 3, 8, 3));
  }
  const PRF base_e = score_events(preds, golds, Averaging::micro, 3);
  const PRF base_a = score_arguments(preds, golds, ArgMatchMode::cls, Averaging::micro, 3);
  // Reverse both in lockstep.
  std::reverse(preds.begin(), preds.end());
  std::reverse(golds.begin(), golds.end());
  const PRF perm_e = score_events(preds, golds, Averaging::micro, 3);
  const PRF perm_a = score_arguments(preds, golds, ArgMatchMode::cls, Averaging::micro, 3);
  CHECK(base_e.tp == perm_e.tp);
  CHECK(base_e.f1 == doctest::Approx(perm_e.f1).epsilon(1e-12));
  CHECK(base_a.tp == perm_a.tp);
  CHECK(base_a.f1 == doctest::Approx(perm_a.f1).epsilon(1e-12));
}

TEST_CASE("scorer symmetry: identical inputs score perfectly") {
  Rng rng(88);
  std::vector<Prediction> preds;
  long gold_events = 0, gold_spans = 0;
  for (int i = 0; i < 15; ++i) {
    preds.push_back(random_prediction(rng, 3, 8, 3));
    gold_events += static_cast<long>(preds.back().events.size());
    gold_spans += static_cast<long>(preds.back().spans.size());
  }
  const PRF e = score_events(preds, preds, Averaging::micro, 3);
  CHECK(e.tp == gold_events);
  CHECK(e.fp == 0);
  CHECK(e.fn == 0);
  const PRF a = score_arguments(preds, preds, ArgMatchMode::cls, Averaging::micro, 3);
  CHECK(a.tp == gold_spans);
  CHECK(a.fp == 0);
  CHECK(a.fn == 0);
}

TEST_CASE("per-type breakdown filters, sorts, and counts") {
  EventSchema schema = make_synthetic_schema(3, 4, 2);
  std::vector<Prediction> golds(7), preds(7);
  // Evt1 appears 4 times, Evt2 twice, Evt3 once.
  for (int i = 0; i < 4; ++i) golds[i].events.insert(1);
  golds[4].events.insert(2);
  golds[5].events.insert(2);
  golds[6].events.insert(3);
  preds = golds;  // perfect predictions

  auto rows = per_type_breakdown(preds, golds, schema, 2);
  REQUIRE(rows.size() == 2);  // the singleton Evt3 is filtered out
  CHECK(rows[0].name == "Evt1");
  CHECK(rows[0].gold_count == 4);
  CHECK(rows[1].name == "Evt2");
  CHECK(rows[1].gold_count == 2);
  for (const auto& row : rows) CHECK(row.f1 == doctest::Approx(1.0));

  // Unfiltered counts sum to the total number of gold event mentions.
  auto all_rows = per_type_breakdown(preds, golds, schema, 1);
  long total = 0;
  for (const auto& row : all_rows) total += row.gold_count;
  CHECK(total == 7);
}

TEST_CASE("report carries both averagings and serializes") {
  Rng rng(99);
  EventSchema schema = make_synthetic_schema(2, 3, 2);
  std::vector<Prediction> preds, golds;
  for (int i = 0; i < 10; ++i) {
    preds.push_back(random_prediction(rng, 2, 6, 3));
    golds.push_back(random_prediction(rng, 2, 6, 3));
  }
  MetricsReport r = build_report(preds, golds, schema, Averaging::macro, 0.5);
  CHECK(r.averaging == Averaging::macro);
  const std::string json = r.to_json();
  CHECK(json.find("\"event_id_cls\"") != std::string::npos);
  CHECK(json.find("\"argument_id\"") != std::string::npos);
  CHECK(json.find("\"argument_cls\"") != std::string::npos);
  CHECK(json.find("\"secondary\"") != std::string::npos);
  CHECK(json.find("\"per_type\"") != std::string::npos);
  const std::string csv = r.to_csv();
  CHECK(csv.find("event_id_cls,macro") != std::string::npos);
  CHECK(csv.find("event_id_cls,micro") != std::string::npos);
  CHECK(!r.to_text().empty());
}

TEST_SUITE_END();
