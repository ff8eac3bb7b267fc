// Unit tests for the training pipeline: forward pass, training loop,
// evaluation, checkpoints, and the ablation harness.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "jssm/trainer.hpp"
#include "support/finite_diff.hpp"

using namespace jssm;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.blocks = 1;
  cfg.encoder.ffn_dim = 16;
  cfg.encoder.max_len = 32;
  cfg.dropout = 0.0;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.seed = 5;
  return cfg;
}

struct TinyWorld {
  std::shared_ptr<const EventSchema> schema;
  Corpus train_c, dev_c, test_c;

  explicit TinyWorld(int sentences = 60, std::uint64_t seed = 3) {
    schema = std::make_shared<EventSchema>(make_synthetic_schema(2, 4, 2));
    GenConfig gc;
    gc.sentences = sentences;
    gc.vocab_size = 80;
    gc.max_length = 24;
    gc.seed = seed;
    Corpus all = generate_corpus(schema, gc);
    SplitResult parts = split_corpus(all, 0.7, 0.15, 0.15, 1);
    train_c = std::move(parts.train);
    dev_c = std::move(parts.dev);
    test_c = std::move(parts.test);
  }
};

Model fresh_model(const TinyWorld& w, const TrainConfig& cfg) {
  return Model::init(w.schema, Vocab::build(w.train_c), cfg);
}

std::vector<std::vector<double>> param_values(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.named_params()) {
    out.emplace_back(t.data().begin(), t.data().end());
  }
  return out;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("forward produces finite scores and losses on an untrained model") {
  TinyWorld w;
  Model model = fresh_model(w, tiny_config());
  const Example& ex = w.train_c.examples[0];
  ForwardResult r = forward(model, ex, false, nullptr);
  CHECK(r.event_scores.shape() == Shape{2});
  CHECK(r.arg_score_mat.shape() == Shape{ex.num_tokens(), 5});
  for (double x : r.event_scores.data()) CHECK(std::isfinite(x));
  for (double x : r.arg_score_mat.data()) CHECK(std::isfinite(x));
  CHECK(std::isfinite(r.loss.item()));
  CHECK(r.loss.item() >= 0.0);
}

TEST_CASE("lambda boundaries select one loss exactly") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.lambda = 1.0;
  Model model = fresh_model(w, cfg);
  ForwardResult r = forward(model, w.train_c.examples[0], false, nullptr);
  CHECK(r.loss.node() == r.event_loss_value.node());  // the same tensor

  cfg.lambda = 0.0;
  Model m0 = fresh_model(w, cfg);
  ForwardResult r0 = forward(m0, w.train_c.examples[0], false, nullptr);
  CHECK(r0.loss.node() == r0.arg_loss_value.node());
}

TEST_CASE("full-pipeline gradients match finite differences on a 3-token example") {
  TinyWorld w;
  Model model = fresh_model(w, tiny_config());
  Example ex;
  ex.tokens = {"cue1a", "s1f0", "g0"};
  ex.entity_ids = {0, 1, 0};
  ex.event_labels = {1, 0};
  ex.gold_spans = {{1, 2, 1}};
  ex.arg_labels = spans_to_labels(ex.gold_spans, 3, w.schema->num_slots());

  // Ten parameters sampled across every module of the pipeline.
  auto params = model.named_params();
  std::vector<Tensor> sampled;
  for (const char* name :
       {"encoder.token_emb", "encoder.position_emb", "encoder.block0.wq", "encoder.block0.ff1_w",
        "encoder.block0.ln1_gain", "biattention.slot_query_w", "biattention.seq_value_w",
        "event_head1.w1", "arg_head1.w1", "arg_head0.b1"}) {
    for (auto& [pname, t] : params) {
      if (pname == name) sampled.push_back(t);
    }
  }
  REQUIRE(sampled.size() == 10);
  auto fwd = [&] { return forward(model, ex, false, nullptr).loss; };
  Rng sample_rng(17);
  auto res = jssm::testing::grad_check_sampled(sampled, fwd, sample_rng, 2);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("epochs=0 returns the initialized model with empty history") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult r = train(w.train_c, w.dev_c, cfg);
  CHECK(r.history.epochs.empty());
  CHECK(r.history.best_epoch == -1);
  // Parameters equal a fresh init under the same seed.
  Model reference = fresh_model(w, cfg);
  auto a = param_values(r.model);
  auto b = param_values(reference);
  CHECK(a == b);
}

TEST_CASE("training is deterministic and loss decreases on the separable corpus") {
  TinyWorld w(240, 11);
  TrainConfig cfg = tiny_config();
  cfg.encoder.dim = 16;
  cfg.encoder.ffn_dim = 32;
  cfg.epochs = 5;
  cfg.patience = 50;  // no early stop in this test
  TrainResult r1 = train(w.train_c, w.dev_c, cfg);
  TrainResult r2 = train(w.train_c, w.dev_c, cfg);

  REQUIRE(r1.history.epochs.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(r1.history.epochs[e].loss == r2.history.epochs[e].loss);  // bitwise
    CHECK(std::isfinite(r1.history.epochs[e].loss));
  }
  CHECK(param_values(r1.model) == param_values(r2.model));
  // Strict decrease over the first five epochs under this fixed seed.
  for (std::size_t e = 1; e < 5; ++e) {
    CHECK(r1.history.epochs[e].loss < r1.history.epochs[e - 1].loss);
  }
}

TEST_CASE("identical training runs write identical checkpoints") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r1 = train(w.train_c, w.dev_c, cfg);
  TrainResult r2 = train(w.train_c, w.dev_c, cfg);
  const std::string p1 = temp_path("jssm_ck1.bin"), p2 = temp_path("jssm_ck2.bin");
  r1.model.save_checkpoint(p1);
  r2.model.save_checkpoint(p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("evaluation is pure and repeatable") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r = train(w.train_c, w.dev_c, cfg);
  auto before = param_values(r.model);
  MetricsReport a = evaluate(r.model, w.test_c);
  MetricsReport b = evaluate(r.model, w.test_c);
  auto after = param_values(r.model);
  CHECK(before == after);  // bitwise: no parameter mutation
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("evaluation report matches rescoring the decoded predictions") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r = train(w.train_c, w.dev_c, cfg);
  std::vector<Prediction> preds, golds;
  MetricsReport report = evaluate(r.model, w.test_c, &preds, &golds);
  REQUIRE(preds.size() == w.test_c.size());
  MetricsReport again = build_report(preds, golds, *w.schema, cfg.averaging, cfg.threshold);
  CHECK(report.to_json() == again.to_json());
}

TEST_CASE("checkpoint round-trips bitwise") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r = train(w.train_c, w.dev_c, cfg);
  const std::string path = temp_path("jssm_roundtrip.ckpt");
  r.model.save_checkpoint(path);
  Model loaded = Model::load_checkpoint(path, w.schema, r.model.vocab, cfg);
  CHECK(param_values(loaded) == param_values(r.model));
  CHECK(evaluate(loaded, w.test_c).to_json() == evaluate(r.model, w.test_c).to_json());
  std::remove(path.c_str());
}

TEST_CASE("checkpoint header mismatches are rejected") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  Model model = fresh_model(w, cfg);
  const std::string path = temp_path("jssm_header.ckpt");
  model.save_checkpoint(path);
  // A different schema (different E/S) must be rejected.
  auto other = std::make_shared<EventSchema>(make_synthetic_schema(3, 5, 2));
  CHECK_THROWS_AS(Model::load_checkpoint(path, other, model.vocab, cfg), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("ablation flags reroute the pipeline without changing shapes") {
  TinyWorld w;
  const Example& ex = w.train_c.examples[0];

  TrainConfig base = tiny_config();
  Model full = fresh_model(w, base);
  ForwardResult rf = forward(full, ex, false, nullptr);

  for (const std::string& name : ablation_variant_names()) {
    TrainConfig cfg = tiny_config();
    cfg.ablation = ablation_from_name(name);
    Model m = fresh_model(w, cfg);
    ForwardResult r = forward(m, ex, false, nullptr);
    CHECK(r.event_scores.shape() == rf.event_scores.shape());
    CHECK(r.arg_score_mat.shape() == rf.arg_score_mat.shape());
    CHECK(std::isfinite(r.loss.item()));
  }
  CHECK_THROWS_AS(ablation_from_name("bogus"), ConfigError);
}

TEST_CASE("frozen random type embeddings survive training unchanged") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;
  cfg.ablation.random_ste_event = true;
  TrainResult r = train(w.train_c, w.dev_c, cfg);
  // A fresh model with the same seed regenerates the same frozen table.
  Model reference = Model::init(w.schema, r.model.vocab, cfg);
  auto trained_tables = r.model.ste.prepare(r.model.encoder, r.model.vocab, false, nullptr);
  auto fresh_tables = reference.ste.prepare(reference.encoder, reference.vocab, false, nullptr);
  REQUIRE(trained_tables.event_static.vectors.size() ==
          fresh_tables.event_static.vectors.size());
  for (std::size_t k = 0; k < trained_tables.event_static.vectors.size(); ++k) {
    const auto a = trained_tables.event_static.vectors[k].data();
    const auto b = fresh_tables.event_static.vectors[k].data();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  // While the trainable parameters did move.
  CHECK(param_values(r.model) != param_values(reference));
}

TEST_CASE("ablate builds a table with full plus requested variants") {
  TinyWorld w(40);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  AblationTable table = ablate(w.train_c, w.dev_c, w.test_c, cfg, {"no_dse"}, {1, 2});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].variant == "full");
  CHECK(table.rows[1].variant == "no_dse");
  CHECK(table.rows[1].label == "-DSE");
  CHECK(table.num_seeds == 2);
  // Full row deltas are zero by construction.
  CHECK(table.rows[0].delta.event_macro.f1 == 0.0);
  const std::string json = table.to_json();
  CHECK(json.find("delta_vs_full") != std::string::npos);
  CHECK(!table.to_text().empty());

  AblationTable only_full = ablate(w.train_c, w.dev_c, w.test_c, cfg, {}, {1});
  CHECK(only_full.rows.size() == 1);

  CHECK_THROWS_AS(ablate(w.train_c, w.dev_c, w.test_c, cfg, {"bogus"}, {1}), ConfigError);
  CHECK_THROWS_AS(ablate(w.train_c, w.dev_c, w.test_c, cfg, {}, {}), ContractError);
}

TEST_CASE("training aborts with a diagnostic when the loss diverges") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.use_sgd = true;
  cfg.learning_rate = 1e200;  // guarantees an overflow within two steps
  cfg.epochs = 3;
  CHECK_THROWS_AS(train(w.train_c, w.dev_c, cfg), DivergenceError);
}

TEST_CASE("train validates configuration and inputs") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(train(w.train_c, w.dev_c, cfg), ConfigError);
  cfg = tiny_config();
  cfg.lambda = -0.2;
  CHECK_THROWS_AS(train(w.train_c, w.dev_c, cfg), ConfigError);
  cfg = tiny_config();
  Corpus empty;
  empty.schema = w.schema;
  CHECK_THROWS_AS(train(empty, w.dev_c, cfg), ContractError);
}

TEST_CASE("over-length examples are clipped, with spans adjusted") {
  TinyWorld w;
  TrainConfig cfg = tiny_config();
  cfg.encoder.max_len = 8;  // room for 6 tokens
  Model model = fresh_model(w, cfg);
  Example ex;
  for (int i = 0; i < 12; ++i) {
    ex.tokens.push_back("g0");
    ex.entity_ids.push_back(0);
  }
  ex.event_labels = {1, 0};
  ex.gold_spans = {{4, 8, 1}};  // clipped to [4, 6)
  ex.arg_labels = spans_to_labels(ex.gold_spans, 12, w.schema->num_slots());
  reset_truncated_examples();
  ForwardResult r = forward(model, ex, false, nullptr);
  CHECK(r.used_tokens == 6);
  CHECK(r.arg_score_mat.shape() == Shape{6, 5});
  CHECK(truncated_examples() == 1);
  reset_truncated_examples();
}

TEST_SUITE_END();
