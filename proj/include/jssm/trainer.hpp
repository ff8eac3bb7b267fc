// trainer.hpp - the full pipeline: model assembly, per-sentence forward pass,
// mini-batch training with early stopping, evaluation, checkpoints, and the
// ablation harness.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jssm/biattention.hpp"
#include "jssm/corpus.hpp"
#include "jssm/encoder.hpp"
#include "jssm/heads.hpp"
#include "jssm/metrics.hpp"
#include "jssm/optim.hpp"
#include "jssm/ste.hpp"

namespace jssm {

struct AblationFlags {
  bool no_dse = false;            // event feature = unmasked mean of slot features
  bool no_dynamic_ste = false;    // alpha forced to 1
  bool no_entity_ste = false;     // skip the entity addition into token features
  bool random_ste_entity = false; // frozen random vectors replace the table
  bool random_ste_slot = false;
  bool random_ste_event = false;

  bool any() const {
    return no_dse || no_dynamic_ste || no_entity_ste || random_ste_entity || random_ste_slot ||
           random_ste_event;
  }
};

/// Canonical variant names: full, no_dse, no_dynamic_ste, no_entity_ste,
/// random_ste_entity, random_ste_slot, random_ste_event.
AblationFlags ablation_from_name(const std::string& name);
const std::vector<std::string>& ablation_variant_names();
std::string ablation_label(const std::string& name);  // table label, e.g. "-DSE"

struct TrainConfig {
  double learning_rate = 1e-3;  // desk-scale default; the reference setup uses 1.5e-5
  double dropout = 0.6;
  int batch_size = 16;
  double alpha = 0.5;
  double lambda = 0.3;
  int epochs = 10;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  QuestionStrategy strategy = QuestionStrategy::definition;
  Averaging averaging = Averaging::macro;
  AblationFlags ablation;
  bool use_sgd = false;
  bool normalized_event_attention = false;
  int patience = 5;
  EncoderConfig encoder;  // encoder.dropout is overridden by `dropout`

  void validate() const;
};

struct Model {
  std::shared_ptr<const EventSchema> schema;
  Vocab vocab;
  EventSlotMask mask;
  EncoderParams encoder;
  BiAttentionParams biattention;
  EventHeadParams event_heads;
  ArgHeadParams arg_heads;
  SteModule ste;
  TrainConfig cfg;

  static Model init(std::shared_ptr<const EventSchema> schema, Vocab vocab,
                    const TrainConfig& cfg);

  /// Stable-ordered trainable parameters (checkpoint and optimizer order).
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  void save_checkpoint(const std::string& path) const;
  /// Rebuilds the model from config + schema + vocab, then overwrites every
  /// trainable tensor from the checkpoint.
  static Model load_checkpoint(const std::string& path,
                               std::shared_ptr<const EventSchema> schema, Vocab vocab,
                               const TrainConfig& cfg);
};

struct ForwardResult {
  Tensor event_scores;  // [E]
  Tensor arg_score_mat; // n x (S+1)
  Tensor loss;          // scalar joint loss
  Tensor event_loss_value;
  Tensor arg_loss_value;
  int used_tokens = 0;  // after truncation, if any
};

/// Full pipeline on one example. `tables` may be shared across a batch; when
/// null they are computed in place. `dropout_rng` is required in training mode
/// when dropout > 0.
ForwardResult forward(const Model& model, const Example& example, bool training,
                      Rng* dropout_rng, const SteModule::Tables* tables = nullptr);

/// Examples longer than the encoder window are clipped (spans adjusted); the
/// counter reports how many times that happened.
long truncated_examples();
void reset_truncated_examples();

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double event_loss = 0.0;
  double arg_loss = 0.0;
  MetricsReport dev;
  bool has_dev = false;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 1-based; -1 when no dev selection happened
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;
using StopCallback = std::function<bool(const EpochStats&)>;

/// Deterministic under cfg.seed. Keeps the best-dev-F1 parameters (event
/// ID&CLS under cfg.averaging); early-stops after cfg.patience epochs without
/// improvement. A `stop_when` callback that returns true ends training right
/// there and keeps the current parameters instead of the best-dev snapshot.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}, const StopCallback& stop_when = {});

/// Decodes and scores a corpus; never mutates parameters. Optional outputs
/// receive the decoded predictions and the gold structures.
MetricsReport evaluate(const Model& model, const Corpus& corpus,
                       std::vector<Prediction>* out_preds = nullptr,
                       std::vector<Prediction>* out_golds = nullptr);

struct MeanPRF {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

struct VariantMetrics {
  MeanPRF event_macro, arg_id_macro, arg_cls_macro;
  MeanPRF event_micro, arg_id_micro, arg_cls_micro;
};

struct AblationRow {
  std::string variant;  // canonical name
  std::string label;    // rendered label
  VariantMetrics mean;
  VariantMetrics delta;  // vs the full model (zeros for the full row)
};

struct AblationTable {
  std::vector<AblationRow> rows;  // rows[0] is the full model
  int num_seeds = 0;
  std::string to_json() const;
  std::string to_text() const;
};

/// Trains full + each variant over the seeds and reports seed-mean metrics and
/// deltas against the full model.
AblationTable ablate(const Corpus& train_corpus, const Corpus& dev_corpus,
                     const Corpus& test_corpus, const TrainConfig& base,
                     const std::vector<std::string>& variants,
                     const std::vector<std::uint64_t>& seeds,
                     const EpochCallback& on_epoch = {});

}  // namespace jssm
