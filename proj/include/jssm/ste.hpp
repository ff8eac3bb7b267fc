// ste.hpp - semantic type embeddings: encode a type's definition text (static),
// the definition together with the target sentence (dynamic), or an
// alpha-weighted mix; frozen random tables replace them in ablations.
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jssm/encoder.hpp"
#include "jssm/schema.hpp"

namespace jssm {

enum class SteMode { static_only, dynamic, mixed, random };

enum class TypeFamily { event, slot, entity };

struct TypeEmbeddingTable {
  TypeFamily family = TypeFamily::event;
  SteMode mode = SteMode::static_only;
  std::vector<Tensor> vectors;  // indexed by type id, 0..familySize

  Tensor matrix() const { return stack_rows(vectors); }
};

/// [CLS] output of the encoded question; shares gradients with the encoder.
Tensor static_ste(const EncoderParams& params, const Vocab& vocab, const std::string& question,
                  bool training, Rng* dropout_rng);

/// [CLS] output of question [SEP] sentence; *truncated reports tail loss.
Tensor dynamic_ste(const EncoderParams& params, const Vocab& vocab, const std::string& question,
                   std::span<const std::string> sentence_tokens, bool training, Rng* dropout_rng,
                   bool* truncated = nullptr);

/// alpha * static + (1 - alpha) * dynamic. The boundaries return the inputs
/// unchanged, bit for bit.
Tensor mix_ste(const Tensor& static_vec, const Tensor& dynamic_vec, double alpha);

struct SteConfig {
  QuestionStrategy strategy = QuestionStrategy::definition;
  double alpha = 0.5;
  bool no_dynamic = false;      // force alpha = 1 (event STEs purely static)
  bool random_event = false;    // frozen seeded Gaussian instead of encoded STE
  bool random_slot = false;
  bool random_entity = false;
  std::uint64_t random_seed = 0;
};

/// Owns the question texts and the (optional) frozen random tables; computes
/// type embedding tables through the live encoder on demand.
class SteModule {
 public:
  struct Tables {
    TypeEmbeddingTable entity;        // static (Eq. 8 convention)
    TypeEmbeddingTable slot;          // static
    TypeEmbeddingTable event_static;  // static halves; dynamic mixed in at use time
  };

  SteModule() = default;
  SteModule(std::shared_ptr<const EventSchema> schema, const SteConfig& cfg, int dim);

  /// Entity/slot tables and the static event halves, one encoder pass per
  /// question. Call once per step (training) or once per run (frozen encoder).
  Tables prepare(const EncoderParams& params, const Vocab& vocab, bool training,
                 Rng* dropout_rng) const;

  /// Event STE for one sentence: static when alpha==1 (the dynamic pass is
  /// skipped entirely), otherwise the alpha-mix with the dynamic encoding.
  Tensor event_ste(const Tables& tables, int event_id, const EncoderParams& params,
                   const Vocab& vocab, std::span<const std::string> sentence_tokens,
                   bool training, Rng* dropout_rng) const;

  double effective_alpha() const { return cfg_.no_dynamic ? 1.0 : cfg_.alpha; }
  const SteConfig& config() const { return cfg_; }
  const std::vector<std::string>& event_question_texts() const { return event_questions_; }

 private:
  std::shared_ptr<const EventSchema> schema_;
  SteConfig cfg_;
  int dim_ = 0;
  std::vector<std::string> event_questions_;
  std::vector<std::string> slot_questions_;
  std::vector<std::string> entity_questions_;
  std::vector<Tensor> random_event_;
  std::vector<Tensor> random_slot_;
  std::vector<Tensor> random_entity_;
};

}  // namespace jssm
