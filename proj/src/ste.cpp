#include "jssm/ste.hpp"

namespace jssm {

Tensor static_ste(const EncoderParams& params, const Vocab& vocab, const std::string& question,
                  bool training, Rng* dropout_rng) {
  if (question.empty()) throw ContractError("static_ste: empty question");
  const TokenizedInput input = tokenize_text(vocab, question, std::nullopt, params.cfg.max_len);
  return row(encode(params, input, training, dropout_rng), 0);
}

Tensor dynamic_ste(const EncoderParams& params, const Vocab& vocab, const std::string& question,
                   std::span<const std::string> sentence_tokens, bool training, Rng* dropout_rng,
                   bool* truncated) {
  if (question.empty()) throw ContractError("dynamic_ste: empty question");
  const std::vector<std::string> q_tokens = split_whitespace(question);
  TokenizedInput input = tokenize(vocab, q_tokens, sentence_tokens, params.cfg.max_len);
  if (sentence_tokens.empty()) {
    // Degenerate sentence still gets its [SEP] so the two-segment shape holds.
    input.ids.push_back(Vocab::kSep);
    input.segments.push_back(1);
    if (static_cast<int>(input.ids.size()) > params.cfg.max_len) {
      input.ids.pop_back();
      input.segments.pop_back();
      input.truncated = true;
    }
  }
  if (truncated != nullptr) *truncated = input.truncated;
  return row(encode(params, input, training, dropout_rng), 0);
}

Tensor mix_ste(const Tensor& static_vec, const Tensor& dynamic_vec, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw ConfigError("mix_ste: alpha must be in [0,1], got " + std::to_string(alpha));
  }
  if (static_vec.shape() != dynamic_vec.shape()) {
    throw ShapeError("mix_ste: shape mismatch " + shape_str(static_vec.shape()) + " vs " +
                     shape_str(dynamic_vec.shape()));
  }
  if (alpha == 1.0) return static_vec;
  if (alpha == 0.0) return dynamic_vec;
  return add(scale(static_vec, alpha), scale(dynamic_vec, 1.0 - alpha));
}

SteModule::SteModule(std::shared_ptr<const EventSchema> schema, const SteConfig& cfg, int dim)
    : schema_(std::move(schema)), cfg_(cfg), dim_(dim) {
  if (!schema_) throw ContractError("SteModule: null schema");
  if (cfg_.alpha < 0.0 || cfg_.alpha > 1.0) {
    throw ConfigError("SteModule: alpha must be in [0,1], got " + std::to_string(cfg_.alpha));
  }
  event_questions_ = event_questions(*schema_, cfg_.strategy);
  slot_questions_ = slot_questions(*schema_);
  entity_questions_ = entity_questions(*schema_);

  // Frozen random tables are generated once and never receive gradients.
  auto fill_random = [this](std::vector<Tensor>& table, int count, std::uint64_t stream) {
    Rng rng = Rng(cfg_.random_seed).fork(stream);
    table.reserve(count);
    for (int i = 0; i < count; ++i) table.push_back(Tensor::randn({dim_}, rng, 1.0, false));
  };
  if (cfg_.random_event) fill_random(random_event_, schema_->num_events() + 1, 11);
  if (cfg_.random_slot) fill_random(random_slot_, schema_->num_slots() + 1, 12);
  if (cfg_.random_entity) fill_random(random_entity_, schema_->num_entities() + 1, 13);
}

SteModule::Tables SteModule::prepare(const EncoderParams& params, const Vocab& vocab,
                                     bool training, Rng* dropout_rng) const {
  if (!schema_) throw ContractError("SteModule: not initialized");
  Tables t;
  t.entity.family = TypeFamily::entity;
  t.slot.family = TypeFamily::slot;
  t.event_static.family = TypeFamily::event;
  t.entity.mode = cfg_.random_entity ? SteMode::random : SteMode::static_only;
  t.slot.mode = cfg_.random_slot ? SteMode::random : SteMode::static_only;
  t.event_static.mode = cfg_.random_event
                            ? SteMode::random
                            : (effective_alpha() == 1.0 ? SteMode::static_only : SteMode::mixed);

  if (cfg_.random_entity) {
    t.entity.vectors = random_entity_;
  } else {
    for (const std::string& q : entity_questions_) {
      t.entity.vectors.push_back(static_ste(params, vocab, q, training, dropout_rng));
    }
  }
  if (cfg_.random_slot) {
    t.slot.vectors = random_slot_;
  } else {
    for (const std::string& q : slot_questions_) {
      t.slot.vectors.push_back(static_ste(params, vocab, q, training, dropout_rng));
    }
  }
  if (cfg_.random_event) {
    t.event_static.vectors = random_event_;
  } else {
    for (const std::string& q : event_questions_) {
      t.event_static.vectors.push_back(static_ste(params, vocab, q, training, dropout_rng));
    }
  }
  return t;
}

Tensor SteModule::event_ste(const Tables& tables, int event_id, const EncoderParams& params,
                            const Vocab& vocab, std::span<const std::string> sentence_tokens,
                            bool training, Rng* dropout_rng) const {
  if (event_id < 0 || event_id >= static_cast<int>(tables.event_static.vectors.size())) {
    throw ContractError("event_ste: event id " + std::to_string(event_id) + " out of range");
  }
  if (cfg_.random_event) return random_event_[event_id];
  const double alpha = effective_alpha();
  const Tensor& stat = tables.event_static.vectors[event_id];
  if (alpha == 1.0) return stat;  // dynamic pass skipped entirely
  Tensor dyn = dynamic_ste(params, vocab, event_questions_[event_id], sentence_tokens, training,
                           dropout_rng);
  return mix_ste(stat, dyn, alpha);
}

}  // namespace jssm
