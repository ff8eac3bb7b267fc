// heads.hpp - event detection and argument extraction output heads plus the
// joint loss. The event level of the dynamic structure encoding (masked cosine
// attention-adding over slot features) lives here.
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jssm/tensor.hpp"

namespace jssm {

/// Two-layer affine network sigma(sigma((x + ste) W1 + b1) W2 + b2), sigma = GELU.
struct AffineHead {
  Tensor w1;  // d x d
  Tensor b1;  // d
  Tensor w2;  // d x 1
  Tensor b2;  // 1

  static AffineHead init(int dim, Rng& rng);
};

/// One independent affine network per real event type (ids 1..E).
struct EventHeadParams {
  std::vector<AffineHead> heads;  // heads[k-1] scores event id k

  static EventHeadParams init(int num_events, int dim, Rng& rng);
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out) const;
};

/// One independent affine network per slot type including None (ids 0..S).
struct ArgHeadParams {
  std::vector<AffineHead> heads;  // heads[k] scores slot id k

  static ArgHeadParams init(int num_slots, int dim, Rng& rng);
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out) const;
};

/// Masked cosine attention-adding: w_i = cosine(event_ste, slot_features_i) for
/// unmasked slots, Event = sum_i w_i * slot_features_i. Raw cosine weights by
/// default; `normalized` switches to masked softmax over the cosines. Masked
/// slots are skipped outright, so no gradient ever reaches them through this
/// path. Zero-norm rows get weight 0 and bump the degenerate-row counter.
Tensor event_feature(const Tensor& event_ste, const Tensor& slot_features,
                     std::span<const std::uint8_t> mask_row, bool normalized = false);

long degenerate_slot_rows();
void reset_degenerate_slot_rows();

/// Scalar score of one event head on its feature + type embedding.
Tensor event_score(const Tensor& feature, const Tensor& event_ste, const AffineHead& head);

/// (1/E) sum (y - o)^2; bit-for-bit the mse primitive.
Tensor event_loss(const Tensor& event_scores, const Tensor& event_targets);

/// Arg_i = slot_aware_seq_i + seq_i (exact elementwise add).
Tensor arg_feature(const Tensor& slot_aware_seq, const Tensor& seq);

/// Scores every (token, slot) pair; returns n x (S+1).
Tensor arg_scores(const Tensor& arg_features, const std::vector<Tensor>& slot_stes,
                  const ArgHeadParams& params);

/// Per token (1/S) sum over the S+1 slot columns of (y - o)^2, then the mean
/// over tokens.
Tensor arg_loss(const Tensor& scores, const Tensor& targets, int num_slots);

/// lambda * event_loss + (1 - lambda) * arg_loss; boundaries return the inputs.
Tensor joint_loss(const Tensor& event_loss_value, const Tensor& arg_loss_value, double lambda);

}  // namespace jssm
