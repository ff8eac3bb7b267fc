#include "jssm/heads.hpp"

#include <atomic>
#include <cmath>

namespace jssm {

namespace {

std::atomic<long> g_degenerate_rows{0};

Tensor as_row_matrix(const Tensor& v) { return stack_rows({v}); }

double row_norm_sq(const Tensor& m, int i) {
  const int c = m.dim(1);
  const auto data = m.data();
  double acc = 0.0;
  for (int j = 0; j < c; ++j) {
    const double x = data[static_cast<std::size_t>(i) * c + j];
    acc += x * x;
  }
  return acc;
}

}  // namespace

long degenerate_slot_rows() { return g_degenerate_rows.load(); }
void reset_degenerate_slot_rows() { g_degenerate_rows.store(0); }

AffineHead AffineHead::init(int dim, Rng& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(dim));
  AffineHead h;
  h.w1 = Tensor::randn({dim, dim}, rng, std, true);
  h.b1 = Tensor::zeros({dim}, true);
  h.w2 = Tensor::randn({dim, 1}, rng, std, true);
  h.b2 = Tensor::zeros({1}, true);
  return h;
}

EventHeadParams EventHeadParams::init(int num_events, int dim, Rng& rng) {
  if (num_events < 1) throw ConfigError("EventHeadParams: need at least one event type");
  EventHeadParams p;
  p.heads.reserve(num_events);
  for (int k = 0; k < num_events; ++k) p.heads.push_back(AffineHead::init(dim, rng));
  return p;
}

void EventHeadParams::collect_params(std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const std::string pre = "event_head" + std::to_string(k + 1) + ".";
    out.emplace_back(pre + "w1", heads[k].w1);
    out.emplace_back(pre + "b1", heads[k].b1);
    out.emplace_back(pre + "w2", heads[k].w2);
    out.emplace_back(pre + "b2", heads[k].b2);
  }
}

ArgHeadParams ArgHeadParams::init(int num_slots, int dim, Rng& rng) {
  if (num_slots < 0) throw ConfigError("ArgHeadParams: negative slot count");
  ArgHeadParams p;
  p.heads.reserve(num_slots + 1);
  for (int k = 0; k <= num_slots; ++k) p.heads.push_back(AffineHead::init(dim, rng));
  return p;
}

void ArgHeadParams::collect_params(std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const std::string pre = "arg_head" + std::to_string(k) + ".";
    out.emplace_back(pre + "w1", heads[k].w1);
    out.emplace_back(pre + "b1", heads[k].b1);
    out.emplace_back(pre + "w2", heads[k].w2);
    out.emplace_back(pre + "b2", heads[k].b2);
  }
}

Tensor event_feature(const Tensor& event_ste, const Tensor& slot_features,
                     std::span<const std::uint8_t> mask_row, bool normalized) {
  if (event_ste.rank() != 1 || slot_features.rank() != 2 ||
      event_ste.dim(0) != slot_features.dim(1)) {
    throw ShapeError("event_feature: type embedding " + shape_str(event_ste.shape()) +
                     " does not match slot features " + shape_str(slot_features.shape()));
  }
  const int rows = slot_features.dim(0);
  if (static_cast<int>(mask_row.size()) != rows) {
    throw ContractError("event_feature: mask row length " + std::to_string(mask_row.size()) +
                        " does not match " + std::to_string(rows) + " slot rows");
  }
  std::vector<int> active;
  for (int i = 0; i < rows; ++i) {
    if (mask_row[i] == 0) continue;  // masked slots never enter the graph
    if (row_norm_sq(slot_features, i) == 0.0) {
      ++g_degenerate_rows;  // degenerate-row rule: weight 0
      continue;
    }
    active.push_back(i);
  }
  if (active.empty()) return Tensor::zeros({event_ste.dim(0)});

  std::vector<Tensor> weights;
  weights.reserve(active.size());
  for (int i : active) weights.push_back(cosine(event_ste, row(slot_features, i)));
  if (normalized) {
    Tensor soft_row = as_row_matrix(softmax(stack_scalars(weights), 0));  // 1 x k
    weights.clear();
    for (std::size_t j = 0; j < active.size(); ++j) {
      weights.push_back(slice_cols(soft_row, static_cast<int>(j), 1));  // 1 x 1 scalar
    }
  }
  Tensor acc;
  for (std::size_t j = 0; j < active.size(); ++j) {
    Tensor term = mul_scalar(row(slot_features, active[j]), weights[j]);
    acc = j == 0 ? term : add(acc, term);
  }
  return acc;
}

Tensor event_score(const Tensor& feature, const Tensor& event_ste, const AffineHead& head) {
  if (feature.shape() != event_ste.shape() || feature.rank() != 1) {
    throw ShapeError("event_score: feature " + shape_str(feature.shape()) + " vs type embedding " +
                     shape_str(event_ste.shape()));
  }
  Tensor x = as_row_matrix(add(feature, event_ste));                       // 1 x d
  Tensor hidden = gelu(add_rowvec(matmul(x, head.w1), head.b1));           // 1 x d
  Tensor out = gelu(add_rowvec(matmul(hidden, head.w2), head.b2));         // 1 x 1
  return out;
}

Tensor event_loss(const Tensor& event_scores, const Tensor& event_targets) {
  if (event_scores.shape() != event_targets.shape()) {
    throw ContractError("event_loss: score vector " + shape_str(event_scores.shape()) +
                        " vs target vector " + shape_str(event_targets.shape()));
  }
  return mse(event_scores, event_targets);
}

Tensor arg_feature(const Tensor& slot_aware_seq, const Tensor& seq) {
  if (slot_aware_seq.shape() != seq.shape()) {
    throw ContractError("arg_feature: shape mismatch " + shape_str(slot_aware_seq.shape()) +
                        " vs " + shape_str(seq.shape()));
  }
  return add(slot_aware_seq, seq);
}

Tensor arg_scores(const Tensor& arg_features, const std::vector<Tensor>& slot_stes,
                  const ArgHeadParams& params) {
  if (arg_features.rank() != 2) {
    throw ShapeError("arg_scores: need (n, d) features, got " + shape_str(arg_features.shape()));
  }
  if (slot_stes.size() != params.heads.size()) {
    throw ContractError("arg_scores: " + std::to_string(slot_stes.size()) +
                        " slot embeddings vs " + std::to_string(params.heads.size()) + " heads");
  }
  std::vector<Tensor> columns;
  columns.reserve(slot_stes.size());
  for (std::size_t k = 0; k < slot_stes.size(); ++k) {
    const AffineHead& head = params.heads[k];
    Tensor x = add_rowvec(arg_features, slot_stes[k]);
    Tensor hidden = gelu(add_rowvec(matmul(x, head.w1), head.b1));
    columns.push_back(gelu(add_rowvec(matmul(hidden, head.w2), head.b2)));  // n x 1
  }
  return columns.size() == 1 ? columns[0] : concat_cols(columns);
}

Tensor arg_loss(const Tensor& scores, const Tensor& targets, int num_slots) {
  if (num_slots < 1) throw ContractError("arg_loss: need at least one real slot type");
  if (scores.rank() != 2 || scores.shape() != targets.shape() ||
      scores.dim(1) != num_slots + 1) {
    throw ContractError("arg_loss: scores " + shape_str(scores.shape()) + " vs targets " +
                        shape_str(targets.shape()) + " for " + std::to_string(num_slots) +
                        " slots");
  }
  const int n = scores.dim(0);
  Tensor diff = sub(scores, targets);
  return scale(sum(mul(diff, diff)), 1.0 / (static_cast<double>(n) * num_slots));
}

Tensor joint_loss(const Tensor& event_loss_value, const Tensor& arg_loss_value, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw ConfigError("joint_loss: lambda must be in [0,1], got " + std::to_string(lambda));
  }
  if (event_loss_value.size() != 1 || arg_loss_value.size() != 1) {
    throw ContractError("joint_loss: both component losses must be scalar");
  }
  if (lambda == 1.0) return event_loss_value;
  if (lambda == 0.0) return arg_loss_value;
  return add(scale(event_loss_value, lambda), scale(arg_loss_value, 1.0 - lambda));
}

}  // namespace jssm
