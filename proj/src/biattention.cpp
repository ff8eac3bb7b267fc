#include "jssm/biattention.hpp"

#include <cmath>

namespace jssm {

BiAttentionParams BiAttentionParams::init(int dim, Rng& rng) {
  if (dim < 1) throw ConfigError("BiAttentionParams: dimension must be positive");
  const double std = 1.0 / std::sqrt(static_cast<double>(dim));
  BiAttentionParams p;
  p.slot_query_w = Tensor::randn({dim, dim}, rng, std, true);
  p.slot_key_w = Tensor::randn({dim, dim}, rng, std, true);
  p.slot_value_w = Tensor::randn({dim, dim}, rng, std, true);
  p.seq_query_w = Tensor::randn({dim, dim}, rng, std, true);
  p.seq_key_w = Tensor::randn({dim, dim}, rng, std, true);
  p.seq_value_w = Tensor::randn({dim, dim}, rng, std, true);
  return p;
}

void BiAttentionParams::collect_params(std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back("biattention.slot_query_w", slot_query_w);
  out.emplace_back("biattention.slot_key_w", slot_key_w);
  out.emplace_back("biattention.slot_value_w", slot_value_w);
  out.emplace_back("biattention.seq_query_w", seq_query_w);
  out.emplace_back("biattention.seq_key_w", seq_key_w);
  out.emplace_back("biattention.seq_value_w", seq_value_w);
}

namespace {

Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, int dim) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  Tensor weights = softmax(scale(matmul(q, transpose(k)), inv_sqrt_d), 1);
  return matmul(weights, v);
}

void check_pair(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.defined() || !b.defined()) throw ContractError(std::string(who) + ": undefined input");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError(std::string(who) + ": need (rows, d) inputs with equal d, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor seq2slot(const Tensor& slots, const Tensor& seq, const BiAttentionParams& params) {
  check_pair(slots, seq, "seq2slot");
  const int d = slots.dim(1);
  return scaled_attention(matmul(slots, params.slot_query_w), matmul(seq, params.seq_key_w),
                          matmul(seq, params.seq_value_w), d);
}

Tensor slot2seq(const Tensor& seq, const Tensor& slots, const BiAttentionParams& params) {
  check_pair(seq, slots, "slot2seq");
  const int d = seq.dim(1);
  return scaled_attention(matmul(seq, params.seq_query_w), matmul(slots, params.slot_key_w),
                          matmul(slots, params.slot_value_w), d);
}

}  // namespace jssm
