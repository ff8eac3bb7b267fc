// biattention.hpp - the bidirectional attention layer: slots query the sentence
// (seq2slot) and tokens query the slots (slot2seq), over six shared projection
// matrices.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jssm/tensor.hpp"

namespace jssm {

struct BiAttentionParams {
  Tensor slot_query_w, slot_key_w, slot_value_w;  // d x d each
  Tensor seq_query_w, seq_key_w, seq_value_w;

  static BiAttentionParams init(int dim, Rng& rng);
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out) const;
};

/// Sequence-aware slot features: Attention(slots * Wq_slot, seq * Wk_seq,
/// seq * Wv_seq), softmax over the n sentence keys, scaled by 1/sqrt(d).
/// Output is (S+1) x d. This is the slot level of the dynamic structure
/// encoding.
Tensor seq2slot(const Tensor& slots, const Tensor& seq, const BiAttentionParams& params);

/// Slot-aware sequence features: Attention(seq * Wq_seq, slots * Wk_slot,
/// slots * Wv_slot); output n x d.
Tensor slot2seq(const Tensor& seq, const Tensor& slots, const BiAttentionParams& params);

}  // namespace jssm
