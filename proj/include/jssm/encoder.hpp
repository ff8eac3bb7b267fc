// encoder.hpp - [CLS]/[SEP] tokenization and a small trainable self-attention
// sequence encoder that stands in for the pretrained model, plus the
// entity-type-embedding addition into the token features.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jssm/corpus.hpp"
#include "jssm/tensor.hpp"

namespace jssm {

/// Whitespace vocabulary with four reserved ids at the front.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kReservedCount = 4;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  static Vocab from_tokens(const std::vector<std::string>& tokens);
  /// Corpus tokens plus every schema question text (definitions, names,
  /// trigger words), so type questions never collapse to [UNK].
  static Vocab build(const Corpus& corpus);
  static Vocab load_file(const std::string& path);
  void save_file(const std::string& path) const;

  int id(std::string_view token) const {
    auto it = token_to_id.find(std::string(token));
    return it == token_to_id.end() ? kUnk : it->second;
  }
  bool contains(std::string_view token) const {
    return token_to_id.count(std::string(token)) != 0;
  }
  int size() const { return static_cast<int>(id_to_token.size()); }
};

std::vector<std::string> split_whitespace(std::string_view text);

struct TokenizedInput {
  std::vector<int> ids;       // [CLS] a... [SEP] (b... [SEP])
  std::vector<int> segments;  // 0 over the first segment, 1 over the second
  bool truncated = false;
};

/// Single segment -> [CLS] seg [SEP]; two segments -> [CLS] a [SEP] b [SEP].
/// Inputs longer than max_len lose trailing tokens (second segment first) and
/// come back flagged truncated.
TokenizedInput tokenize(const Vocab& vocab, std::span<const std::string> segment_a,
                        std::span<const std::string> segment_b, int max_len);
TokenizedInput tokenize_text(const Vocab& vocab, std::string_view text_a,
                             std::optional<std::string_view> text_b, int max_len);
/// Joins the non-reserved tokens back into text.
std::string detokenize(const Vocab& vocab, std::span<const int> ids);

struct EncoderConfig {
  int dim = 64;
  int heads = 4;
  int blocks = 2;
  int ffn_dim = 128;
  int max_len = 64;
  double dropout = 0.6;
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;
  Tensor ln2_gain, ln2_bias;
  Tensor ff1_w, ff1_b;
  Tensor ff2_w, ff2_b;
};

struct EncoderParams {
  EncoderConfig cfg;
  Tensor token_emb;     // V x d
  Tensor position_emb;  // L x d
  Tensor segment_emb;   // 2 x d
  std::vector<BlockParams> blocks;
  Tensor final_gain, final_bias;

  static EncoderParams init(const EncoderConfig& cfg, int vocab_size, Rng& rng);
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out) const;
};

/// Contextual encoding: one d-vector per input position; position 0 is the
/// [CLS] representation. Dropout applies to block outputs in training mode.
Tensor encode(const EncoderParams& params, const std::vector<int>& ids,
              const std::vector<int>& segments, bool training, Rng* dropout_rng);
Tensor encode(const EncoderParams& params, const TokenizedInput& input, bool training,
              Rng* dropout_rng);

/// seq_i = embeds_i + entity_table[entity_ids[i]]  (exact elementwise add).
Tensor add_entity_ste(const Tensor& embeds, const std::vector<int>& entity_ids,
                      const Tensor& entity_table);

}  // namespace jssm
