#include "jssm/encoder.hpp"

#include <cmath>
#include <fstream>

namespace jssm {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  v.id_to_token = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (int i = 0; i < kReservedCount; ++i) v.token_to_id[v.id_to_token[i]] = i;
  for (const std::string& t : tokens) {
    if (t.empty() || v.token_to_id.count(t)) continue;
    v.token_to_id[t] = v.size();
    v.id_to_token.push_back(t);
  }
  return v;
}

Vocab Vocab::build(const Corpus& corpus) {
  std::vector<std::string> tokens;
  for (const Example& ex : corpus.examples) {
    tokens.insert(tokens.end(), ex.tokens.begin(), ex.tokens.end());
  }
  const EventSchema& schema = *corpus.schema;
  auto add_text = [&tokens](const std::string& text) {
    for (std::string& t : split_whitespace(text)) tokens.push_back(std::move(t));
  };
  for (int k = 0; k <= schema.num_events(); ++k) {
    add_text(schema.event(k).name);
    add_text(schema.event(k).definition);
    if (const auto* words = schema.triggers_for(k)) {
      for (const std::string& w : *words) tokens.push_back(w);
    }
  }
  for (int k = 0; k <= schema.num_slots(); ++k) {
    add_text(schema.slot(k).name);
    add_text(schema.slot(k).definition);
  }
  for (int k = 0; k <= schema.num_entities(); ++k) {
    add_text(schema.entity(k).name);
    add_text(schema.entity(k).definition);
  }
  return from_tokens(tokens);
}

Vocab Vocab::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("vocab: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocab::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("vocab: cannot write " + path);
  for (int i = kReservedCount; i < size(); ++i) out << id_to_token[i] << "\n";
}

TokenizedInput tokenize(const Vocab& vocab, std::span<const std::string> segment_a,
                        std::span<const std::string> segment_b, int max_len) {
  const bool two = !segment_b.empty();
  const int specials = two ? 3 : 2;
  if (max_len < specials) {
    throw ContractError("tokenize: max length " + std::to_string(max_len) +
                        " cannot hold the reserved tokens");
  }
  int budget = max_len - specials;
  std::size_t keep_a = segment_a.size();
  std::size_t keep_b = segment_b.size();
  bool truncated = false;
  if (keep_a + keep_b > static_cast<std::size_t>(budget)) {
    truncated = true;
    // Trailing segment loses tokens first.
    const std::size_t over = keep_a + keep_b - static_cast<std::size_t>(budget);
    const std::size_t cut_b = std::min(keep_b, over);
    keep_b -= cut_b;
    keep_a -= over - cut_b;
  }
  TokenizedInput out;
  out.truncated = truncated;
  out.ids.push_back(Vocab::kCls);
  out.segments.push_back(0);
  for (std::size_t i = 0; i < keep_a; ++i) {
    out.ids.push_back(vocab.id(segment_a[i]));
    out.segments.push_back(0);
  }
  out.ids.push_back(Vocab::kSep);
  out.segments.push_back(0);
  if (two) {
    for (std::size_t i = 0; i < keep_b; ++i) {
      out.ids.push_back(vocab.id(segment_b[i]));
      out.segments.push_back(1);
    }
    out.ids.push_back(Vocab::kSep);
    out.segments.push_back(1);
  }
  return out;
}

TokenizedInput tokenize_text(const Vocab& vocab, std::string_view text_a,
                             std::optional<std::string_view> text_b, int max_len) {
  const std::vector<std::string> a = split_whitespace(text_a);
  const std::vector<std::string> b = text_b ? split_whitespace(*text_b) : std::vector<std::string>{};
  if (text_b) {
    // An explicit second segment keeps its [SEP] even when empty.
    TokenizedInput out = tokenize(vocab, a, b, max_len);
    if (b.empty()) {
      out.ids.push_back(Vocab::kSep);
      out.segments.push_back(1);
    }
    return out;
  }
  return tokenize(vocab, a, {}, max_len);
}

std::string detokenize(const Vocab& vocab, std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (id < Vocab::kReservedCount) continue;
    if (id >= vocab.size()) throw ContractError("detokenize: id out of range");
    if (!out.empty()) out += " ";
    out += vocab.id_to_token[id];
  }
  return out;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, int vocab_size, Rng& rng) {
  if (cfg.dim < 1 || cfg.heads < 1 || cfg.blocks < 1 || cfg.max_len < 3 || cfg.ffn_dim < 1) {
    throw ConfigError("encoder config: dim/heads/blocks/ffn/max_len must be positive");
  }
  if (cfg.dim % cfg.heads != 0) {
    throw ConfigError("encoder config: dim " + std::to_string(cfg.dim) +
                      " not divisible by heads " + std::to_string(cfg.heads));
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ConfigError("encoder config: dropout must be in [0,1)");
  }
  EncoderParams p;
  p.cfg = cfg;
  const int d = cfg.dim;
  const double emb_std = 0.1;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
  p.token_emb = Tensor::randn({vocab_size, d}, rng, emb_std, true);
  p.position_emb = Tensor::randn({cfg.max_len, d}, rng, emb_std, true);
  p.segment_emb = Tensor::randn({2, d}, rng, emb_std, true);
  for (int b = 0; b < cfg.blocks; ++b) {
    BlockParams blk;
    blk.ln1_gain = Tensor::full({d}, 1.0, true);
    blk.ln1_bias = Tensor::zeros({d}, true);
    blk.wq = Tensor::randn({d, d}, rng, w_std, true);
    blk.wk = Tensor::randn({d, d}, rng, w_std, true);
    blk.wv = Tensor::randn({d, d}, rng, w_std, true);
    blk.wo = Tensor::randn({d, d}, rng, w_std, true);
    blk.ln2_gain = Tensor::full({d}, 1.0, true);
    blk.ln2_bias = Tensor::zeros({d}, true);
    blk.ff1_w = Tensor::randn({d, cfg.ffn_dim}, rng, w_std, true);
    blk.ff1_b = Tensor::zeros({cfg.ffn_dim}, true);
    blk.ff2_w = Tensor::randn({cfg.ffn_dim, d}, rng,
                              1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim)), true);
    blk.ff2_b = Tensor::zeros({d}, true);
    p.blocks.push_back(std::move(blk));
  }
  p.final_gain = Tensor::full({d}, 1.0, true);
  p.final_bias = Tensor::zeros({d}, true);
  return p;
}

void EncoderParams::collect_params(std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back("encoder.token_emb", token_emb);
  out.emplace_back("encoder.position_emb", position_emb);
  out.emplace_back("encoder.segment_emb", segment_emb);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string pre = "encoder.block" + std::to_string(b) + ".";
    const BlockParams& blk = blocks[b];
    out.emplace_back(pre + "ln1_gain", blk.ln1_gain);
    out.emplace_back(pre + "ln1_bias", blk.ln1_bias);
    out.emplace_back(pre + "wq", blk.wq);
    out.emplace_back(pre + "wk", blk.wk);
    out.emplace_back(pre + "wv", blk.wv);
    out.emplace_back(pre + "wo", blk.wo);
    out.emplace_back(pre + "ln2_gain", blk.ln2_gain);
    out.emplace_back(pre + "ln2_bias", blk.ln2_bias);
    out.emplace_back(pre + "ff1_w", blk.ff1_w);
    out.emplace_back(pre + "ff1_b", blk.ff1_b);
    out.emplace_back(pre + "ff2_w", blk.ff2_w);
    out.emplace_back(pre + "ff2_b", blk.ff2_b);
  }
  out.emplace_back("encoder.final_gain", final_gain);
  out.emplace_back("encoder.final_bias", final_bias);
}

namespace {

// Pre-norm block: x + Attn(LN(x)), then x + FFN(LN(x)).
Tensor encoder_block(const Tensor& x, const BlockParams& blk, const EncoderConfig& cfg) {
  const int d = cfg.dim;
  const int dh = d / cfg.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor h = layer_norm(x, blk.ln1_gain, blk.ln1_bias);
  Tensor q = matmul(h, blk.wq);
  Tensor k = matmul(h, blk.wk);
  Tensor v = matmul(h, blk.wv);
  std::vector<Tensor> heads;
  heads.reserve(cfg.heads);
  for (int hd = 0; hd < cfg.heads; ++hd) {
    Tensor qi = slice_cols(q, hd * dh, dh);
    Tensor ki = slice_cols(k, hd * dh, dh);
    Tensor vi = slice_cols(v, hd * dh, dh);
    Tensor att = softmax(scale(matmul(qi, transpose(ki)), inv_sqrt_dh), 1);
    heads.push_back(matmul(att, vi));
  }
  Tensor attended = matmul(cfg.heads == 1 ? heads[0] : concat_cols(heads), blk.wo);
  Tensor x1 = add(x, attended);

  Tensor h2 = layer_norm(x1, blk.ln2_gain, blk.ln2_bias);
  Tensor ff = add_rowvec(
      matmul(gelu(add_rowvec(matmul(h2, blk.ff1_w), blk.ff1_b)), blk.ff2_w), blk.ff2_b);
  return add(x1, ff);
}

}  // namespace

Tensor encode(const EncoderParams& params, const std::vector<int>& ids,
              const std::vector<int>& segments, bool training, Rng* dropout_rng) {
  const EncoderConfig& cfg = params.cfg;
  if (ids.empty()) throw ContractError("encode: empty input");
  if (static_cast<int>(ids.size()) > cfg.max_len) {
    throw ContractError("encode: input length " + std::to_string(ids.size()) +
                        " exceeds max length " + std::to_string(cfg.max_len));
  }
  if (segments.size() != ids.size()) {
    throw ContractError("encode: segments must align with ids");
  }
  const int vocab_size = params.token_emb.dim(0);
  for (int id : ids) {
    if (id < 0 || id >= vocab_size) {
      throw ContractError("encode: token id " + std::to_string(id) + " out of vocabulary range");
    }
  }
  for (int s : segments) {
    if (s != 0 && s != 1) throw ContractError("encode: segment ids must be 0 or 1");
  }
  if (training && cfg.dropout > 0.0 && dropout_rng == nullptr) {
    throw ContractError("encode: training mode with dropout needs an rng");
  }

  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);

  Tensor x = add(add(gather_rows(params.token_emb, ids),
                     gather_rows(params.position_emb, positions)),
                 gather_rows(params.segment_emb, segments));
  for (const BlockParams& blk : params.blocks) {
    x = encoder_block(x, blk, cfg);
    if (training && cfg.dropout > 0.0) x = dropout(x, cfg.dropout, *dropout_rng, true);
  }
  return layer_norm(x, params.final_gain, params.final_bias);
}

Tensor encode(const EncoderParams& params, const TokenizedInput& input, bool training,
              Rng* dropout_rng) {
  return encode(params, input.ids, input.segments, training, dropout_rng);
}

Tensor add_entity_ste(const Tensor& embeds, const std::vector<int>& entity_ids,
                      const Tensor& entity_table) {
  if (embeds.rank() != 2 || entity_table.rank() != 2 || embeds.dim(1) != entity_table.dim(1)) {
    throw ContractError("add_entity_ste: embeddings " + shape_str(embeds.shape()) +
                        " and entity table " + shape_str(entity_table.shape()) +
                        " have mismatched dimensions");
  }
  if (static_cast<int>(entity_ids.size()) != embeds.dim(0)) {
    throw ContractError("add_entity_ste: need one entity id per token");
  }
  return add(embeds, gather_rows(entity_table, entity_ids));
}

}  // namespace jssm
