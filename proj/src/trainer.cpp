#include "jssm/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace jssm {

namespace {

std::atomic<long> g_truncated{0};

constexpr char kCheckpointMagic[8] = {'J', 'S', 'S', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ValidationError("checkpoint: unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ValidationError("checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

Example truncate_example(const Example& ex, int keep, int num_slots) {
  ++g_truncated;
  Example out;
  out.tokens.assign(ex.tokens.begin(), ex.tokens.begin() + keep);
  out.entity_ids.assign(ex.entity_ids.begin(), ex.entity_ids.begin() + keep);
  out.event_labels = ex.event_labels;
  for (ArgSpan s : ex.gold_spans) {
    if (s.start >= keep) continue;
    s.end = std::min(s.end, keep);
    out.gold_spans.push_back(s);
  }
  out.arg_labels = spans_to_labels(out.gold_spans, keep, num_slots);
  return out;
}

SteConfig ste_config_from(const TrainConfig& cfg, std::uint64_t random_seed) {
  SteConfig sc;
  sc.strategy = cfg.strategy;
  sc.alpha = cfg.alpha;
  sc.no_dynamic = cfg.ablation.no_dynamic_ste;
  sc.random_event = cfg.ablation.random_ste_event;
  sc.random_slot = cfg.ablation.random_ste_slot;
  sc.random_entity = cfg.ablation.random_ste_entity;
  sc.random_seed = random_seed;
  return sc;
}

}  // namespace

long truncated_examples() { return g_truncated.load(); }
void reset_truncated_examples() { g_truncated.store(0); }

AblationFlags ablation_from_name(const std::string& name) {
  AblationFlags f;
  if (name == "full") return f;
  if (name == "no_dse") {
    f.no_dse = true;
  } else if (name == "no_dynamic_ste") {
    f.no_dynamic_ste = true;
  } else if (name == "no_entity_ste") {
    f.no_entity_ste = true;
  } else if (name == "random_ste_entity") {
    f.random_ste_entity = true;
  } else if (name == "random_ste_slot") {
    f.random_ste_slot = true;
  } else if (name == "random_ste_event") {
    f.random_ste_event = true;
  } else {
    throw ConfigError("unknown ablation variant '" + name + "'");
  }
  return f;
}

const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names = {"no_dse",           "no_dynamic_ste",
                                                 "no_entity_ste",    "random_ste_entity",
                                                 "random_ste_slot",  "random_ste_event"};
  return names;
}

std::string ablation_label(const std::string& name) {
  if (name == "full") return "full";
  if (name == "no_dse") return "-DSE";
  if (name == "no_dynamic_ste") return "-Ste_dynamic";
  if (name == "no_entity_ste") return "-Ste_entity";
  if (name == "random_ste_entity") return "random Ste_entity";
  if (name == "random_ste_slot") return "random Ste_slot";
  if (name == "random_ste_event") return "random Ste_event";
  throw ConfigError("unknown ablation variant '" + name + "'");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) {
    throw ConfigError("alpha must be in [0,1], got " + std::to_string(alpha));
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw ConfigError("lambda must be in [0,1], got " + std::to_string(lambda));
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

Model Model::init(std::shared_ptr<const EventSchema> schema, Vocab vocab,
                  const TrainConfig& cfg) {
  if (!schema) throw ContractError("Model::init: null schema");
  cfg.validate();
  Model m;
  m.schema = schema;
  m.vocab = std::move(vocab);
  m.cfg = cfg;
  m.cfg.encoder.dropout = cfg.dropout;
  m.mask = build_mask(*schema);

  Rng root(cfg.seed);
  Rng enc_rng = root.fork(1);
  Rng attn_rng = root.fork(2);
  Rng evt_rng = root.fork(3);
  Rng arg_rng = root.fork(4);
  m.encoder = EncoderParams::init(m.cfg.encoder, m.vocab.size(), enc_rng);
  m.biattention = BiAttentionParams::init(m.cfg.encoder.dim, attn_rng);
  m.event_heads = EventHeadParams::init(schema->num_events(), m.cfg.encoder.dim, evt_rng);
  m.arg_heads = ArgHeadParams::init(schema->num_slots(), m.cfg.encoder.dim, arg_rng);
  m.ste = SteModule(schema, ste_config_from(cfg, root.fork(5).seed()), m.cfg.encoder.dim);
  return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  encoder.collect_params(out);
  biattention.collect_params(out);
  event_heads.collect_params(out);
  arg_heads.collect_params(out);
  return out;
}

void Model::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, 8);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(cfg.encoder.dim));
  write_u32(out, static_cast<std::uint32_t>(schema->num_events()));
  write_u32(out, static_cast<std::uint32_t>(schema->num_slots()));
  write_u32(out, static_cast<std::uint32_t>(schema->num_entities()));
  const auto params = named_params();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape()) write_u64(out, static_cast<std::uint64_t>(d));
    for (double x : tensor.data()) write_f64(out, x);
  }
  if (!out) throw Error("checkpoint: write failed for " + path);
}

Model Model::load_checkpoint(const std::string& path, std::shared_ptr<const EventSchema> schema,
                             Vocab vocab, const TrainConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ValidationError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  Model m = Model::init(std::move(schema), std::move(vocab), cfg);
  const std::uint32_t dim = read_u32(in);
  const std::uint32_t E = read_u32(in);
  const std::uint32_t S = read_u32(in);
  const std::uint32_t T = read_u32(in);
  if (dim != static_cast<std::uint32_t>(m.cfg.encoder.dim) ||
      E != static_cast<std::uint32_t>(m.schema->num_events()) ||
      S != static_cast<std::uint32_t>(m.schema->num_slots()) ||
      T != static_cast<std::uint32_t>(m.schema->num_entities())) {
    throw ValidationError("checkpoint: header (d,E,S,T) does not match the schema/config");
  }
  const std::uint32_t count = read_u32(in);
  auto params = m.named_params();
  if (count != params.size()) {
    throw ValidationError("checkpoint: expected " + std::to_string(params.size()) +
                          " tensors, file has " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ValidationError("checkpoint: unexpected end of file");
    const std::uint32_t rank = read_u32(in);
    Shape shape(rank);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(read_u64(in));
      total *= static_cast<std::size_t>(shape[d]);
    }
    Tensor target;
    for (auto& [pname, tensor] : params) {
      if (pname == name) {
        target = tensor;
        break;
      }
    }
    if (!target.defined()) throw ValidationError("checkpoint: unknown tensor '" + name + "'");
    if (target.shape() != shape) {
      throw ValidationError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                            ", expected " + shape_str(target.shape()));
    }
    auto data = target.mutable_data();
    for (std::size_t j = 0; j < total; ++j) data[j] = read_f64(in);
  }
  return m;
}

ForwardResult forward(const Model& model, const Example& example, bool training,
                      Rng* dropout_rng, const SteModule::Tables* tables) {
  const EventSchema& schema = *model.schema;
  const int E = schema.num_events();
  const int S = schema.num_slots();
  const int max_tokens = model.cfg.encoder.max_len - 2;

  const Example* ex = &example;
  Example clipped;
  if (example.num_tokens() > max_tokens) {
    clipped = truncate_example(example, max_tokens, S);
    ex = &clipped;
  }
  if (ex->num_tokens() == 0) throw ContractError("forward: empty sentence");
  if (static_cast<int>(ex->event_labels.size()) != E) {
    throw ContractError("forward: example has " + std::to_string(ex->event_labels.size()) +
                        " event labels, schema has " + std::to_string(E));
  }

  SteModule::Tables local_tables;
  if (tables == nullptr) {
    local_tables = model.ste.prepare(model.encoder, model.vocab, training, dropout_rng);
    tables = &local_tables;
  }

  // Sequence encoding, then the entity type embeddings added in.
  const TokenizedInput tok = tokenize(model.vocab, ex->tokens, {}, model.cfg.encoder.max_len);
  Tensor encoded = encode(model.encoder, tok, training, dropout_rng);
  Tensor token_feats = slice_rows(encoded, 1, ex->num_tokens());
  Tensor seq = model.cfg.ablation.no_entity_ste
                   ? token_feats
                   : add_entity_ste(token_feats, ex->entity_ids, tables->entity.matrix());

  // Bidirectional attention between slot embeddings and the sequence.
  Tensor slot_matrix = tables->slot.matrix();
  Tensor slot_feats = seq2slot(slot_matrix, seq, model.biattention);
  Tensor seq_feats = slot2seq(seq, slot_matrix, model.biattention);

  // Event detection head per event type.
  std::vector<Tensor> scores;
  scores.reserve(E);
  Tensor mean_slot_feature;
  if (model.cfg.ablation.no_dse) {
    Tensor avg_row = Tensor::full({1, S + 1}, 1.0 / static_cast<double>(S + 1));
    mean_slot_feature = row(matmul(avg_row, slot_feats), 0);
  }
  for (int k = 1; k <= E; ++k) {
    Tensor ste_k = model.ste.event_ste(*tables, k, model.encoder, model.vocab, ex->tokens,
                                       training, dropout_rng);
    Tensor feat = model.cfg.ablation.no_dse
                      ? mean_slot_feature
                      : event_feature(ste_k, slot_feats, model.mask.row(k),
                                      model.cfg.normalized_event_attention);
    scores.push_back(event_score(feat, ste_k, model.event_heads.heads[k - 1]));
  }
  Tensor event_scores = stack_scalars(scores);
  std::vector<double> y_evt(E);
  for (int k = 0; k < E; ++k) y_evt[k] = ex->event_labels[k];
  Tensor l_evt = event_loss(event_scores, Tensor::from({E}, std::move(y_evt)));

  // Argument extraction head per slot type.
  Tensor arg_feats = arg_feature(seq_feats, seq);
  Tensor arg_score_mat = arg_scores(arg_feats, tables->slot.vectors, model.arg_heads);
  const int n = ex->num_tokens();
  std::vector<double> y_arg(ex->arg_labels.begin(), ex->arg_labels.end());
  Tensor l_arg = arg_loss(arg_score_mat, Tensor::from({n, S + 1}, std::move(y_arg)), S);

  ForwardResult out;
  out.event_scores = event_scores;
  out.arg_score_mat = arg_score_mat;
  out.event_loss_value = l_evt;
  out.arg_loss_value = l_arg;
  out.loss = joint_loss(l_evt, l_arg, model.cfg.lambda);
  out.used_tokens = n;
  return out;
}

namespace {

std::vector<std::vector<double>> snapshot_params(
    const std::vector<std::pair<std::string, Tensor>>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore_params(std::vector<std::pair<std::string, Tensor>>& params,
                    const std::vector<std::vector<double>>& snapshot) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].second.mutable_data();
    std::copy(snapshot[i].begin(), snapshot[i].end(), data.begin());
  }
}

Prediction decode_prediction(const ForwardResult& result, int num_slots, double threshold) {
  Prediction p;
  p.events = decode_events(result.event_scores.data(), threshold);
  p.spans = decode_spans(result.arg_score_mat.data(), result.used_tokens, num_slots, threshold);
  return p;
}

Prediction gold_prediction(const Example& ex) {
  Prediction g;
  for (std::size_t k = 0; k < ex.event_labels.size(); ++k) {
    if (ex.event_labels[k]) g.events.insert(static_cast<int>(k) + 1);
  }
  g.spans = ex.gold_spans;
  return g;
}

}  // namespace

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const TrainConfig& cfg,
                  const EpochCallback& on_epoch, const StopCallback& stop_when) {
  cfg.validate();
  if (train_corpus.examples.empty()) throw ContractError("train: empty train split");
  if (!train_corpus.schema) throw ContractError("train: corpus has no schema");

  Vocab vocab = Vocab::build(train_corpus);
  Model model = Model::init(train_corpus.schema, std::move(vocab), cfg);
  auto params = model.named_params();
  std::vector<Tensor> tensors;
  tensors.reserve(params.size());
  for (auto& [name, t] : params) tensors.push_back(t);
  Optimizer optimizer(tensors, cfg.learning_rate,
                      cfg.use_sgd ? UpdateRule::sgd : UpdateRule::adam);

  Rng root(cfg.seed);
  TrainHistory history;
  double best_f1 = -1.0;
  std::vector<std::vector<double>> best_snapshot;
  int stale_epochs = 0;

  const std::size_t n = train_corpus.examples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.fork(1000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    Rng dropout_rng = root.fork(2000 + static_cast<std::uint64_t>(epoch));

    double epoch_loss = 0.0, epoch_evt = 0.0, epoch_arg = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      // Static tables are shared by the whole batch; gradients accumulate
      // through them into the encoder.
      const SteModule::Tables tables =
          model.ste.prepare(model.encoder, model.vocab, true, &dropout_rng);
      std::vector<Tensor> losses;
      losses.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        ForwardResult r =
            forward(model, train_corpus.examples[order[i]], true, &dropout_rng, &tables);
        losses.push_back(r.loss);
        epoch_evt += r.event_loss_value.item();
        epoch_arg += r.arg_loss_value.item();
      }
      Tensor batch_loss = scale(sum(stack_scalars(losses)), 1.0 / static_cast<double>(losses.size()));
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss_value * static_cast<double>(losses.size());
      optimizer.zero_grad();
      backward(batch_loss);
      optimizer.step();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / static_cast<double>(n);
    stats.event_loss = epoch_evt / static_cast<double>(n);
    stats.arg_loss = epoch_arg / static_cast<double>(n);
    if (!std::isfinite(stats.loss)) {
      throw DivergenceError("train: non-finite epoch loss at epoch " + std::to_string(epoch));
    }

    if (!dev_corpus.examples.empty()) {
      stats.dev = evaluate(model, dev_corpus);
      stats.has_dev = true;
      const double f1 = stats.dev.event_id_cls.f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        best_snapshot = snapshot_params(params);
        history.best_epoch = epoch;
        stale_epochs = 0;
      } else {
        ++stale_epochs;
      }
    }
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(history.epochs.back());
    if (stop_when && stats.has_dev && stop_when(stats)) {
      best_snapshot.clear();  // keep the parameters that satisfied the caller
      history.best_epoch = epoch;
      break;
    }
    if (stats.has_dev && stale_epochs >= cfg.patience) break;
  }

  if (!best_snapshot.empty()) restore_params(params, best_snapshot);
  return {std::move(model), std::move(history)};
}

MetricsReport evaluate(const Model& model, const Corpus& corpus,
                       std::vector<Prediction>* out_preds, std::vector<Prediction>* out_golds) {
  const SteModule::Tables tables = model.ste.prepare(model.encoder, model.vocab, false, nullptr);
  std::vector<Prediction> preds, golds;
  preds.reserve(corpus.examples.size());
  golds.reserve(corpus.examples.size());
  for (const Example& ex : corpus.examples) {
    ForwardResult r = forward(model, ex, false, nullptr, &tables);
    preds.push_back(decode_prediction(r, model.schema->num_slots(), model.cfg.threshold));
    golds.push_back(gold_prediction(ex));
  }
  MetricsReport report = build_report(preds, golds, *model.schema, model.cfg.averaging,
                                      model.cfg.threshold);
  if (out_preds) *out_preds = std::move(preds);
  if (out_golds) *out_golds = std::move(golds);
  return report;
}

namespace {

MeanPRF mean_of(const PRF& x) { return {x.p, x.r, x.f1}; }

void accumulate(VariantMetrics& acc, const MetricsReport& r) {
  auto addp = [](MeanPRF& a, const MeanPRF& b) {
    a.p += b.p;
    a.r += b.r;
    a.f1 += b.f1;
  };
  const bool macro_primary = r.averaging == Averaging::macro;
  const PRF& evt_macro = macro_primary ? r.event_id_cls : r.event_id_cls_secondary;
  const PRF& evt_micro = macro_primary ? r.event_id_cls_secondary : r.event_id_cls;
  const PRF& aid_macro = macro_primary ? r.argument_id : r.argument_id_secondary;
  const PRF& aid_micro = macro_primary ? r.argument_id_secondary : r.argument_id;
  const PRF& acls_macro = macro_primary ? r.argument_cls : r.argument_cls_secondary;
  const PRF& acls_micro = macro_primary ? r.argument_cls_secondary : r.argument_cls;
  addp(acc.event_macro, mean_of(evt_macro));
  addp(acc.event_micro, mean_of(evt_micro));
  addp(acc.arg_id_macro, mean_of(aid_macro));
  addp(acc.arg_id_micro, mean_of(aid_micro));
  addp(acc.arg_cls_macro, mean_of(acls_macro));
  addp(acc.arg_cls_micro, mean_of(acls_micro));
}

void divide(VariantMetrics& acc, double k) {
  for (MeanPRF* m : {&acc.event_macro, &acc.event_micro, &acc.arg_id_macro, &acc.arg_id_micro,
                     &acc.arg_cls_macro, &acc.arg_cls_micro}) {
    m->p /= k;
    m->r /= k;
    m->f1 /= k;
  }
}

VariantMetrics subtract(const VariantMetrics& a, const VariantMetrics& b) {
  VariantMetrics d = a;
  auto sub3 = [](MeanPRF& x, const MeanPRF& y) {
    x.p -= y.p;
    x.r -= y.r;
    x.f1 -= y.f1;
  };
  sub3(d.event_macro, b.event_macro);
  sub3(d.event_micro, b.event_micro);
  sub3(d.arg_id_macro, b.arg_id_macro);
  sub3(d.arg_id_micro, b.arg_id_micro);
  sub3(d.arg_cls_macro, b.arg_cls_macro);
  sub3(d.arg_cls_micro, b.arg_cls_micro);
  return d;
}

nlohmann::ordered_json mean_prf_json(const MeanPRF& m) {
  return {{"p", m.p}, {"r", m.r}, {"f1", m.f1}};
}

nlohmann::ordered_json variant_json(const VariantMetrics& v) {
  return {{"event_id_cls", {{"macro", mean_prf_json(v.event_macro)},
                            {"micro", mean_prf_json(v.event_micro)}}},
          {"argument_id", {{"macro", mean_prf_json(v.arg_id_macro)},
                           {"micro", mean_prf_json(v.arg_id_micro)}}},
          {"argument_cls", {{"macro", mean_prf_json(v.arg_cls_macro)},
                            {"micro", mean_prf_json(v.arg_cls_micro)}}}};
}

}  // namespace

AblationTable ablate(const Corpus& train_corpus, const Corpus& dev_corpus,
                     const Corpus& test_corpus, const TrainConfig& base,
                     const std::vector<std::string>& variants,
                     const std::vector<std::uint64_t>& seeds, const EpochCallback& on_epoch) {
  if (seeds.empty()) throw ContractError("ablate: need at least one seed");
  std::vector<std::string> names = {"full"};
  for (const std::string& v : variants) {
    ablation_from_name(v);  // validates
    if (v != "full") names.push_back(v);
  }

  AblationTable table;
  table.num_seeds = static_cast<int>(seeds.size());
  for (const std::string& name : names) {
    VariantMetrics acc;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.ablation = ablation_from_name(name);
      TrainResult result = train(train_corpus, dev_corpus, cfg, on_epoch);
      accumulate(acc, evaluate(result.model, test_corpus));
    }
    divide(acc, static_cast<double>(seeds.size()));
    AblationRow row;
    row.variant = name;
    row.label = ablation_label(name);
    row.mean = acc;
    table.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    table.rows[i].delta = subtract(table.rows[i].mean, table.rows[0].mean);
  }
  return table;
}

std::string AblationTable::to_json() const {
  nlohmann::ordered_json doc;
  doc["seeds"] = num_seeds;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const AblationRow& row : rows) {
    doc["rows"].push_back({{"variant", row.variant},
                           {"label", row.label},
                           {"mean", variant_json(row.mean)},
                           {"delta_vs_full", variant_json(row.delta)}});
  }
  return doc.dump(2);
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << "variant             |   Event ID & CLS       |    Argument ID         |   Argument CLS\n";
  os << "(macro means, " << num_seeds << " seeds) |    P      R     F1     |    P      R     F1   "
     << "  |    P      R     F1\n";
  for (const AblationRow& row : rows) {
    std::string label = row.label;
    if (label.size() < 20) label.resize(20, ' ');
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "%s%6.3f %6.3f %6.3f   %6.3f %6.3f %6.3f   %6.3f %6.3f %6.3f", label.c_str(),
                  row.mean.event_macro.p, row.mean.event_macro.r, row.mean.event_macro.f1,
                  row.mean.arg_id_macro.p, row.mean.arg_id_macro.r, row.mean.arg_id_macro.f1,
                  row.mean.arg_cls_macro.p, row.mean.arg_cls_macro.r, row.mean.arg_cls_macro.f1);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace jssm
