// jssm_main.cpp - command-line driver: corpus generation, training,
// evaluation, ablation studies, and report rendering.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "jssm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace jssm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("JSSM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw ConfigError(std::string("JSSM_SEED is not an integer: '") + env + "'");
    }
    return static_cast<std::uint64_t>(v);
  }
  return 42;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string prefix_of(const std::string& path) {
  fs::path p(path);
  p.replace_extension();
  return p.string();
}

// ---- TrainConfig <-> JSON (the reproducibility snapshot) ----

ordered_json encoder_to_json(const EncoderConfig& e) {
  return {{"dim", e.dim},         {"heads", e.heads},   {"blocks", e.blocks},
          {"ffn_dim", e.ffn_dim}, {"max_len", e.max_len}};
}

ordered_json train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["dropout"] = c.dropout;
  j["batch_size"] = c.batch_size;
  j["alpha"] = c.alpha;
  j["lambda"] = c.lambda;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["threshold"] = c.threshold;
  j["question_strategy"] = to_string(c.strategy);
  j["averaging"] = to_string(c.averaging);
  j["use_sgd"] = c.use_sgd;
  j["normalized_event_attention"] = c.normalized_event_attention;
  j["patience"] = c.patience;
  j["encoder"] = encoder_to_json(c.encoder);
  ordered_json ab = ordered_json::array();
  if (c.ablation.no_dse) ab.push_back("no_dse");
  if (c.ablation.no_dynamic_ste) ab.push_back("no_dynamic_ste");
  if (c.ablation.no_entity_ste) ab.push_back("no_entity_ste");
  if (c.ablation.random_ste_entity) ab.push_back("random_ste_entity");
  if (c.ablation.random_ste_slot) ab.push_back("random_ste_slot");
  if (c.ablation.random_ste_event) ab.push_back("random_ste_event");
  j["ablation"] = ab;
  return j;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threshold = j.at("threshold").get<double>();
  c.strategy = parse_strategy(j.at("question_strategy").get<std::string>());
  c.averaging = parse_averaging(j.at("averaging").get<std::string>());
  c.use_sgd = j.at("use_sgd").get<bool>();
  c.normalized_event_attention = j.at("normalized_event_attention").get<bool>();
  c.patience = j.at("patience").get<int>();
  const auto& e = j.at("encoder");
  c.encoder.dim = e.at("dim").get<int>();
  c.encoder.heads = e.at("heads").get<int>();
  c.encoder.blocks = e.at("blocks").get<int>();
  c.encoder.ffn_dim = e.at("ffn_dim").get<int>();
  c.encoder.max_len = e.at("max_len").get<int>();
  for (const auto& name : j.at("ablation")) {
    const AblationFlags f = ablation_from_name(name.get<std::string>());
    c.ablation.no_dse |= f.no_dse;
    c.ablation.no_dynamic_ste |= f.no_dynamic_ste;
    c.ablation.no_entity_ste |= f.no_entity_ste;
    c.ablation.random_ste_entity |= f.random_ste_entity;
    c.ablation.random_ste_slot |= f.random_ste_slot;
    c.ablation.random_ste_event |= f.random_ste_event;
  }
  return c;
}

// ---- shared option bundles ----

struct TrainFlags {
  TrainConfig cfg;
  std::vector<std::string> ablations;
  std::string strategy = "definition";
  std::string averaging = "macro";
  double split_train = 0.8, split_dev = 0.1, split_test = 0.1;
  std::uint64_t split_seed = 7;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lr", cfg.learning_rate,
                    "learning rate (desk-scale default; the reference setting is 1.5e-5)")
        ->capture_default_str();
    cmd->add_option("--dropout", cfg.dropout, "dropout rate")->capture_default_str();
    cmd->add_option("--batch", cfg.batch_size, "batch size")->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "static/dynamic type-embedding mixing ratio")
        ->capture_default_str();
    cmd->add_option("--lambda", cfg.lambda, "event-loss weight in the joint loss")
        ->capture_default_str();
    cmd->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--threshold", cfg.threshold, "decision threshold on head outputs")
        ->capture_default_str();
    cmd->add_option("--question-strategy", strategy, "name|triggers|definition")
        ->capture_default_str();
    cmd->add_option("--averaging", averaging, "macro|micro primary averaging")
        ->capture_default_str();
    cmd->add_option("--ablate", ablations,
                    "ablation variant, repeatable (no_dse, no_dynamic_ste, no_entity_ste, "
                    "random_ste_entity, random_ste_slot, random_ste_event)");
    cmd->add_flag("--sgd", cfg.use_sgd, "plain SGD instead of the adaptive-moment rule");
    cmd->add_flag("--normalized-event-attention", cfg.normalized_event_attention,
                  "masked-softmax event attention instead of raw cosine weights");
    cmd->add_option("--patience", cfg.patience, "early-stopping patience (dev epochs)")
        ->capture_default_str();
    cmd->add_option("--dim", cfg.encoder.dim, "encoder dimension")->capture_default_str();
    cmd->add_option("--heads", cfg.encoder.heads, "encoder attention heads")
        ->capture_default_str();
    cmd->add_option("--blocks", cfg.encoder.blocks, "encoder blocks")->capture_default_str();
    cmd->add_option("--ffn", cfg.encoder.ffn_dim, "encoder feed-forward dimension")
        ->capture_default_str();
    cmd->add_option("--max-len", cfg.encoder.max_len, "encoder window length")
        ->capture_default_str();
    cmd->add_option("--split", split_train,
                    "train fraction (dev/test take --split-dev/--split-test)")
        ->capture_default_str();
    cmd->add_option("--split-dev", split_dev, "dev fraction")->capture_default_str();
    cmd->add_option("--split-test", split_test, "test fraction")->capture_default_str();
    cmd->add_option("--split-seed", split_seed, "corpus split seed")->capture_default_str();
  }

  TrainConfig resolve(std::uint64_t seed) {
    cfg.seed = seed;
    cfg.strategy = parse_strategy(strategy);
    cfg.averaging = parse_averaging(averaging);
    for (const std::string& name : ablations) {
      const AblationFlags f = ablation_from_name(name);
      cfg.ablation.no_dse |= f.no_dse;
      cfg.ablation.no_dynamic_ste |= f.no_dynamic_ste;
      cfg.ablation.no_entity_ste |= f.no_entity_ste;
      cfg.ablation.random_ste_entity |= f.random_ste_entity;
      cfg.ablation.random_ste_slot |= f.random_ste_slot;
      cfg.ablation.random_ste_event |= f.random_ste_event;
    }
    cfg.validate();
    return cfg;
  }
};

void write_run_snapshot(const std::string& out_prefix, const std::string& verb,
                        const TrainConfig& cfg, const ordered_json& extra) {
  ordered_json j;
  j["command"] = verb;
  j["config"] = train_config_to_json(cfg);
  for (const auto& [key, value] : extra.items()) j[key] = value;
  write_text_file(out_prefix + ".run.json", j.dump(2) + "\n");
}

EpochCallback progress_logger(std::ofstream* log) {
  return [log](const EpochStats& s) {
    ordered_json line;
    line["epoch"] = s.epoch;
    line["loss"] = s.loss;
    line["event_loss"] = s.event_loss;
    line["arg_loss"] = s.arg_loss;
    if (s.has_dev) {
      line["dev_event_f1"] = s.dev.event_id_cls.f1;
      line["dev_arg_id_f1"] = s.dev.argument_id.f1;
      line["dev_arg_cls_f1"] = s.dev.argument_cls.f1;
    }
    if (log && log->is_open()) *log << line.dump() << "\n" << std::flush;
    std::cerr << "epoch " << s.epoch << "  loss " << s.loss;
    if (s.has_dev) std::cerr << "  dev event F1 " << s.dev.event_id_cls.f1;
    std::cerr << "\n";
  };
}

// ---- subcommand payloads ----

int run_gen_corpus(const std::string& schema_path, const std::string& schema_out,
                   const std::string& out_path, int sentences, int vocab_size, int max_length,
                   double imbalance, double noise, std::uint64_t seed, int events, int slots,
                   int entities) {
  std::shared_ptr<const EventSchema> schema;
  if (!schema_path.empty()) {
    schema = std::make_shared<EventSchema>(EventSchema::load_file(schema_path));
  } else {
    schema = std::make_shared<EventSchema>(make_synthetic_schema(events, slots, entities));
    if (schema_out.empty()) {
      throw ConfigError("synthesizing a schema requires --schema-out to save it");
    }
  }
  if (!schema_out.empty()) schema->save_file(schema_out);

  GenConfig cfg;
  cfg.sentences = sentences;
  cfg.vocab_size = vocab_size;
  cfg.max_length = max_length;
  cfg.noise_rate = noise;
  cfg.seed = seed;
  if (imbalance != 1.0) {
    if (imbalance <= 0.0) throw ConfigError("--imbalance must be positive");
    cfg.event_weights.assign(schema->num_events(), 1.0);
    cfg.event_weights[0] = imbalance;
  }
  Corpus corpus = generate_corpus(schema, cfg);
  write_corpus(corpus, out_path);

  ordered_json snapshot;
  snapshot["command"] = "gen-corpus";
  snapshot["schema"] = schema_path.empty() ? schema_out : schema_path;
  snapshot["out"] = out_path;
  snapshot["sentences"] = sentences;
  snapshot["vocab_size"] = vocab_size;
  snapshot["max_length"] = max_length;
  snapshot["imbalance"] = imbalance;
  snapshot["noise"] = noise;
  snapshot["seed"] = seed;
  write_text_file(prefix_of(out_path) + ".run.json", snapshot.dump(2) + "\n");
  std::cerr << "wrote " << corpus.size() << " sentences to " << out_path << "\n";
  return kExitOk;
}

int run_train(const std::string& corpus_path, const std::string& schema_path,
              const std::string& out_prefix, TrainFlags& flags, std::uint64_t seed) {
  const TrainConfig cfg = flags.resolve(seed);
  auto schema = std::make_shared<EventSchema>(EventSchema::load_file(schema_path));
  Corpus corpus = read_corpus(corpus_path, schema);
  SplitResult parts = split_corpus(corpus, flags.split_train, flags.split_dev, flags.split_test,
                                   flags.split_seed);
  std::cerr << "train/dev/test = " << parts.train.size() << "/" << parts.dev.size() << "/"
            << parts.test.size() << "\n";

  std::ofstream log(out_prefix + ".log");
  TrainResult result = train(parts.train, parts.dev, cfg, progress_logger(&log));

  result.model.save_checkpoint(out_prefix + ".ckpt");
  result.model.vocab.save_file(out_prefix + ".vocab");
  MetricsReport report = evaluate(result.model, parts.test);
  write_text_file(out_prefix + ".report.json", report.to_json() + "\n");
  write_text_file(out_prefix + ".report.csv", report.to_csv());
  ordered_json extra;
  extra["corpus"] = corpus_path;
  extra["schema"] = schema_path;
  extra["split"] = {flags.split_train, flags.split_dev, flags.split_test};
  extra["split_seed"] = flags.split_seed;
  write_run_snapshot(out_prefix, "train", cfg, extra);

  std::cout << report.to_text();
  if (result.history.best_epoch > 0) {
    std::cerr << "kept parameters from epoch " << result.history.best_epoch << "\n";
  }
  return kExitOk;
}

int run_eval(const std::string& model_path, const std::string& run_path,
             const std::string& vocab_path, const std::string& corpus_path,
             const std::string& schema_path, const std::string& out_prefix) {
  const std::string prefix = prefix_of(model_path);
  const std::string run_file = run_path.empty() ? prefix + ".run.json" : run_path;
  const std::string vocab_file = vocab_path.empty() ? prefix + ".vocab" : vocab_path;

  std::ifstream run_in(run_file);
  if (!run_in) throw ParseError("eval: cannot open run snapshot " + run_file);
  ordered_json run_json;
  try {
    run_json = ordered_json::parse(run_in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("eval: invalid run snapshot: " + std::string(e.what()));
  }
  const TrainConfig cfg = train_config_from_json(run_json.at("config"));

  auto schema = std::make_shared<EventSchema>(EventSchema::load_file(schema_path));
  Vocab vocab = Vocab::load_file(vocab_file);
  Model model = Model::load_checkpoint(model_path, schema, std::move(vocab), cfg);
  Corpus corpus = read_corpus(corpus_path, schema, Split::test);
  MetricsReport report = evaluate(model, corpus);
  if (!out_prefix.empty()) {
    write_text_file(out_prefix + ".report.json", report.to_json() + "\n");
    write_text_file(out_prefix + ".report.csv", report.to_csv());
    write_run_snapshot(out_prefix, "eval", cfg,
                       {{"model", model_path}, {"corpus", corpus_path}});
  }
  std::cout << report.to_text();
  return kExitOk;
}

int run_ablate(const std::string& corpus_path, const std::string& schema_path,
               const std::string& out_prefix, TrainFlags& flags, std::uint64_t seed,
               std::vector<std::string> variants, int num_seeds) {
  const TrainConfig cfg = flags.resolve(seed);
  if (variants.size() == 1 && variants[0] == "all") variants = ablation_variant_names();
  if (num_seeds < 1) throw ConfigError("--num-seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));

  auto schema = std::make_shared<EventSchema>(EventSchema::load_file(schema_path));
  Corpus corpus = read_corpus(corpus_path, schema);
  SplitResult parts = split_corpus(corpus, flags.split_train, flags.split_dev, flags.split_test,
                                   flags.split_seed);
  AblationTable table =
      ablate(parts.train, parts.dev, parts.test, cfg, variants, seeds, progress_logger(nullptr));

  write_text_file(out_prefix + ".json", table.to_json() + "\n");
  ordered_json extra;
  extra["corpus"] = corpus_path;
  extra["schema"] = schema_path;
  extra["variants"] = variants;
  extra["num_seeds"] = num_seeds;
  write_run_snapshot(out_prefix, "ablate", cfg, extra);
  std::cout << table.to_text();
  return kExitOk;
}

int run_report(const std::string& in_path, bool as_csv) {
  std::ifstream in(in_path);
  if (!in) throw ParseError("report: cannot open " + in_path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report: invalid JSON: " + std::string(e.what()));
  }
  if (doc.contains("rows")) {
    // Ablation table: re-render the stored rows.
    std::cout << "variant             | Event ID & CLS (macro P/R/F1) and F1 delta vs full\n";
    for (const auto& row : doc.at("rows")) {
      const auto& evt = row.at("mean").at("event_id_cls").at("macro");
      const auto& delta = row.at("delta_vs_full").at("event_id_cls").at("macro");
      std::string label = row.at("label").get<std::string>();
      if (label.size() < 20) label.resize(20, ' ');
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s P %.3f R %.3f F1 %.3f  (dF1 %+.3f)", label.c_str(),
                    evt.at("p").get<double>(), evt.at("r").get<double>(),
                    evt.at("f1").get<double>(), delta.at("f1").get<double>());
      std::cout << buf << "\n";
    }
    return kExitOk;
  }
  MetricsReport r;
  r.averaging = parse_averaging(doc.at("averaging").get<std::string>());
  r.threshold = doc.at("threshold").get<double>();
  auto read_prf = [](const ordered_json& j) {
    PRF x;
    x.p = j.at("p").get<double>();
    x.r = j.at("r").get<double>();
    x.f1 = j.at("f1").get<double>();
    x.tp = j.at("tp").get<long>();
    x.fp = j.at("fp").get<long>();
    x.fn = j.at("fn").get<long>();
    return x;
  };
  r.event_id_cls = read_prf(doc.at("event_id_cls"));
  r.argument_id = read_prf(doc.at("argument_id"));
  r.argument_cls = read_prf(doc.at("argument_cls"));
  r.event_id_cls_secondary = read_prf(doc.at("secondary").at("event_id_cls"));
  r.argument_id_secondary = read_prf(doc.at("secondary").at("argument_id"));
  r.argument_cls_secondary = read_prf(doc.at("secondary").at("argument_cls"));
  for (const auto& row : doc.at("per_type")) {
    r.per_type.push_back({row.at("event_id").get<int>(), row.at("event").get<std::string>(),
                          row.at("gold_count").get<long>(), row.at("f1").get<double>()});
  }
  std::cout << (as_csv ? r.to_csv() : r.to_text());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JSSM: joint structural semantic matching for event extraction"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic annotated corpus");
  std::string gen_schema, gen_schema_out, gen_out;
  int gen_sentences = 2000, gen_vocab = 200, gen_maxlen = 40;
  int gen_events = 4, gen_slots = 8, gen_entities = 3;
  double gen_imbalance = 1.0, gen_noise = 0.0;
  gen->add_option("--schema", gen_schema, "schema JSON file (omit to synthesize one)");
  gen->add_option("--schema-out", gen_schema_out, "where to save the (synthesized) schema");
  gen->add_option("--out", gen_out, "output corpus (JSON lines)")->required();
  gen->add_option("--sentences", gen_sentences, "number of sentences")->capture_default_str();
  gen->add_option("--vocab-size", gen_vocab, "generator vocabulary size")->capture_default_str();
  gen->add_option("--max-length", gen_maxlen, "max sentence length")->capture_default_str();
  gen->add_option("--imbalance", gen_imbalance, "weight of event 1 relative to the rest")
      ->capture_default_str();
  gen->add_option("--noise", gen_noise, "argument token noise rate")->capture_default_str();
  gen->add_option("--events", gen_events, "synthetic schema: event types")->capture_default_str();
  gen->add_option("--slots", gen_slots, "synthetic schema: slot types")->capture_default_str();
  gen->add_option("--entities", gen_entities, "synthetic schema: entity types")
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a model on a corpus");
  std::string tr_corpus, tr_schema, tr_out = "model";
  TrainFlags tr_flags;
  tr->add_option("--corpus", tr_corpus, "corpus JSONL file")->required();
  tr->add_option("--schema", tr_schema, "schema JSON file")->required();
  tr->add_option("--out", tr_out, "output prefix for checkpoint/vocab/report")
      ->capture_default_str();
  tr_flags.add_to(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  std::string ev_model, ev_run, ev_vocab, ev_corpus, ev_schema, ev_out;
  ev->add_option("--model", ev_model, "checkpoint file")->required();
  ev->add_option("--run", ev_run, "run snapshot (default: <model>.run.json)");
  ev->add_option("--vocab", ev_vocab, "vocabulary file (default: <model>.vocab)");
  ev->add_option("--corpus", ev_corpus, "corpus to evaluate")->required();
  ev->add_option("--schema", ev_schema, "schema JSON file")->required();
  ev->add_option("--out", ev_out, "output prefix for the report (optional)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the ablation comparison harness");
  std::string ab_corpus, ab_schema, ab_out = "ablation";
  std::vector<std::string> ab_variants = {"all"};
  int ab_num_seeds = 5;
  TrainFlags ab_flags;
  ab->add_option("--corpus", ab_corpus, "corpus JSONL file")->required();
  ab->add_option("--schema", ab_schema, "schema JSON file")->required();
  ab->add_option("--out", ab_out, "output prefix for the table")->capture_default_str();
  ab->add_option("--variants", ab_variants, "variant names or 'all'")->capture_default_str();
  ab->add_option("--num-seeds", ab_num_seeds, "seeds per variant (seed, seed+1, ...)")
      ->capture_default_str();
  ab_flags.add_to(ab);

  // report
  auto* rp = app.add_subcommand("report", "render a saved JSON report as a table");
  std::string rp_in;
  bool rp_csv = false;
  rp->add_option("--in", rp_in, "metrics or ablation JSON file")->required();
  rp->add_flag("--csv", rp_csv, "emit CSV instead of the text table");

  // Seed option shared by the stochastic verbs; default from JSSM_SEED.
  for (CLI::App* cmd : {gen, tr, ab}) {
    cmd->add_option("--seed", seed, "random seed (env JSSM_SEED overrides the default 42)");
  }

  try {
    seed = default_seed();
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(gen)) {
      return run_gen_corpus(gen_schema, gen_schema_out, gen_out, gen_sentences, gen_vocab,
                            gen_maxlen, gen_imbalance, gen_noise, seed, gen_events, gen_slots,
                            gen_entities);
    }
    if (app.got_subcommand(tr)) return run_train(tr_corpus, tr_schema, tr_out, tr_flags, seed);
    if (app.got_subcommand(ev)) {
      return run_eval(ev_model, ev_run, ev_vocab, ev_corpus, ev_schema, ev_out);
    }
    if (app.got_subcommand(ab)) {
      return run_ablate(ab_corpus, ab_schema, ab_out, ab_flags, seed, ab_variants, ab_num_seeds);
    }
    if (app.got_subcommand(rp)) return run_report(rp_in, rp_csv);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
