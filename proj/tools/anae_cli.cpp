#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anae/anae.hpp"

namespace fs = std::filesystem;
using namespace anae;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalError = 2, kIoError = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<double> kFractions{0.1, 0.2, 0.3, 0.4, 0.5};

// Everything needed to rerun a command; written to config.json beside outputs.
struct RunConfig {
  std::string dataset_dir;
  std::string dataset = "cora";
  std::string task = "link-pred";
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  ModelConfig model;
};

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset_dir"] = c.dataset_dir;
  j["dataset"] = c.dataset;
  j["task"] = c.task;
  j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  j["out"] = c.out;
  j["split_ratios"] = {SplitRatios{}.train, SplitRatios{}.val, SplitRatios{}.test};
  j["model"] = c.model;
  return j;
}

RunConfig from_json(const nlohmann::json& j) {
  RunConfig c;
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  if (j.contains("task")) c.task = j.at("task").get<std::string>();
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void write_file(const fs::path& p, Fn&& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  body(out);
  if (!out) throw IoError("failed writing " + p.string());
}

// Flag values plus the CLI11 option handles used to tell which were given.
struct Flags {
  std::string config_path, dataset_dir, dataset, task, out, checkpoint, aggregation, decoder;
  std::uint64_t seed = 0;
  int epochs = 0, patience = 0, fanout = 0, batch_size = 0;
  double dropout = 0, lambda = 0, lr = 0;
  std::vector<int> dims, heads;
  bool minibatch = false, normalize = false;
  std::vector<int> sweep_dims{8, 16, 32, 64, 128, 256};
  int repeats = 10;
  std::map<std::string, std::vector<CLI::Option*>> opts;  // one entry per subcommand

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    if (it == opts.end()) return false;
    for (const CLI::Option* o : it->second)
      if (o->count() > 0) return true;
    return false;
  }
};

void add_common(CLI::App* cmd, Flags& f) {
  auto& o = f.opts;
  o["config"].push_back(cmd->add_option("--config", f.config_path, "JSON run config; flags override its values"));
  o["dataset-dir"].push_back(cmd->add_option("--dataset-dir", f.dataset_dir, "Directory with <name>.content and <name>.cites"));
  o["dataset"].push_back(cmd->add_option("--dataset", f.dataset, "Dataset name (file stem)"));
  o["task"].push_back(cmd->add_option("--task", f.task, "link-pred or node-class")->check(CLI::IsMember({"link-pred", "node-class"})));
  o["seed"].push_back(cmd->add_option("--seed", f.seed, "Seed for splits, init, dropout and sampling (required)"));
  o["epochs"].push_back(cmd->add_option("--epochs", f.epochs)->check(CLI::PositiveNumber));
  o["patience"].push_back(cmd->add_option("--patience", f.patience)->check(CLI::PositiveNumber));
  o["dims"].push_back(cmd->add_option("--dims", f.dims, "Encoder widths, e.g. 128,64")->delimiter(','));
  o["heads"].push_back(cmd->add_option("--heads", f.heads, "Heads per layer, e.g. 8,1")->delimiter(','));
  o["dropout"].push_back(cmd->add_option("--dropout", f.dropout));
  o["lambda"].push_back(cmd->add_option("--lambda", f.lambda));
  o["lr"].push_back(cmd->add_option("--lr", f.lr));
  o["aggregation"].push_back(cmd->add_option("--aggregation", f.aggregation)->check(CLI::IsMember({"attention", "gcn"})));
  o["decoder"].push_back(cmd->add_option("--decoder", f.decoder)->check(CLI::IsMember({"graph", "mlp", "structure"})));
  o["minibatch"].push_back(cmd->add_flag("--minibatch", f.minibatch, "Sampled-neighborhood training"));
  o["fanout"].push_back(cmd->add_option("--fanout", f.fanout));
  o["batch-size"].push_back(cmd->add_option("--batch-size", f.batch_size));
  o["normalize-features"].push_back(cmd->add_flag("--normalize-features", f.normalize, "Row-normalize attributes"));
  o["out"].push_back(cmd->add_option("--out", f.out, "Output directory"));
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (f.given("config")) {
    try {
      c = from_json(nlohmann::json::parse(read_file(f.config_path)));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad config file " + f.config_path + ": " + e.what());
    }
  }
  if (f.given("dataset-dir")) c.dataset_dir = f.dataset_dir;
  if (f.given("dataset")) c.dataset = f.dataset;
  if (f.given("task")) c.task = f.task;
  if (f.given("seed")) c.seed = f.seed;
  if (f.given("out")) c.out = f.out;
  ModelConfig& m = c.model;
  if (f.given("epochs")) m.epochs = f.epochs;
  if (f.given("patience")) m.patience = f.patience;
  if (f.given("dims")) m.encoder_dims = f.dims;
  if (f.given("heads")) m.encoder_heads = m.decoder_heads = f.heads;
  if (f.given("dropout")) m.dropout = f.dropout;
  if (f.given("lambda")) m.lambda = f.lambda;
  if (f.given("lr")) m.lr = f.lr;
  if (f.given("aggregation")) m.aggregation = f.aggregation == "gcn" ? Aggregation::gcn : Aggregation::attention;
  if (f.given("decoder"))
    m.decoder = f.decoder == "mlp" ? DecoderKind::mlp : f.decoder == "structure" ? DecoderKind::structure : DecoderKind::graph;
  if (f.given("minibatch")) m.minibatch = f.minibatch;
  if (f.given("fanout")) m.fanout = f.fanout;
  if (f.given("batch-size")) m.batch_size = f.batch_size;
  if (f.given("normalize-features")) m.normalize_features = f.normalize;

  if (!c.seed) throw UsageError("a seed is required (--seed or \"seed\" in the config file)");
  m.seed = *c.seed;
  if (c.task != "link-pred" && c.task != "node-class") throw UsageError("unknown task '" + c.task + "'");
  if (c.dataset_dir.empty()) throw UsageError("--dataset-dir is required");
  if (!fs::is_directory(c.dataset_dir)) throw UsageError("dataset directory " + c.dataset_dir + " does not exist");
  m.validate();
  return c;
}

struct Prepared {
  Dataset data;
  Matrix x;
  std::optional<EdgeSplit> split;
  SparseGraph graph;  // self-looped graph the model sees
};

Prepared prepare_data(const RunConfig& c, bool with_split) {
  Prepared p;
  p.data = load_dataset(c.dataset_dir, c.dataset);
  AttributeMatrix attrs = p.data.attributes;
  if (c.model.normalize_features) row_normalize(attrs);
  p.x = attrs.values;
  if (with_split) {
    p.split = split_edges(p.data.graph, {}, *c.seed);
    p.graph = build_train_graph(*p.split, p.data.graph.num_nodes);
  } else {
    p.graph = add_self_loops(p.data.graph);
  }
  return p;
}

fs::path out_dir(const RunConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_config(const fs::path& dir, const RunConfig& c) {
  write_file(dir / "config.json", [&](std::ostream& o) { o << to_json(c).dump(2) << '\n'; });
}

void write_split(const fs::path& dir, const EdgeSplit& s) {
  write_file(dir / "split.json", [&](std::ostream& o) { o << split_to_json(s).dump() << '\n'; });
}

int cmd_prepare(const Flags& f) {
  RunConfig c = resolve(f);
  Prepared p = prepare_data(c, c.task == "link-pred");
  fs::path dir = out_dir(c);
  const auto& g = p.data.graph;
  nlohmann::json stats{{"dataset", c.dataset},
                       {"nodes", g.num_nodes},
                       {"edges", g.undirected_edges().size()},
                       {"features", p.data.attributes.num_features()},
                       {"classes", p.data.labels.num_classes},
                       {"dangling_citations", p.data.dangling_citations}};
  if (p.split) {
    write_split(dir, *p.split);
    stats["split_hash"] = split_hash(*p.split);
    stats["train_edges"] = p.split->train_pos.size();
    stats["val_edges"] = p.split->val_pos.size();
    stats["test_edges"] = p.split->test_pos.size();
  }
  write_file(dir / "dataset.json", [&](std::ostream& o) { o << stats.dump(2) << '\n'; });
  write_config(dir, c);
  std::cout << stats.dump(2) << '\n';
  return kOk;
}

int cmd_train(const Flags& f) {
  RunConfig c = resolve(f);
  const bool link = c.task == "link-pred";
  Prepared p = prepare_data(c, link);
  fs::path dir = out_dir(c);
  write_config(dir, c);
  if (p.split) write_split(dir, *p.split);

  AnaeModel model(c.model, p.x.cols());
  TrainResult r = fit(model, p.graph, p.x, p.split ? &*p.split : nullptr);

  write_file(dir / "checkpoint.bin", [&](std::ostream& o) { write_checkpoint(o, model.state()); });
  write_file(dir / "train_log.csv", [&](std::ostream& o) { write_training_log(o, r.log); });
  write_file(dir / "embeddings.tsv", [&](std::ostream& o) { write_embeddings_tsv(o, r.embedding, p.data.node_ids); });
  std::cerr << "trained " << r.log.size() << " epochs, kept epoch " << r.best_epoch;
  if (!std::isnan(r.best_val_auc)) std::cerr << " (val auc " << r.best_val_auc << ")";
  std::cerr << '\n';
  return kOk;
}

std::vector<MetricRow> evaluate(const RunConfig& c, const Prepared& p, const Matrix& z) {
  std::vector<MetricRow> rows;
  if (c.task == "link-pred") {
    LinkPredictionResult lp = evaluate_link_prediction(z, *p.split);
    rows.push_back({c.dataset, c.task, "auc", lp.auc, 0.0, *c.seed});
    rows.push_back({c.dataset, c.task, "ap", lp.ap, 0.0, *c.seed});
  } else {
    for (double frac : kFractions) {
      ClassificationResult cr = classification_experiment(z, p.data.labels, frac, 10, *c.seed);
      std::ostringstream suffix;
      suffix << '@' << frac;
      rows.push_back({c.dataset, c.task, "micro_f1" + suffix.str(), cr.micro_mean, cr.micro_std, *c.seed});
      rows.push_back({c.dataset, c.task, "macro_f1" + suffix.str(), cr.macro_mean, cr.macro_std, *c.seed});
    }
  }
  return rows;
}

int cmd_eval(const Flags& f) {
  RunConfig c = resolve(f);
  fs::path ckpt = f.given("checkpoint") ? fs::path(f.checkpoint) : fs::path(c.out) / "checkpoint.bin";
  if (!fs::exists(ckpt)) throw IoError("checkpoint " + ckpt.string() + " not found");
  Prepared p = prepare_data(c, c.task == "link-pred");
  AnaeModel model(c.model, p.x.cols());
  model.load_state(load_checkpoint(ckpt));
  const Matrix z = model.embed(p.graph, p.x);
  fs::path dir = out_dir(c);
  auto rows = evaluate(c, p, z);
  write_file(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, rows); });
  write_metrics_csv(std::cout, rows);
  return kOk;
}

int cmd_ablation(const Flags& f) {
  RunConfig c = resolve(f);
  if (c.task != "link-pred") throw UsageError("ablation compares link prediction; use --task link-pred");
  Prepared p = prepare_data(c, true);
  fs::path dir = out_dir(c);
  write_config(dir, c);
  write_split(dir, *p.split);
  const std::uint64_t hash = split_hash(*p.split);

  struct Variant {
    const char* name;
    Aggregation aggregation;
    DecoderKind decoder;
  };
  const Variant variants[] = {{"ANAE", Aggregation::attention, DecoderKind::graph},
                              {"ANAE-GCN", Aggregation::gcn, DecoderKind::graph},
                              {"ANAE-MLP", Aggregation::attention, DecoderKind::mlp}};
  std::ostringstream table;
  table << "variant,auc,ap,split_hash\n";
  table.precision(10);
  for (const auto& v : variants) {
    ModelConfig m = c.model;
    m.aggregation = v.aggregation;
    m.decoder = v.decoder;
    AnaeModel model(m, p.x.cols());
    TrainResult r = fit(model, p.graph, p.x, &*p.split);
    LinkPredictionResult lp = evaluate_link_prediction(r.embedding, *p.split);
    table << v.name << ',' << lp.auc << ',' << lp.ap << ',' << hash << '\n';
    std::cerr << v.name << " auc " << lp.auc << " ap " << lp.ap << '\n';
  }
  write_file(dir / "ablation.csv", [&](std::ostream& o) { o << table.str(); });
  std::cout << table.str();
  return kOk;
}

int cmd_sweep(const Flags& f) {
  RunConfig c = resolve(f);
  c.task = "node-class";
  if (c.model.encoder_dims.size() != 2) throw UsageError("the sweep expects a two-layer encoder");
  Prepared p = prepare_data(c, false);
  fs::path dir = out_dir(c);
  write_config(dir, c);
  auto rows = dimension_sweep(p.graph, p.x, p.data.labels, c.model, f.sweep_dims, 0.5, f.repeats);
  write_file(dir / "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, rows); });
  write_sweep_csv(std::cout, rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attributed network auto-encoder: training and evaluation"};
  app.require_subcommand(1);
  Flags f;
  CLI::App* prepare = app.add_subcommand("prepare", "Load a dataset, report statistics, write the edge split");
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, log and embeddings");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write metrics.csv");
  CLI::App* ablation = app.add_subcommand("ablation", "Train ANAE, ANAE-GCN and ANAE-MLP on one split");
  CLI::App* sweep = app.add_subcommand("sweep", "Node classification across embedding widths");
  for (CLI::App* cmd : {prepare, train_cmd, eval, ablation, sweep}) add_common(cmd, f);
  f.opts["checkpoint"].push_back(eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file (default <out>/checkpoint.bin)"));
  sweep->add_option("--sweep-dims", f.sweep_dims, "Embedding widths to sweep")->delimiter(',');
  sweep->add_option("--repeats", f.repeats, "Label-sampling repeats per width")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*prepare) return cmd_prepare(f);
    if (*train_cmd) return cmd_train(f);
    if (*eval) return cmd_eval(f);
    if (*ablation) return cmd_ablation(f);
    return cmd_sweep(f);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
