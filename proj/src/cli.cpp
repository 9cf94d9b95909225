#include "relanet/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "relanet/corpus.hpp"
#include "relanet/errors.hpp"
#include "relanet/evaluation.hpp"
#include "relanet/hlg.hpp"
#include "relanet/model.hpp"
#include "relanet/training.hpp"
#include "relanet/util.hpp"

namespace fs = std::filesystem;

namespace relanet::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct RunConfig {
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string graph_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::string format = "text";
  std::string variant = "full";
  std::string kind = "correlation";

  model::ModelConfig model;
  std::uint64_t seed = 1;

  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double grad_clip = 0.0;
  double target_overall = -1.0;

  int top_k = 24;
  int o_cap = 500;
};

bool machine(const RunConfig& cfg) { return cfg.format == "machine"; }

corpus::Dataset load_corpus(const std::string& path) {
  return corpus::parse_corpus(read_file(path));
}

hlg::HeterogeneousLabelGraph load_graph(const std::string& path) {
  return hlg::import_graph(nlohmann::json::parse(read_file(path)));
}

model::ReLaNet load_model(const RunConfig& cfg, const hlg::HeterogeneousLabelGraph& graph) {
  auto doc = nlohmann::json::parse(read_file(cfg.checkpoint_path));
  return model::ReLaNet::from_checkpoint(doc, graph);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

nlohmann::json effective_config(const RunConfig& cfg, const std::string& command,
                                const model::ModelConfig& mc) {
  nlohmann::json paths = nlohmann::json::object();
  auto put = [&paths](const char* key, const std::string& v) {
    if (!v.empty()) paths[key] = v;
  };
  put("train", cfg.train_path);
  put("dev", cfg.dev_path);
  put("test", cfg.test_path);
  put("graph", cfg.graph_path);
  put("checkpoint", cfg.checkpoint_path);
  put("out", cfg.out_dir);
  return nlohmann::json{{"command", command},
                        {"seed", cfg.seed},
                        {"variant", cfg.variant},
                        {"paths", paths},
                        {"model", mc.to_json()}};
}

void print_config_block(std::ostream& out, const nlohmann::json& effective) {
  out << "== effective config ==\n" << effective.dump(2) << "\n";
}

void print_metrics(std::ostream& out, const evaluation::MetricsReport& r) {
  out << "utterances:   " << r.n_utterances << "\n"
      << "intent_acc:   " << r.intent_acc << "\n"
      << "slot_f1:      " << r.slot_f1 << "\n"
      << "overall_acc:  " << r.overall_acc << "\n";
}

int cmd_build_graph(const RunConfig& cfg, std::ostream& out) {
  auto data = load_corpus(cfg.train_path);
  auto inv = corpus::build_inventory(data);
  auto stats = hlg::compute_stats(data, inv);
  auto graph = hlg::build_hlg(stats, inv, cfg.model.lambda1, cfg.model.lambda2);

  std::string graph_path = out_path(cfg, "graph.json");
  std::string cooc_path = out_path(cfg, "cooccurrence.json");
  write_file(graph_path, hlg::export_graph(graph).dump(2) + "\n");
  write_file(cooc_path, evaluation::export_cooccurrence(stats).dump(2) + "\n");

  std::map<std::string, long> by_relation;
  for (const auto& e : graph.edges()) ++by_relation[hlg::relation_name(e.rel)];

  nlohmann::json doc = effective_config(cfg, "build-graph", cfg.model);
  doc["nodes"] = graph.nodes().size();
  doc["edges"] = graph.edges().size();
  doc["edges_by_relation"] = by_relation;
  doc["graph_path"] = graph_path;
  doc["cooccurrence_path"] = cooc_path;

  if (machine(cfg)) {
    out << doc.dump() << "\n";
    return kExitOk;
  }
  print_config_block(out, effective_config(cfg, "build-graph", cfg.model));
  out << "nodes: " << graph.nodes().size() << "\n";
  out << "edges: " << graph.edges().size() << "\n";
  for (const auto& [name, count] : by_relation) out << "  " << name << ": " << count << "\n";
  out << "wrote " << graph_path << "\n";
  out << "wrote " << cooc_path << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto train_data = load_corpus(cfg.train_path);
  auto dev_data = cfg.dev_path.empty() ? train_data : load_corpus(cfg.dev_path);
  auto inv = corpus::build_inventory(train_data);
  auto vocab = corpus::build_vocabulary(train_data);

  hlg::HeterogeneousLabelGraph graph;
  std::string graph_path = cfg.graph_path;
  if (graph_path.empty()) {
    auto stats = hlg::compute_stats(train_data, inv);
    graph = hlg::build_hlg(stats, inv, cfg.model.lambda1, cfg.model.lambda2);
    graph_path = out_path(cfg, "graph.json");
    write_file(graph_path, hlg::export_graph(graph).dump(2) + "\n");
  } else {
    graph = load_graph(graph_path);
  }

  model::ModelConfig mc = evaluation::apply_variant(cfg.model, cfg.variant);
  nlohmann::json effective = effective_config(cfg, "train", mc);
  model::ReLaNet m(mc, inv, vocab, graph, cfg.seed);

  training::TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.lr = cfg.lr;
  opts.grad_clip = cfg.grad_clip;
  opts.target_dev_overall = cfg.target_overall;
  opts.checkpoint_path =
      cfg.checkpoint_path.empty() ? out_path(cfg, "checkpoint.json") : cfg.checkpoint_path;

  if (!machine(cfg)) print_config_block(out, effective);
  auto rep = training::train(m, train_data, dev_data, opts, cfg.seed);

  // the run log opens with the configuration that produced it
  std::string log_path = out_path(cfg, "train_log.jsonl");
  write_file(log_path, effective.dump() + "\n" + rep.log_text);

  nlohmann::json doc = effective;
  doc["epochs_run"] = rep.epochs.size();
  doc["best_epoch"] = rep.best_epoch;
  doc["best_dev_overall"] = rep.best_dev_overall;
  doc["checkpoint_path"] = opts.checkpoint_path;
  doc["graph_path"] = graph_path;
  doc["log_path"] = log_path;

  bool have_test = !cfg.test_path.empty();
  evaluation::MetricsReport test_report;
  if (have_test) {
    test_report = evaluation::evaluate(m, load_corpus(cfg.test_path));
    doc["test_metrics"] = test_report.to_json();
  }

  if (machine(cfg)) {
    out << doc.dump() << "\n";
    return kExitOk;
  }
  out << "epochs run:       " << rep.epochs.size() << "\n";
  out << "best epoch:       " << rep.best_epoch << "\n";
  out << "best dev overall: " << rep.best_dev_overall << "\n";
  out << "wrote " << opts.checkpoint_path << "\n";
  out << "wrote " << log_path << "\n";
  if (have_test) {
    out << "test metrics:\n";
    print_metrics(out, test_report);
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  auto graph = load_graph(cfg.graph_path);
  auto m = load_model(cfg, graph);
  auto data = load_corpus(cfg.test_path);
  auto report = evaluation::evaluate(m, data);

  nlohmann::json doc = effective_config(cfg, "eval", m.config());
  doc["metrics"] = report.to_json();
  if (machine(cfg)) {
    out << doc.dump() << "\n";
    return kExitOk;
  }
  print_config_block(out, effective_config(cfg, "eval", m.config()));
  print_metrics(out, report);
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  auto graph = load_graph(cfg.graph_path);
  auto m = load_model(cfg, graph);
  auto data = load_corpus(cfg.test_path);

  corpus::Dataset predicted;
  for (const auto& s : data.samples) {
    auto pred = m.predict(s);
    predicted.samples.push_back({s.tokens, pred.slots, pred.intents});
  }
  std::string text = corpus::serialize_corpus(predicted);
  std::string path = out_path(cfg, "predictions.txt");
  write_file(path, text);

  nlohmann::json doc = effective_config(cfg, "predict", m.config());
  doc["predictions_path"] = path;
  doc["n_utterances"] = predicted.samples.size();
  if (machine(cfg)) {
    out << doc.dump() << "\n";
    return kExitOk;
  }
  print_config_block(out, effective_config(cfg, "predict", m.config()));
  out << "wrote " << predicted.samples.size() << " predictions to " << path << "\n";
  return kExitOk;
}

int cmd_export(const RunConfig& cfg, std::ostream& out) {
  nlohmann::json doc;
  std::string path;

  if (cfg.kind == "cooccurrence") {
    if (cfg.train_path.empty()) throw ConfigError("export --kind cooccurrence needs --train");
    auto data = load_corpus(cfg.train_path);
    auto inv = corpus::build_inventory(data);
    auto stats = hlg::compute_stats(data, inv);
    doc = evaluation::export_cooccurrence(stats);
    path = out_path(cfg, "cooccurrence.json");
  } else {
    if (cfg.checkpoint_path.empty() || cfg.graph_path.empty())
      throw ConfigError("export --kind " + cfg.kind + " needs --checkpoint and --graph");
    auto graph = load_graph(cfg.graph_path);
    auto m = load_model(cfg, graph);
    if (cfg.kind == "correlation") {
      const auto& inv = m.inventory();
      ad::Matrix intents = m.intent_embeddings();
      ad::Matrix slots = m.slot_embeddings();
      ad::Matrix all(intents.rows(), intents.cols() + slots.cols());
      all << intents, slots;
      std::vector<std::string> labels = inv.intent_labels;
      labels.insert(labels.end(), inv.slot_labels.begin(), inv.slot_labels.end());
      doc = evaluation::export_label_correlation(all, labels);
      path = out_path(cfg, "correlation.json");
    } else {  // hidden
      std::string data_path = cfg.test_path.empty() ? cfg.train_path : cfg.test_path;
      if (data_path.empty())
        throw ConfigError("export --kind hidden needs --test or --train data");
      auto data = load_corpus(data_path);
      doc = evaluation::export_hidden_states(m, data, cfg.top_k, cfg.o_cap, cfg.seed);
      path = out_path(cfg, "hidden_states.json");
    }
  }
  write_file(path, doc.dump(2) + "\n");

  nlohmann::json result = effective_config(cfg, "export", cfg.model);
  result["kind"] = cfg.kind;
  result["export_path"] = path;
  if (machine(cfg)) {
    out << result.dump() << "\n";
    return kExitOk;
  }
  print_config_block(out, effective_config(cfg, "export", cfg.model));
  out << "wrote " << cfg.kind << " export to " << path << "\n";
  return kExitOk;
}

void add_common_flags(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--format", cfg.format, "Report format")
      ->check(CLI::IsMember({"text", "machine"}))
      ->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

void add_model_flags(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--emb-dim", cfg.model.word_emb_dim, "Word embedding width")
      ->capture_default_str();
  sub->add_option("--label-dim", cfg.model.label_dim, "Label embedding width")
      ->capture_default_str();
  sub->add_option("--hidden-dim", cfg.model.hidden_dim, "Recurrent state width")
      ->capture_default_str();
  sub->add_option("--attn-dim", cfg.model.attn_dim, "Self-attention key width")
      ->capture_default_str();
  sub->add_option("--attn-out-dim", cfg.model.attn_out_dim, "Self-attention value width")
      ->capture_default_str();
  sub->add_option("--layers", cfg.model.gnn_layers, "Graph network depth")
      ->capture_default_str();
  sub->add_option("--steps", cfg.model.steps, "Interaction steps")->capture_default_str();
  sub->add_option("--window", cfg.model.window, "Local attention window")
      ->capture_default_str();
  sub->add_option("--heads", cfg.model.gat_heads, "Attention heads")->capture_default_str();
  sub->add_option("--intent-threshold", cfg.model.intent_threshold, "Intent vote threshold")
      ->capture_default_str();
  sub->add_option("--gamma-i", cfg.model.gamma_i, "Intent task weight")->capture_default_str();
  sub->add_option("--gamma-s", cfg.model.gamma_s, "Slot task weight")->capture_default_str();
  sub->add_option("--beta-i", cfg.model.beta_i, "Intent constraint weight")
      ->capture_default_str();
  sub->add_option("--beta-s", cfg.model.beta_s, "Slot constraint weight")
      ->capture_default_str();
}

void add_lambda_flags(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--lambda1", cfg.model.lambda1, "Weak dependence threshold")
      ->capture_default_str();
  sub->add_option("--lambda2", cfg.model.lambda2, "Strong dependence threshold")
      ->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"label-graph pipeline for joint intent detection and slot filling"};
  app.name("relanet");
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build-graph", "Build the label graph from a training corpus");
  build->add_option("--train", cfg.train_path, "Training corpus")->required();
  add_lambda_flags(build, cfg);
  add_common_flags(build, cfg);

  auto* train = app.add_subcommand("train", "Train a model and keep the best-dev checkpoint");
  train->add_option("--train", cfg.train_path, "Training corpus")->required();
  train->add_option("--dev", cfg.dev_path, "Dev corpus (defaults to the training corpus)");
  train->add_option("--test", cfg.test_path, "Optional test corpus evaluated after training");
  train->add_option("--graph", cfg.graph_path, "Prebuilt graph document");
  train->add_option("--checkpoint", cfg.checkpoint_path, "Checkpoint output path");
  train->add_option("--variant", cfg.variant, "Ablation variant")
      ->check(CLI::IsMember(evaluation::kVariants))
      ->capture_default_str();
  train->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
  train->add_option("--grad-clip", cfg.grad_clip, "Global gradient-norm clip (0 disables)")
      ->capture_default_str();
  train->add_option("--target-overall", cfg.target_overall,
                    "Stop once dev overall accuracy reaches this value (<=0 disables)")
      ->capture_default_str();
  add_lambda_flags(train, cfg);
  add_model_flags(train, cfg);
  add_common_flags(train, cfg);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  eval->add_option("--checkpoint", cfg.checkpoint_path, "Checkpoint path")->required();
  eval->add_option("--graph", cfg.graph_path, "Graph document")->required();
  eval->add_option("--test", cfg.test_path, "Evaluation corpus")->required();
  add_common_flags(eval, cfg);

  auto* predict = app.add_subcommand("predict", "Write predictions in the corpus format");
  predict->add_option("--checkpoint", cfg.checkpoint_path, "Checkpoint path")->required();
  predict->add_option("--graph", cfg.graph_path, "Graph document")->required();
  predict->add_option("--test", cfg.test_path, "Input corpus")->required();
  add_common_flags(predict, cfg);

  auto* exp = app.add_subcommand("export", "Export analysis documents");
  exp->add_option("--kind", cfg.kind, "Export kind")
      ->check(CLI::IsMember({"correlation", "cooccurrence", "hidden"}))
      ->capture_default_str();
  exp->add_option("--checkpoint", cfg.checkpoint_path, "Checkpoint path");
  exp->add_option("--graph", cfg.graph_path, "Graph document");
  exp->add_option("--train", cfg.train_path, "Corpus for co-occurrence/hidden exports");
  exp->add_option("--test", cfg.test_path, "Corpus for the hidden-state export");
  exp->add_option("--top-k", cfg.top_k, "Most frequent non-O tags to keep")
      ->capture_default_str();
  exp->add_option("--o-cap", cfg.o_cap, "Max sampled O tokens")->capture_default_str();
  add_common_flags(exp, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (build->parsed()) return cmd_build_graph(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    if (predict->parsed()) return cmd_predict(cfg, out);
    return cmd_export(cfg, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace relanet::cli
