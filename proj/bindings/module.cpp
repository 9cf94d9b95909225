#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "relanet/corpus.hpp"
#include "relanet/errors.hpp"
#include "relanet/evaluation.hpp"
#include "relanet/hlg.hpp"
#include "relanet/model.hpp"
#include "relanet/training.hpp"

namespace py = pybind11;
using namespace relanet;

namespace {

model::ModelConfig config_from(const std::string& config_json) {
  return model::ModelConfig::from_json(nlohmann::json::parse(config_json));
}

training::TrainOptions options_from(const std::string& opts_json) {
  auto doc = nlohmann::json::parse(opts_json);
  training::TrainOptions opts;
  opts.epochs = doc.value("epochs", opts.epochs);
  opts.batch_size = doc.value("batch_size", opts.batch_size);
  opts.lr = doc.value("lr", opts.lr);
  opts.grad_clip = doc.value("grad_clip", opts.grad_clip);
  opts.target_dev_overall = doc.value("target_dev_overall", opts.target_dev_overall);
  opts.log_path = doc.value("log_path", opts.log_path);
  opts.checkpoint_path = doc.value("checkpoint_path", opts.checkpoint_path);
  return opts;
}

corpus::Sample sample_from_tokens(const std::vector<std::string>& tokens) {
  corpus::Sample s;
  s.tokens = tokens;
  s.slots.assign(tokens.size(), "O");
  return s;
}

}  // namespace

PYBIND11_MODULE(_relanet, m) {
  m.doc() = "label-graph pipeline for joint multi-intent detection and slot filling";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ComputeError>(m, "ComputeError");

  py::class_<corpus::Sample>(m, "Sample")
      .def_readonly("tokens", &corpus::Sample::tokens)
      .def_readonly("slots", &corpus::Sample::slots)
      .def_readonly("intents", &corpus::Sample::intents);

  py::class_<corpus::Dataset>(m, "Dataset")
      .def_readonly("samples", &corpus::Dataset::samples)
      .def("__len__", [](const corpus::Dataset& d) { return d.samples.size(); });

  py::class_<corpus::LabelInventory>(m, "LabelInventory")
      .def_readonly("intent_labels", &corpus::LabelInventory::intent_labels)
      .def_readonly("slot_labels", &corpus::LabelInventory::slot_labels)
      .def("fingerprint", &corpus::LabelInventory::fingerprint);

  py::class_<corpus::Vocabulary>(m, "Vocabulary")
      .def("__len__", [](const corpus::Vocabulary& v) { return v.size(); });

  py::class_<hlg::CooccurrenceStats>(m, "CooccurrenceStats")
      .def("__len__", [](const hlg::CooccurrenceStats& s) { return s.size(); });

  py::class_<hlg::HeterogeneousLabelGraph>(m, "LabelGraph")
      .def_property_readonly("n_nodes",
                             [](const hlg::HeterogeneousLabelGraph& g) {
                               return g.nodes().size();
                             })
      .def_property_readonly("n_edges",
                             [](const hlg::HeterogeneousLabelGraph& g) {
                               return g.edges().size();
                             })
      .def("to_json", [](const hlg::HeterogeneousLabelGraph& g) {
        return hlg::export_graph(g).dump();
      });

  m.def("parse_corpus", [](const std::string& text) { return corpus::parse_corpus(text); },
        py::arg("text"));
  m.def("serialize_corpus", &corpus::serialize_corpus, py::arg("dataset"));
  m.def("build_inventory", &corpus::build_inventory, py::arg("dataset"));
  m.def("build_vocabulary", &corpus::build_vocabulary, py::arg("dataset"));
  m.def("compute_stats", &hlg::compute_stats, py::arg("dataset"), py::arg("inventory"));
  m.def("build_hlg", &hlg::build_hlg, py::arg("stats"), py::arg("inventory"),
        py::arg("lambda1"), py::arg("lambda2"));
  m.def("import_graph", [](const std::string& doc) {
    return hlg::import_graph(nlohmann::json::parse(doc));
  });
  m.def("conditional_probability",
        [](const hlg::CooccurrenceStats& stats, const std::string& a, const std::string& b) {
          return hlg::conditional_probability(stats, a, b);
        });

  m.def("default_config_json", [] { return model::ModelConfig().to_json().dump(); });
  m.def("variants", [] { return evaluation::kVariants; });

  py::class_<model::ReLaNet>(m, "Model")
      .def(py::init([](const std::string& config_json, const corpus::LabelInventory& inv,
                       const corpus::Vocabulary& vocab,
                       const hlg::HeterogeneousLabelGraph& graph, std::uint64_t seed) {
             return model::ReLaNet(config_from(config_json), inv, vocab, graph, seed);
           }),
           py::arg("config_json"), py::arg("inventory"), py::arg("vocabulary"),
           py::arg("graph"), py::arg("seed") = 1)
      .def("predict",
           [](model::ReLaNet& m, const corpus::Sample& s) {
             auto p = m.predict(s);
             return py::make_tuple(p.intents, p.slots);
           },
           py::arg("sample"))
      .def("predict_tokens",
           [](model::ReLaNet& m, const std::vector<std::string>& tokens) {
             auto p = m.predict(sample_from_tokens(tokens));
             return py::make_tuple(p.intents, p.slots);
           },
           py::arg("tokens"))
      .def("config_json",
           [](const model::ReLaNet& m) { return m.config().to_json().dump(); })
      .def("to_checkpoint_json",
           [](const model::ReLaNet& m) { return m.to_checkpoint().dump(); });

  m.def("from_checkpoint_json",
        [](const std::string& doc, const hlg::HeterogeneousLabelGraph& graph) {
          return model::ReLaNet::from_checkpoint(nlohmann::json::parse(doc), graph);
        },
        py::arg("checkpoint_json"), py::arg("graph"));

  m.def("train",
        [](model::ReLaNet& m, const corpus::Dataset& train_data,
           const corpus::Dataset& dev_data, const std::string& opts_json, std::uint64_t seed) {
          auto rep = training::train(m, train_data, dev_data, options_from(opts_json), seed);
          nlohmann::json doc{{"epochs_run", rep.epochs.size()},
                             {"best_epoch", rep.best_epoch},
                             {"best_dev_overall", rep.best_dev_overall},
                             {"log", rep.log_text}};
          return doc.dump();
        },
        py::arg("model"), py::arg("train_data"), py::arg("dev_data"),
        py::arg("options_json") = "{}", py::arg("seed") = 1);

  m.def("evaluate", [](model::ReLaNet& m, const corpus::Dataset& data) {
    return evaluation::evaluate(m, data).to_json().dump();
  });

  m.def("run_ablation",
        [](const std::string& variant, const corpus::Dataset& train_data,
           const corpus::Dataset& dev_data, const corpus::Dataset& test_data,
           const std::string& config_json, const std::string& opts_json, std::uint64_t seed) {
          auto rep = evaluation::run_ablation(variant, train_data, dev_data, test_data,
                                              config_from(config_json), options_from(opts_json),
                                              seed);
          return rep.to_json().dump();
        },
        py::arg("variant"), py::arg("train_data"), py::arg("dev_data"), py::arg("test_data"),
        py::arg("config_json"), py::arg("options_json") = "{}", py::arg("seed") = 1);

  m.def("export_cooccurrence", [](const hlg::CooccurrenceStats& stats) {
    return evaluation::export_cooccurrence(stats).dump();
  });
  m.def("export_hidden_states",
        [](model::ReLaNet& m, const corpus::Dataset& data, int top_k, int o_cap,
           std::uint64_t seed) {
          return evaluation::export_hidden_states(m, data, top_k, o_cap, seed).dump();
        },
        py::arg("model"), py::arg("data"), py::arg("top_k") = 24, py::arg("o_cap") = 500,
        py::arg("seed") = 1);
  m.def("export_label_correlation", [](model::ReLaNet& m) {
    const auto& inv = m.inventory();
    ad::Matrix intents = m.intent_embeddings();
    ad::Matrix slots = m.slot_embeddings();
    ad::Matrix all(intents.rows(), intents.cols() + slots.cols());
    all << intents, slots;
    std::vector<std::string> labels = inv.intent_labels;
    labels.insert(labels.end(), inv.slot_labels.begin(), inv.slot_labels.end());
    return evaluation::export_label_correlation(all, labels).dump();
  });
}
