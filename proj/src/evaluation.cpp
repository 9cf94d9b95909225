#include "relanet/evaluation.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "relanet/errors.hpp"
#include "relanet/rng.hpp"

namespace relanet::evaluation {

namespace {

std::vector<std::string> normalized_set(const std::vector<std::string>& labels) {
  std::vector<std::string> out = labels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  return nlohmann::json{{"intent_acc", intent_acc},
                        {"slot_f1", slot_f1},
                        {"overall_acc", overall_acc},
                        {"utterances", n_utterances},
                        {"gold_spans", n_gold_spans},
                        {"pred_spans", n_pred_spans},
                        {"matched_spans", n_matched_spans}};
}

double intent_accuracy(const std::vector<std::vector<std::string>>& preds,
                       const std::vector<std::vector<std::string>>& golds) {
  if (preds.size() != golds.size())
    throw DataError("intent_accuracy: prediction and gold counts differ");
  if (preds.empty()) return 1.0;
  long hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (normalized_set(preds[i]) == normalized_set(golds[i])) ++hit;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> out;
  int open_start = -1;
  std::string open_type;
  auto close = [&](int end) {
    if (open_start >= 0) out.push_back({open_start, end, open_type});
    open_start = -1;
    open_type.clear();
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[i];
    if (tag.rfind("B-", 0) == 0) {
      close(i);
      open_start = i;
      open_type = tag.substr(2);
    } else if (tag.rfind("I-", 0) == 0) {
      std::string type = tag.substr(2);
      if (open_start < 0 || open_type != type) {
        // orphan continuation opens its own span
        close(i);
        open_start = i;
        open_type = std::move(type);
      }
    } else {
      close(i);
    }
  }
  close(static_cast<int>(tags.size()));
  return out;
}

double slot_f1(const std::vector<std::vector<std::string>>& preds,
               const std::vector<std::vector<std::string>>& golds) {
  if (preds.size() != golds.size()) throw DataError("slot_f1: prediction and gold counts differ");
  long n_gold = 0, n_pred = 0, n_match = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != golds[i].size())
      throw DataError("slot_f1: tag sequence length mismatch in sample " + std::to_string(i));
    auto ps = extract_spans(preds[i]);
    auto gs = extract_spans(golds[i]);
    n_pred += static_cast<long>(ps.size());
    n_gold += static_cast<long>(gs.size());
    for (const auto& sp : ps)
      if (std::find(gs.begin(), gs.end(), sp) != gs.end()) ++n_match;
  }
  if (n_gold == 0 && n_pred == 0) return 1.0;
  if (n_match == 0) return 0.0;
  double p = static_cast<double>(n_match) / static_cast<double>(n_pred);
  double r = static_cast<double>(n_match) / static_cast<double>(n_gold);
  return 2.0 * p * r / (p + r);
}

double overall_accuracy(const std::vector<SamplePrediction>& preds, const corpus::Dataset& golds) {
  if (preds.size() != golds.samples.size())
    throw DataError("overall_accuracy: prediction and gold counts differ");
  if (preds.empty()) return 1.0;
  long hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& g = golds.samples[i];
    if (preds[i].slots.size() != g.slots.size())
      throw DataError("overall_accuracy: tag sequence length mismatch in sample " +
                      std::to_string(i));
    if (normalized_set(preds[i].intents) == normalized_set(g.intents) &&
        preds[i].slots == g.slots)
      ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

MetricsReport compute_metrics(const std::vector<SamplePrediction>& preds,
                              const corpus::Dataset& golds) {
  MetricsReport r;
  r.n_utterances = static_cast<long>(golds.samples.size());
  std::vector<std::vector<std::string>> pi, gi, ps, gs;
  for (const auto& p : preds) {
    pi.push_back(p.intents);
    ps.push_back(p.slots);
  }
  for (const auto& g : golds.samples) {
    gi.push_back(g.intents);
    gs.push_back(g.slots);
  }
  r.intent_acc = intent_accuracy(pi, gi);
  r.slot_f1 = slot_f1(ps, gs);
  r.overall_acc = overall_accuracy(preds, golds);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto pspans = extract_spans(ps[i]);
    auto gspans = extract_spans(gs[i]);
    r.n_pred_spans += static_cast<long>(pspans.size());
    r.n_gold_spans += static_cast<long>(gspans.size());
    for (const auto& sp : pspans)
      if (std::find(gspans.begin(), gspans.end(), sp) != gspans.end()) ++r.n_matched_spans;
  }
  return r;
}

MetricsReport evaluate(model::ReLaNet& m, const corpus::Dataset& data) {
  std::vector<SamplePrediction> preds;
  preds.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    auto p = m.predict(s);
    preds.push_back({std::move(p.intents), std::move(p.slots)});
  }
  return compute_metrics(preds, data);
}

const std::vector<std::string> kVariants = {"full",        "no_stat_dep", "no_hierarchy",
                                            "no_relation", "no_matching", "no_gats",
                                            "no_dm_hlgt"};

model::ModelConfig apply_variant(model::ModelConfig base, const std::string& variant) {
  base.graph_ablation = hlg::GraphAblation::none;
  base.no_matching = false;
  base.no_gats = false;
  base.no_dm_hlgt = false;
  if (variant == "full") return base;
  if (variant == "no_stat_dep") {
    base.graph_ablation = hlg::GraphAblation::no_stat_dep;
    return base;
  }
  if (variant == "no_hierarchy") {
    base.graph_ablation = hlg::GraphAblation::no_hierarchy;
    return base;
  }
  if (variant == "no_relation") {
    base.graph_ablation = hlg::GraphAblation::no_relation;
    return base;
  }
  if (variant == "no_matching") {
    base.no_matching = true;
    return base;
  }
  if (variant == "no_gats") {
    base.no_gats = true;
    return base;
  }
  if (variant == "no_dm_hlgt") {
    base.no_dm_hlgt = true;
    return base;
  }
  throw ConfigError("unknown ablation variant: " + variant);
}

MetricsReport run_ablation(const std::string& variant, const corpus::Dataset& train,
                           const corpus::Dataset& dev, const corpus::Dataset& test,
                           const model::ModelConfig& base, const training::TrainOptions& opts,
                           std::uint64_t seed) {
  model::ModelConfig cfg = apply_variant(base, variant);
  auto inv = corpus::build_inventory(train);
  auto vocab = corpus::build_vocabulary(train);
  auto stats = hlg::compute_stats(train, inv);
  auto graph = hlg::build_hlg(stats, inv, cfg.lambda1, cfg.lambda2);
  model::ReLaNet m(cfg, inv, vocab, graph, seed);
  training::train(m, train, dev, opts, seed ^ 0x9e3779b97f4a7c15ULL);
  return evaluate(m, test);
}

nlohmann::json export_cooccurrence(const hlg::CooccurrenceStats& stats) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& e : stats.universe) labels.push_back(e.label);
  nlohmann::json matrix = nlohmann::json::array();
  for (int i = 0; i < stats.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < stats.size(); ++j) row.push_back(hlg::conditional_probability(stats, i, j));
    matrix.push_back(std::move(row));
  }
  return nlohmann::json{{"labels", labels}, {"matrix", matrix}};
}

nlohmann::json export_label_correlation(const Matrix& embeddings,
                                        const std::vector<std::string>& labels) {
  if (static_cast<int>(labels.size()) != embeddings.cols())
    throw DataError("label correlation export: label count does not match embedding columns");
  const int n = embeddings.cols() > 0 ? static_cast<int>(embeddings.cols()) : 0;
  std::vector<double> norms(n);
  nlohmann::json zero_norm = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    norms[i] = embeddings.col(i).norm();
    if (norms[i] == 0.0) zero_norm.push_back(labels[i]);
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0)
        v = embeddings.col(i).dot(embeddings.col(j)) / (norms[i] * norms[j]);
      row.push_back(v);
    }
    matrix.push_back(std::move(row));
  }
  return nlohmann::json{
      {"labels", labels}, {"matrix", matrix}, {"zero_norm_labels", zero_norm}};
}

nlohmann::json export_hidden_states(model::ReLaNet& m, const corpus::Dataset& data, int top_k,
                                    int o_cap, std::uint64_t seed) {
  if (top_k < 0 || o_cap < 0) throw ConfigError("hidden-state export limits must be nonnegative");

  std::map<std::string, long> tag_counts;
  long n_o = 0;
  for (const auto& s : data.samples)
    for (const auto& tag : s.slots) {
      if (tag == "O") ++n_o;
      else ++tag_counts[tag];
    }

  std::vector<std::pair<std::string, long>> ranked(tag_counts.begin(), tag_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> kept_tags;
  for (int i = 0; i < std::min<int>(top_k, static_cast<int>(ranked.size())); ++i)
    kept_tags.insert(ranked[i].first);

  // seed-deterministic O subsample, kept in corpus order
  std::set<long> kept_o;
  if (n_o <= o_cap) {
    for (long i = 0; i < n_o; ++i) kept_o.insert(i);
  } else {
    std::vector<long> idx(n_o);
    for (long i = 0; i < n_o; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    kept_o.insert(idx.begin(), idx.begin() + o_cap);
  }

  nlohmann::json rows = nlohmann::json::array();
  long o_seen = 0;
  for (const auto& s : data.samples) {
    ad::Tape t;
    auto fwd = m.forward(t, s);
    const Matrix& hidden = fwd.slot_hidden.value();
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const std::string& gold = s.slots[i];
      bool keep;
      if (gold == "O") keep = kept_o.count(o_seen++) > 0;
      else keep = kept_tags.count(gold) > 0;
      if (!keep) continue;
      nlohmann::json vec = nlohmann::json::array();
      for (int r = 0; r < hidden.rows(); ++r) vec.push_back(hidden(r, static_cast<int>(i)));
      rows.push_back(nlohmann::json{{"token", s.tokens[i]},
                                    {"gold", gold},
                                    {"predicted", fwd.pred.slots[i]},
                                    {"vector", vec}});
    }
  }
  return nlohmann::json{{"task", "slot"}, {"rows", rows}};
}

}  // namespace relanet::evaluation
