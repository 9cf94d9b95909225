#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "relanet/corpus.hpp"
#include "relanet/hlg.hpp"
#include "relanet/model.hpp"
#include "relanet/training.hpp"

namespace relanet::evaluation {

using ad::Matrix;

struct MetricsReport {
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double overall_acc = 0.0;
  long n_utterances = 0;
  long n_gold_spans = 0;
  long n_pred_spans = 0;
  long n_matched_spans = 0;

  nlohmann::json to_json() const;
};

struct SamplePrediction {
  std::vector<std::string> intents;
  std::vector<std::string> slots;
};

// Fraction of utterances whose predicted intent set equals the gold set.
double intent_accuracy(const std::vector<std::vector<std::string>>& preds,
                       const std::vector<std::vector<std::string>>& golds);

struct Span {
  int start = 0;  // token index
  int end = 0;    // exclusive
  std::string type;

  bool operator==(const Span&) const = default;
};

// BIO segmentation with the lenient convention: an I- tag without an open
// span of the same type starts a new span.
std::vector<Span> extract_spans(const std::vector<std::string>& tags);

// Span-level micro F1 over the corpus; 1.0 when neither side has any span.
double slot_f1(const std::vector<std::vector<std::string>>& preds,
               const std::vector<std::vector<std::string>>& golds);

// Fraction of utterances with both the intent set and the full tag sequence
// exactly right.
double overall_accuracy(const std::vector<SamplePrediction>& preds, const corpus::Dataset& golds);

MetricsReport compute_metrics(const std::vector<SamplePrediction>& preds,
                              const corpus::Dataset& golds);

// Runs the model over the dataset and scores the final-step predictions.
MetricsReport evaluate(model::ReLaNet& m, const corpus::Dataset& data);

extern const std::vector<std::string> kVariants;

// Maps a variant name onto the one config change it stands for.
model::ModelConfig apply_variant(model::ModelConfig base, const std::string& variant);

// Builds the graph from the train split, trains one model under the variant
// and scores it on the test split.
MetricsReport run_ablation(const std::string& variant, const corpus::Dataset& train,
                           const corpus::Dataset& dev, const corpus::Dataset& test,
                           const model::ModelConfig& base, const training::TrainOptions& opts,
                           std::uint64_t seed);

// P(j|i) over the statistical universe; row i, column j.
nlohmann::json export_cooccurrence(const hlg::CooccurrenceStats& stats);

// Pairwise cosine similarity of label embeddings (one label per column).
// Zero-norm columns are listed separately and their entries set to 0.
nlohmann::json export_label_correlation(const Matrix& embeddings,
                                        const std::vector<std::string>& labels);

// One record per kept token: token, gold tag, predicted tag, final-step slot
// hidden vector. Keeps tokens whose gold tag is among the top_k most frequent
// non-O tags, plus at most o_cap seed-sampled O tokens.
nlohmann::json export_hidden_states(model::ReLaNet& m, const corpus::Dataset& data, int top_k,
                                    int o_cap, std::uint64_t seed);

}  // namespace relanet::evaluation
