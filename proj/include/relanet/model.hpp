#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "relanet/autodiff.hpp"
#include "relanet/corpus.hpp"
#include "relanet/hlg.hpp"
#include "relanet/layers.hpp"

namespace relanet::model {

using ad::Matrix;
using ad::Tape;
using ad::Var;

struct ModelConfig {
  int word_emb_dim = 128;
  int label_dim = 128;   // d, shared by label embeddings and knowledge vectors
  int hidden_dim = 200;  // per-direction recurrent width
  int attn_dim = 64;     // self-attention query/key width
  int attn_out_dim = 128;
  int gnn_layers = 2;  // L, shared by the label-graph transformer and both GATs
  int steps = 2;       // T
  int window = 2;      // w, token window of the slot-side local GAT
  int gat_heads = 4;
  double lambda1 = 0.4;
  double lambda2 = 0.9;
  double intent_threshold = 0.5;
  double gamma_i = 0.1;
  double gamma_s = 0.9;
  double beta_i = 0.01;
  double beta_s = 1.0;
  bool no_matching = false;
  bool no_gats = false;
  bool no_dm_hlgt = false;
  hlg::GraphAblation graph_ablation = hlg::GraphAblation::none;

  int encoder_dim() const { return 2 * hidden_dim + attn_out_dim; }
  void validate() const;  // throws ConfigError on out-of-range fields
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct DecoderParams {
  ad::Param* w1 = nullptr;  // d x in
  ad::Param* b1 = nullptr;  // d x 1
  ad::Param* w2 = nullptr;  // d x d
  ad::Param* b2 = nullptr;  // d x 1
};

struct LinearHeadParams {
  ad::Param* w = nullptr;  // n_labels x in
  ad::Param* b = nullptr;  // n_labels x 1
};

// score(j, i) = e_j . (W2 LeakyReLU(W1 h_i + b1) + b2)
Var matching_scores(Tape& t, Var hidden, Var label_embs, const DecoderParams& p,
                    double neg_slope = 0.01);

// Sentence intents by token voting: a label wins with >= ceil(n/2) token votes
// (per-token vote: prob strictly above the threshold). If nothing wins, the
// single label with the highest mean probability is emitted. Returns sorted ids.
std::vector<int> vote_intents(const Matrix& probs, double threshold);
std::vector<int> argmax_slots(const Matrix& dists);

struct StepTrace {
  std::vector<std::string> intents;  // sentence intent set, inventory order
  std::vector<std::string> slots;    // one tag per token
  Matrix intent_probs;               // n_intents x n_tokens
  Matrix slot_dists;                 // n_slots x n_tokens
};

struct Prediction {
  std::vector<std::string> intents;
  std::vector<std::string> slots;
  std::vector<StepTrace> steps;  // exactly T entries; the last one is final
};

struct ForwardResult {
  Prediction pred;
  std::vector<Var> intent_probs;  // per step, n_intents x n_tokens
  std::vector<Var> slot_dists;    // per step, n_slots x n_tokens
  Var intent_hidden;              // final-step intent stream, 2*hidden x n_tokens
  Var slot_hidden;                // final-step slot stream, 2*hidden x n_tokens
};

class ReLaNet {
 public:
  ReLaNet(ModelConfig cfg, corpus::LabelInventory inv, corpus::Vocabulary vocab,
          hlg::HeterogeneousLabelGraph graph, std::uint64_t seed);

  // layer structs hold pointers into pc_; moving a deque keeps element
  // addresses, copying would alias the source's parameters
  ReLaNet(const ReLaNet&) = delete;
  ReLaNet& operator=(const ReLaNet&) = delete;
  ReLaNet(ReLaNet&&) = default;
  ReLaNet& operator=(ReLaNet&&) = default;

  const ModelConfig& config() const { return cfg_; }
  const corpus::LabelInventory& inventory() const { return inv_; }
  const corpus::Vocabulary& vocabulary() const { return vocab_; }
  const hlg::HeterogeneousLabelGraph& graph() const { return graph_; }
  ad::ParamCollection& params() { return pc_; }
  const ad::ParamCollection& params() const { return pc_; }

  // label embeddings after the initial graph pass, taken from a fresh tape
  Matrix intent_embeddings();
  Matrix slot_embeddings();

  ForwardResult forward(Tape& t, const corpus::Sample& sample, bool keep_trace = false);
  Prediction predict(const corpus::Sample& sample, bool keep_trace = false);

  nlohmann::json to_checkpoint() const;
  // the supplied graph must carry the fingerprint of the checkpointed inventory
  static ReLaNet from_checkpoint(const nlohmann::json& doc,
                                 const hlg::HeterogeneousLabelGraph& graph);

 private:
  struct LabelState {
    Var full;      // d x n_nodes, current step embeddings over every graph node
    Var intents;   // d x n_intents
    Var slots;     // d x n_slots
  };

  LabelState initial_embeddings(Tape& t);
  LabelState refresh_embeddings(Tape& t, const LabelState& prev,
                                const std::vector<int>& intent_ids,
                                const std::vector<int>& slot_ids);
  Var encode(Tape& t, const corpus::Sample& sample);

  ModelConfig cfg_;
  corpus::LabelInventory inv_;
  corpus::Vocabulary vocab_;
  hlg::HeterogeneousLabelGraph graph_;
  ad::ParamCollection pc_;

  ad::Param* word_emb_ = nullptr;
  ad::Param* label_init_ = nullptr;
  layers::HlgtParams hlgt_;
  layers::HlgtParams dm_hlgt_;
  layers::EncoderParams enc_;
  layers::BiLstmParams intent_lstm_;
  layers::BiLstmParams slot_lstm_;
  layers::GatParams intent_gat_;
  layers::GatParams slot_gat_;
  DecoderParams intent_dec_;
  DecoderParams slot_dec_;
  LinearHeadParams intent_head_;
  LinearHeadParams slot_head_;
};

}  // namespace relanet::model
