#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "relanet/autodiff.hpp"
#include "relanet/corpus.hpp"
#include "relanet/model.hpp"

namespace relanet::training {

using ad::Matrix;
using ad::Tape;
using ad::Var;

struct LossBreakdown {
  double intent = 0.0;
  double slot = 0.0;
  double cst_intent = 0.0;
  double cst_slot = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

// total = gamma_i * (intent + beta_i * cst_intent) + gamma_s * (slot + beta_s * cst_slot)
LossBreakdown combine_losses(double intent, double slot, double cst_intent, double cst_slot,
                             const model::ModelConfig& cfg);

// Gold encodings against the frozen inventory; unknown labels are data errors.
Matrix intent_gold_matrix(const corpus::Sample& s, const corpus::LabelInventory& inv);
Matrix slot_gold_matrix(const corpus::Sample& s, const corpus::LabelInventory& inv);

// Binary cross-entropy summed over steps, tokens and intent labels.
Var intent_loss(Tape& t, const std::vector<Var>& step_probs, const Matrix& gold);
// Negative log-likelihood of the gold tag, summed over steps and tokens.
Var slot_loss(Tape& t, const std::vector<Var>& step_dists, const Matrix& gold_onehot);
// Hinge on gold-label probability drops between consecutive steps.
Var constraint_loss(Tape& t, const std::vector<Var>& step_probs, const Matrix& gold_mask);

struct LossVars {
  Var intent;
  Var slot;
  Var cst_intent;
  Var cst_slot;
  Var total;
};

LossVars sample_loss(Tape& t, const model::ModelConfig& cfg, const model::ForwardResult& fwd,
                     const Matrix& gold_intents, const Matrix& gold_slots);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(ad::ParamCollection& pc, double lr = 1e-3, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);

  // consumes the accumulated gradients; optional pre-clipping by global norm
  void step(double grad_clip = 0.0);
  long iterations() const { return t_; }

 private:
  ad::ParamCollection& pc_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

struct TrainOptions {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double grad_clip = 0.0;            // 0 disables clipping
  double target_dev_overall = -1.0;  // >0 stops once dev overall accuracy reaches it
  std::string log_path;              // JSONL epoch log; empty disables
  std::string checkpoint_path;       // best-dev checkpoint; empty disables
};

struct EpochStats {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
  double dev_intent_acc = 0.0;
  double dev_slot_f1 = 0.0;
  double dev_overall_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 1-based; -1 when no epoch ran
  double best_dev_overall = -1.0;
  nlohmann::json best_checkpoint;
  std::string checkpoint_path;
  std::string log_text;  // full JSONL log, also written to log_path when set
};

// Adam training with per-epoch dev evaluation; the model is left holding the
// best-dev parameters. Throws ComputeError when the loss turns non-finite.
TrainReport train(model::ReLaNet& m, const corpus::Dataset& train_data,
                  const corpus::Dataset& dev_data, const TrainOptions& opts, std::uint64_t seed);

using ad::GradCheckReport;
using ad::gradient_check;

}  // namespace relanet::training
