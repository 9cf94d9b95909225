#include "relanet/training.hpp"

#include <cmath>
#include <numeric>

#include "relanet/errors.hpp"
#include "relanet/evaluation.hpp"
#include "relanet/rng.hpp"
#include "relanet/util.hpp"

namespace relanet::training {

namespace {

constexpr double kProbEps = 1e-12;

void check_steps(const std::vector<Var>& steps, const Matrix& gold, const char* what) {
  for (const auto& s : steps)
    if (s.value().rows() != gold.rows() || s.value().cols() != gold.cols())
      throw ComputeError(std::string(what) + ": step shape does not match the gold encoding");
}

}  // namespace

nlohmann::json LossBreakdown::to_json() const {
  return nlohmann::json{{"intent", intent},
                        {"slot", slot},
                        {"cst_intent", cst_intent},
                        {"cst_slot", cst_slot},
                        {"total", total}};
}

LossBreakdown combine_losses(double intent, double slot, double cst_intent, double cst_slot,
                             const model::ModelConfig& cfg) {
  LossBreakdown b;
  b.intent = intent;
  b.slot = slot;
  b.cst_intent = cst_intent;
  b.cst_slot = cst_slot;
  b.total = cfg.gamma_i * (intent + cfg.beta_i * cst_intent) +
            cfg.gamma_s * (slot + cfg.beta_s * cst_slot);
  return b;
}

Matrix intent_gold_matrix(const corpus::Sample& s, const corpus::LabelInventory& inv) {
  const int n = static_cast<int>(s.tokens.size());
  Matrix g = Matrix::Zero(inv.n_intents(), n);
  for (const auto& lbl : s.intents) {
    int id = inv.intent_id(lbl);
    if (id < 0) throw DataError("intent label not in the inventory: " + lbl);
    g.row(id).setOnes();
  }
  return g;
}

Matrix slot_gold_matrix(const corpus::Sample& s, const corpus::LabelInventory& inv) {
  if (s.slots.size() != s.tokens.size())
    throw DataError("sample has mismatched token and tag counts");
  const int n = static_cast<int>(s.tokens.size());
  Matrix g = Matrix::Zero(inv.n_slots(), n);
  for (int i = 0; i < n; ++i) {
    int id = inv.slot_id(s.slots[i]);
    if (id < 0) throw DataError("slot label not in the inventory: " + s.slots[i]);
    g(id, i) = 1.0;
  }
  return g;
}

Var intent_loss(Tape& t, const std::vector<Var>& step_probs, const Matrix& gold) {
  check_steps(step_probs, gold, "intent_loss");
  Var pos_mask = t.constant(gold);
  Var neg_mask = t.constant(Matrix(Matrix::Ones(gold.rows(), gold.cols()) - gold));
  Var ones = t.constant(Matrix::Ones(gold.rows(), gold.cols()));
  Var loss = t.zeros(1, 1);
  for (const auto& probs : step_probs) {
    Var on = t.cmul(pos_mask, t.log(t.clamp_min(probs, kProbEps)));
    Var off = t.cmul(neg_mask, t.log(t.clamp_min(t.sub(ones, probs), kProbEps)));
    loss = t.sub(loss, t.sum_all(t.add(on, off)));
  }
  return loss;
}

Var slot_loss(Tape& t, const std::vector<Var>& step_dists, const Matrix& gold_onehot) {
  check_steps(step_dists, gold_onehot, "slot_loss");
  Var mask = t.constant(gold_onehot);
  Var loss = t.zeros(1, 1);
  for (const auto& dist : step_dists)
    loss = t.sub(loss, t.sum_all(t.cmul(mask, t.log(t.clamp_min(dist, kProbEps)))));
  return loss;
}

Var constraint_loss(Tape& t, const std::vector<Var>& step_probs, const Matrix& gold_mask) {
  check_steps(step_probs, gold_mask, "constraint_loss");
  Var mask = t.constant(gold_mask);
  Var loss = t.zeros(1, 1);
  for (std::size_t k = 1; k < step_probs.size(); ++k) {
    Var drop = t.relu(t.sub(step_probs[k - 1], step_probs[k]));
    loss = t.add(loss, t.sum_all(t.cmul(mask, drop)));
  }
  return loss;
}

LossVars sample_loss(Tape& t, const model::ModelConfig& cfg, const model::ForwardResult& fwd,
                     const Matrix& gold_intents, const Matrix& gold_slots) {
  LossVars lv;
  lv.intent = intent_loss(t, fwd.intent_probs, gold_intents);
  lv.slot = slot_loss(t, fwd.slot_dists, gold_slots);
  lv.cst_intent = constraint_loss(t, fwd.intent_probs, gold_intents);
  lv.cst_slot = constraint_loss(t, fwd.slot_dists, gold_slots);
  Var intent_part = t.add(lv.intent, t.scale(lv.cst_intent, cfg.beta_i));
  Var slot_part = t.add(lv.slot, t.scale(lv.cst_slot, cfg.beta_s));
  lv.total = t.add(t.scale(intent_part, cfg.gamma_i), t.scale(slot_part, cfg.gamma_s));
  return lv;
}

AdamOptimizer::AdamOptimizer(ad::ParamCollection& pc, double lr, double beta1, double beta2,
                             double eps)
    : pc_(pc), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr < 0.0) throw ConfigError("learning rate must be nonnegative");
  for (std::size_t i = 0; i < pc_.size(); ++i) {
    m_.push_back(Matrix::Zero(pc_.at(i).value.rows(), pc_.at(i).value.cols()));
    v_.push_back(m_.back());
  }
}

void AdamOptimizer::step(double grad_clip) {
  if (m_.size() != pc_.size())
    throw ComputeError("optimizer state does not match the parameter set");
  double factor = 1.0;
  if (grad_clip > 0.0) {
    double norm = std::sqrt(pc_.grad_sq_norm());
    if (norm > grad_clip) factor = grad_clip / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < pc_.size(); ++i) {
    auto& p = pc_.at(i);
    Matrix g = factor * p.grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix m_hat = m_[i] / c1;
    Matrix v_hat = v_[i] / c2;
    p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
  pc_.zero_grads();
}

TrainReport train(model::ReLaNet& m, const corpus::Dataset& train_data,
                  const corpus::Dataset& dev_data, const TrainOptions& opts, std::uint64_t seed) {
  if (train_data.samples.empty()) throw DataError("training split is empty");
  if (dev_data.samples.empty()) throw DataError("dev split is empty");
  if (opts.epochs < 1) throw ConfigError("epoch count must be >= 1");
  if (opts.batch_size < 1) throw ConfigError("batch size must be >= 1");

  const auto& inv = m.inventory();
  const int n = static_cast<int>(train_data.samples.size());
  std::vector<Matrix> gold_i, gold_s;
  gold_i.reserve(n);
  gold_s.reserve(n);
  for (const auto& s : train_data.samples) {
    gold_i.push_back(intent_gold_matrix(s, inv));
    gold_s.push_back(slot_gold_matrix(s, inv));
  }

  AdamOptimizer opt(m.params(), opts.lr);
  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainReport rep;
  std::string log;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    rng.shuffle(order);
    double sum_i = 0.0, sum_s = 0.0, sum_ci = 0.0, sum_cs = 0.0;
    for (int start = 0; start < n; start += opts.batch_size) {
      const int stop = std::min(n, start + opts.batch_size);
      Tape t;
      Var batch_total = t.zeros(1, 1);
      for (int k = start; k < stop; ++k) {
        const int idx = order[k];
        auto fwd = m.forward(t, train_data.samples[idx]);
        LossVars lv = sample_loss(t, m.config(), fwd, gold_i[idx], gold_s[idx]);
        batch_total = t.add(batch_total, lv.total);
        sum_i += lv.intent.value()(0, 0);
        sum_s += lv.slot.value()(0, 0);
        sum_ci += lv.cst_intent.value()(0, 0);
        sum_cs += lv.cst_slot.value()(0, 0);
      }
      const double batch_value = batch_total.value()(0, 0);
      if (!std::isfinite(batch_value))
        throw ComputeError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch starting at sample " +
                           std::to_string(start));
      t.backward(batch_total);
      opt.step(opts.grad_clip);
    }

    EpochStats es;
    es.epoch = epoch;
    es.loss = combine_losses(sum_i, sum_s, sum_ci, sum_cs, m.config());
    auto dev = evaluation::evaluate(m, dev_data);
    es.dev_intent_acc = dev.intent_acc;
    es.dev_slot_f1 = dev.slot_f1;
    es.dev_overall_acc = dev.overall_acc;
    rep.epochs.push_back(es);

    if (es.dev_overall_acc > rep.best_dev_overall) {
      rep.best_dev_overall = es.dev_overall_acc;
      rep.best_epoch = epoch;
      rep.best_checkpoint = m.to_checkpoint();
    }

    log += nlohmann::json{{"epoch", epoch},
                          {"loss", es.loss.to_json()},
                          {"dev",
                           {{"intent_acc", es.dev_intent_acc},
                            {"slot_f1", es.dev_slot_f1},
                            {"overall_acc", es.dev_overall_acc}}}}
               .dump() +
           "\n";
    if (opts.target_dev_overall > 0.0 && es.dev_overall_acc >= opts.target_dev_overall) break;
  }

  if (rep.best_epoch > 0) m.params().load_json(rep.best_checkpoint.at("params"));
  rep.log_text = log;
  if (!opts.log_path.empty()) write_file(opts.log_path, log);
  if (!opts.checkpoint_path.empty() && rep.best_epoch > 0) {
    write_file(opts.checkpoint_path, rep.best_checkpoint.dump() + "\n");
    rep.checkpoint_path = opts.checkpoint_path;
  }
  return rep;
}

}  // namespace relanet::training
