#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace relanet {
class Rng;
}

namespace relanet::ad {

using Matrix = Eigen::MatrixXd;

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc);

// A named trainable matrix with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Ordered, name-indexed parameter store. Creation order is part of the
// checkpoint and optimizer-state contract, so it must be deterministic.
class ParamCollection {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param& add_uniform(const std::string& name, int rows, int cols, Rng& rng, double scale);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Param& at(std::size_t i) { return params_[i]; }
  const Param& at(std::size_t i) const { return params_[i]; }

  void zero_grads();
  double grad_sq_norm() const;
  std::size_t total_values() const;

  nlohmann::json to_json() const;
  // Loads values into already-declared parameters; names and shapes must match.
  void load_json(const nlohmann::json& doc);

 private:
  std::deque<Param> params_;  // deque: stable addresses for tape bindings
  std::unordered_map<std::string, int> index_;
};

class Tape;

// Handle into a tape node. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  const Matrix& grad() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

// Eager reverse-mode tape over dense double matrices. Values are computed at
// op creation; backward() replays recorded closures in reverse order.
// Convention throughout the project: features along rows, positions (tokens,
// nodes) along columns.
class Tape {
 public:
  Var constant(Matrix v);
  Var zeros(int rows, int cols);
  Var param(Param& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  // adds column vector v (r x 1) to every column of a (r x c)
  Var add_colvec(Var a, Var v);
  Var affine(Var w, Var x, Var b) { return add_colvec(matmul(w, x), b); }

  Var vstack(const std::vector<Var>& parts);
  Var hstack(const std::vector<Var>& parts);
  Var rows(Var a, int first, int count);
  Var cols(Var a, int first, int count);
  Var transpose(Var a);
  // out = a(:, idx); repeated indices accumulate gradient
  Var gather_cols(Var a, const std::vector<int>& idx);
  // v is r x 1, result repeats it across n columns
  Var repeat_cols(Var v, int n);
  // v is 1 x c, result repeats it across n rows
  Var repeat_rows(Var v, int n);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var softmax_cols(Var a);
  Var log(Var a);
  Var clamp_min(Var a, double lo);

  Var sum_all(Var a);   // 1 x 1
  Var sum_cols(Var a);  // r x 1, sums across columns

  // Backpropagates from a 1x1 root; parameter gradients accumulate into the
  // bound Param::grad matrices.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value_of(int id) const { return nodes_[id].value; }

 private:
  friend struct Var;
  struct Node {
    Matrix value;
    std::function<void(Tape&, int)> back;  // (tape, own id)
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, int)> back);
  Matrix& grad_ref(int id) { return grads_[id]; }
  void check_same_shape(Var a, Var b, const char* op) const;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  int worst_row = -1;
  int worst_col = -1;
};

// Central finite differences over every entry of every parameter. loss_fn
// evaluates the objective at the collection's current values; when with_grad
// is set it must also backpropagate into the collection's gradients. Only
// meant for small instances.
GradCheckReport gradient_check(ParamCollection& pc,
                               const std::function<double(bool with_grad)>& loss_fn,
                               double eps = 1e-5);

}  // namespace relanet::ad
