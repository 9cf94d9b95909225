#include "relanet/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "relanet/errors.hpp"
#include "relanet/rng.hpp"

namespace relanet::ad {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json doc;
  doc["rows"] = m.rows();
  doc["cols"] = m.cols();
  auto data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  doc["data"] = std::move(data);
  return doc;
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  try {
    auto rows = doc.at("rows").get<Eigen::Index>();
    auto cols = doc.at("cols").get<Eigen::Index>();
    const auto& data = doc.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw DataError("matrix document has inconsistent shape");
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[k++].get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed matrix document: ") + e.what());
  }
}

Param& ParamCollection::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  if (rows < 1 || cols < 1) throw ConfigError("parameter " + name + " must have positive shape");
  index_.emplace(name, static_cast<int>(params_.size()));
  params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return params_.back();
}

Param& ParamCollection::add_uniform(const std::string& name, int rows, int cols, Rng& rng,
                                    double scale) {
  Param& p = add(name, rows, cols);
  for (Eigen::Index i = 0; i < p.value.rows(); ++i)
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = rng.uniform(-scale, scale);
  return p;
}

Param& ParamCollection::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

const Param& ParamCollection::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

void ParamCollection::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

double ParamCollection::grad_sq_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p.grad.squaredNorm();
  return s;
}

std::size_t ParamCollection::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

nlohmann::json ParamCollection::to_json() const {
  auto doc = nlohmann::json::array();
  for (const auto& p : params_)
    doc.push_back({{"name", p.name}, {"matrix", matrix_to_json(p.value)}});
  return doc;
}

void ParamCollection::load_json(const nlohmann::json& doc) {
  if (!doc.is_array() || doc.size() != params_.size())
    throw DataError("parameter document does not match the declared parameter set");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::string name;
    Matrix m;
    try {
      name = doc[i].at("name").get<std::string>();
      m = matrix_from_json(doc[i].at("matrix"));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed parameter document: ") + e.what());
    }
    if (name != params_[i].name)
      throw DataError("parameter order mismatch: expected " + params_[i].name + ", got " + name);
    if (m.rows() != params_[i].value.rows() || m.cols() != params_[i].value.cols())
      throw DataError("parameter shape mismatch for " + name);
    params_[i].value = std::move(m);
  }
}

const Matrix& Var::value() const { return tape->nodes_[id].value; }
const Matrix& Var::grad() const { return tape->grads_[id]; }

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, int)> back) {
  nodes_.push_back({std::move(value), std::move(back), needs_grad});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
    throw ComputeError(std::string(op) + ": shape mismatch (" + std::to_string(a.value().rows()) +
                       "x" + std::to_string(a.value().cols()) + " vs " +
                       std::to_string(b.value().rows()) + "x" + std::to_string(b.value().cols()) +
                       ")");
}

Var Tape::constant(Matrix v) { return push(std::move(v), false, nullptr); }

Var Tape::zeros(int rows, int cols) { return constant(Matrix::Zero(rows, cols)); }

Var Tape::param(Param& p) {
  Param* ptr = &p;
  return push(p.value, true, [ptr](Tape& t, int self) { ptr->grad += t.grad_ref(self); });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ia = a.id, ib = b.id;
  return push(a.value() + b.value(), ng, [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self);
    t.grad_ref(ib) += t.grad_ref(self);
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ia = a.id, ib = b.id;
  return push(a.value() - b.value(), ng, [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self);
    t.grad_ref(ib) -= t.grad_ref(self);
  });
}

Var Tape::cmul(Var a, Var b) {
  check_same_shape(a, b, "cmul");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ia = a.id, ib = b.id;
  return push(a.value().cwiseProduct(b.value()), ng, [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(t.value_of(ib));
    t.grad_ref(ib) += t.grad_ref(self).cwiseProduct(t.value_of(ia));
  });
}

Var Tape::scale(Var a, double c) {
  int ia = a.id;
  return push(a.value() * c, nodes_[a.id].needs_grad,
              [ia, c](Tape& t, int self) { t.grad_ref(ia) += t.grad_ref(self) * c; });
}

Var Tape::matmul(Var a, Var b) {
  if (a.value().cols() != b.value().rows())
    throw ComputeError("matmul: inner dimension mismatch (" + std::to_string(a.value().cols()) +
                       " vs " + std::to_string(b.value().rows()) + ")");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ia = a.id, ib = b.id;
  return push(a.value() * b.value(), ng, [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self) * t.value_of(ib).transpose();
    t.grad_ref(ib) += t.value_of(ia).transpose() * t.grad_ref(self);
  });
}

Var Tape::add_colvec(Var a, Var v) {
  if (v.value().cols() != 1 || v.value().rows() != a.value().rows())
    throw ComputeError("add_colvec: v must be a column vector matching a's rows");
  bool ng = nodes_[a.id].needs_grad || nodes_[v.id].needs_grad;
  int ia = a.id, iv = v.id;
  return push(a.value().colwise() + Eigen::VectorXd(v.value().col(0)), ng,
              [ia, iv](Tape& t, int self) {
                t.grad_ref(ia) += t.grad_ref(self);
                t.grad_ref(iv) += t.grad_ref(self).rowwise().sum();
              });
}

Var Tape::vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ComputeError("vstack: no parts");
  Eigen::Index cols = parts[0].value().cols(), rows = 0;
  bool ng = false;
  for (Var p : parts) {
    if (p.value().cols() != cols) throw ComputeError("vstack: column count mismatch");
    rows += p.value().rows();
    ng = ng || nodes_[p.id].needs_grad;
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<int, std::pair<Eigen::Index, Eigen::Index>>> spans;
  for (Var p : parts) {
    out.middleRows(at, p.value().rows()) = p.value();
    spans.push_back({p.id, {at, p.value().rows()}});
    at += p.value().rows();
  }
  return push(std::move(out), ng, [spans](Tape& t, int self) {
    for (const auto& [id, span] : spans)
      t.grad_ref(id) += t.grad_ref(self).middleRows(span.first, span.second);
  });
}

Var Tape::hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ComputeError("hstack: no parts");
  Eigen::Index rows = parts[0].value().rows(), cols = 0;
  bool ng = false;
  for (Var p : parts) {
    if (p.value().rows() != rows) throw ComputeError("hstack: row count mismatch");
    cols += p.value().cols();
    ng = ng || nodes_[p.id].needs_grad;
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<int, std::pair<Eigen::Index, Eigen::Index>>> spans;
  for (Var p : parts) {
    out.middleCols(at, p.value().cols()) = p.value();
    spans.push_back({p.id, {at, p.value().cols()}});
    at += p.value().cols();
  }
  return push(std::move(out), ng, [spans](Tape& t, int self) {
    for (const auto& [id, span] : spans)
      t.grad_ref(id) += t.grad_ref(self).middleCols(span.first, span.second);
  });
}

Var Tape::rows(Var a, int first, int count) {
  if (first < 0 || count < 1 || first + count > a.rows())
    throw ComputeError("rows: slice out of range");
  int ia = a.id;
  return push(a.value().middleRows(first, count), nodes_[a.id].needs_grad,
              [ia, first, count](Tape& t, int self) {
                t.grad_ref(ia).middleRows(first, count) += t.grad_ref(self);
              });
}

Var Tape::cols(Var a, int first, int count) {
  if (first < 0 || count < 1 || first + count > a.cols())
    throw ComputeError("cols: slice out of range");
  int ia = a.id;
  return push(a.value().middleCols(first, count), nodes_[a.id].needs_grad,
              [ia, first, count](Tape& t, int self) {
                t.grad_ref(ia).middleCols(first, count) += t.grad_ref(self);
              });
}

Var Tape::transpose(Var a) {
  int ia = a.id;
  return push(a.value().transpose(), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).transpose();
  });
}

Var Tape::gather_cols(Var a, const std::vector<int>& idx) {
  Matrix out(a.value().rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= a.cols()) throw ComputeError("gather_cols: index out of range");
    out.col(static_cast<Eigen::Index>(k)) = a.value().col(idx[k]);
  }
  int ia = a.id;
  return push(std::move(out), nodes_[a.id].needs_grad, [ia, idx](Tape& t, int self) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      t.grad_ref(ia).col(idx[k]) += t.grad_ref(self).col(static_cast<Eigen::Index>(k));
  });
}

Var Tape::repeat_cols(Var v, int n) {
  if (v.value().cols() != 1) throw ComputeError("repeat_cols: input must be a column vector");
  int iv = v.id;
  return push(v.value().replicate(1, n), nodes_[v.id].needs_grad, [iv](Tape& t, int self) {
    t.grad_ref(iv) += t.grad_ref(self).rowwise().sum();
  });
}

Var Tape::repeat_rows(Var v, int n) {
  if (v.value().rows() != 1) throw ComputeError("repeat_rows: input must be a row vector");
  int iv = v.id;
  return push(v.value().replicate(n, 1), nodes_[v.id].needs_grad, [iv](Tape& t, int self) {
    t.grad_ref(iv) += t.grad_ref(self).colwise().sum();
  });
}

Var Tape::sigmoid(Var a) {
  Matrix y = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    const Matrix& y = t.value_of(self);
    t.grad_ref(ia) +=
        t.grad_ref(self).cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y));
  });
}

Var Tape::tanh(Var a) {
  Matrix y = a.value().array().tanh();
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    const Matrix& y = t.value_of(self);
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(
        (Matrix::Ones(y.rows(), y.cols()) - y.cwiseProduct(y)));
  });
}

Var Tape::relu(Var a) {
  Matrix y = a.value().cwiseMax(0.0);
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    const Matrix& x = t.value_of(ia);
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(
        x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  });
}

Var Tape::leaky_relu(Var a, double slope) {
  Matrix y = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia, slope](Tape& t, int self) {
    const Matrix& x = t.value_of(ia);
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(
        x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
  });
}

Var Tape::softmax_cols(Var a) {
  Matrix y = a.value();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    Eigen::VectorXd col = y.col(j);
    double m = col.maxCoeff();
    // scalar exp so that heavily masked logits underflow to an exact zero
    col = col.unaryExpr([m](double v) { return std::exp(v - m); });
    y.col(j) = col / col.sum();
  }
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    const Matrix& y = t.value_of(self);
    const Matrix& g = t.grad_ref(self);
    Matrix yg = y.cwiseProduct(g);
    Eigen::RowVectorXd colsum = yg.colwise().sum();
    t.grad_ref(ia) += yg - y.cwiseProduct(colsum.replicate(y.rows(), 1));
  });
}

Var Tape::log(Var a) {
  Matrix y = a.value().array().log();
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).cwiseQuotient(t.value_of(ia));
  });
}

Var Tape::clamp_min(Var a, double lo) {
  Matrix y = a.value().cwiseMax(lo);
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia, lo](Tape& t, int self) {
    const Matrix& x = t.value_of(ia);
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(
        x.unaryExpr([lo](double v) { return v > lo ? 1.0 : 0.0; }));
  });
}

Var Tape::sum_all(Var a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    t.grad_ref(ia).array() += t.grad_ref(self)(0, 0);
  });
}

Var Tape::sum_cols(Var a) {
  Matrix y = a.value().rowwise().sum();
  int ia = a.id;
  return push(std::move(y), nodes_[a.id].needs_grad, [ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).replicate(1, t.value_of(ia).cols());
  });
}

GradCheckReport gradient_check(ParamCollection& pc,
                               const std::function<double(bool with_grad)>& loss_fn, double eps) {
  pc.zero_grads();
  loss_fn(true);
  GradCheckReport report;
  for (std::size_t k = 0; k < pc.size(); ++k) {
    Param& p = pc.at(k);
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        const double keep = p.value(i, j);
        p.value(i, j) = keep + eps;
        const double up = loss_fn(false);
        p.value(i, j) = keep - eps;
        const double down = loss_fn(false);
        p.value(i, j) = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double an = p.grad(i, j);
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-4});
        const double err = std::abs(fd - an) / scale;
        ++report.checked;
        if (err > report.max_rel_err) {
          report.max_rel_err = err;
          report.worst_param = p.name;
          report.worst_row = static_cast<int>(i);
          report.worst_col = static_cast<int>(j);
        }
      }
    }
  }
  return report;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ComputeError("backward: var belongs to another tape");
  if (root.value().rows() != 1 || root.value().cols() != 1)
    throw ComputeError("backward: root must be a scalar");
  grads_.clear();
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    grads_[i] = Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  grads_[root.id](0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back(*this, i);
  }
}

}  // namespace relanet::ad
