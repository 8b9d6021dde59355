#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Graph records one forward pass. Every op appends a node holding its value
// and a closure that pushes the node's gradient into its inputs. Parameters
// are leaves whose gradient is accumulated into Parameter::grad, so several
// graphs (one per example of a batch) can contribute before an optimizer step.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "veracity/error.hpp"

namespace veracity::ag {

using Matrix = Eigen::MatrixXd;
using Mask = std::vector<bool>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  Graph() { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix m) { return push(std::move(m), nullptr); }

  Var param(Parameter& p) {
    return push(p.value, [&p](Graph& g, int self) { p.grad += g.nodes_[self].grad; });
  }

  // Read-only use of a parameter: no gradient is recorded.
  Var param(const Parameter& p) { return constant(p.value); }

  Var push(Matrix value, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // Gradient of node `id` as accumulated so far; allocated lazily.
  Matrix& grad(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

  // Backpropagates from a 1x1 node, scaled by `seed`.
  void backward(Var loss, double seed = 1.0) {
    if (loss.rows() != 1 || loss.cols() != 1) throw Error("backward() requires a scalar node");
    grad(loss.id)(0, 0) += seed;
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return graph->value(id); }

// --- linear algebra --------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Graph& g = *a.graph;
  return g.push(a.value() * b.value(), [a, b](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    g.grad(a.id).noalias() += dy * g.value(b.id).transpose();
    g.grad(b.id).noalias() += g.value(a.id).transpose() * dy;
  });
}

inline Var transpose(Var a) {
  return a.graph->push(a.value().transpose(), [a](Graph& g, int self) {
    g.grad(a.id) += g.grad(self).transpose();
  });
}

inline Var add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("add: shape mismatch");
  return a.graph->push(a.value() + b.value(), [a, b](Graph& g, int self) {
    g.grad(a.id) += g.grad(self);
    g.grad(b.id) += g.grad(self);
  });
}

// a (T x n) plus row vector b (1 x n) broadcast over rows.
inline Var add_row(Var a, Var b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw Error("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return a.graph->push(std::move(out), [a, b](Graph& g, int self) {
    g.grad(a.id) += g.grad(self);
    g.grad(b.id) += g.grad(self).colwise().sum();
  });
}

inline Var cwise_mul(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("cwise_mul: shape mismatch");
  return a.graph->push(a.value().cwiseProduct(b.value()), [a, b](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    g.grad(a.id) += dy.cwiseProduct(g.value(b.id));
    g.grad(b.id) += dy.cwiseProduct(g.value(a.id));
  });
}

inline Var scale(Var a, double s) {
  return a.graph->push(a.value() * s, [a, s](Graph& g, int self) { g.grad(a.id) += g.grad(self) * s; });
}

// --- elementwise nonlinearities --------------------------------------------

inline Var tanh(Var a) {
  Matrix y = a.value().array().tanh().matrix();
  return a.graph->push(std::move(y), [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.grad(a.id).array() += g.grad(self).array() * (1.0 - y.array().square());
  });
}

inline Var sigmoid(Var a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.graph->push(std::move(y), [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.grad(a.id).array() += g.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

inline Var relu(Var a) {
  return a.graph->push(a.value().cwiseMax(0.0), [a](Graph& g, int self) {
    g.grad(a.id).array() += (g.value(a.id).array() > 0.0).select(g.grad(self).array(), 0.0);
  });
}

// Exact (erf) GELU.
inline Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix y = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  return a.graph->push(std::move(y), [a](Graph& g, int self) {
    const Matrix d = g.value(a.id).unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
      const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
      return cdf + v * pdf;
    });
    g.grad(a.id).array() += g.grad(self).array() * d.array();
  });
}

// --- structural ops --------------------------------------------------------

inline Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  return a.graph->push(a.value().middleRows(begin, count), [a, begin, count](Graph& g, int self) {
    g.grad(a.id).middleRows(begin, count) += g.grad(self);
  });
}

inline Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  return a.graph->push(a.value().middleCols(begin, count), [a, begin, count](Graph& g, int self) {
    g.grad(a.id).middleCols(begin, count) += g.grad(self);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().graph->push(std::move(out), [parts](Graph& g, int self) {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      const Eigen::Index c = g.value(p.id).cols();
      g.grad(p.id) += g.grad(self).middleCols(at, c);
      at += c;
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return parts.front().graph->push(std::move(out), [parts](Graph& g, int self) {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      const Eigen::Index r = g.value(p.id).rows();
      g.grad(p.id) += g.grad(self).middleRows(at, r);
      at += r;
    }
  });
}

// Row i of the result is row indices[i] of a. Used for embedding lookup and
// for restricting a sequence to its unmasked positions.
inline Var gather_rows(Var a, std::vector<int> indices) {
  const Matrix& src = a.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= src.rows()) throw Error("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = src.row(indices[i]);
  }
  return a.graph->push(std::move(out), [a, indices = std::move(indices)](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& da = g.grad(a.id);
    for (std::size_t i = 0; i < indices.size(); ++i) da.row(indices[i]) += dy.row(static_cast<Eigen::Index>(i));
  });
}

// Zero rows added before and after.
inline Var pad_rows(Var a, Eigen::Index before, Eigen::Index after) {
  if (before == 0 && after == 0) return a;
  Matrix out = Matrix::Zero(a.rows() + before + after, a.cols());
  out.middleRows(before, a.rows()) = a.value();
  return a.graph->push(std::move(out), [a, before](Graph& g, int self) {
    g.grad(a.id) += g.grad(self).middleRows(before, g.value(a.id).rows());
  });
}

// Sliding windows of `width` consecutive rows flattened into one row each:
// (T x d) -> ((T - width + 1) x (width * d)).
inline Var unfold_rows(Var a, Eigen::Index width) {
  const Matrix& x = a.value();
  const Eigen::Index t = x.rows();
  const Eigen::Index d = x.cols();
  if (width < 1 || width > t) throw Error("unfold_rows: window wider than sequence");
  const Eigen::Index n = t - width + 1;
  Matrix out(n, width * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < width; ++j) out.block(i, j * d, 1, d) = x.row(i + j);
  }
  return a.graph->push(std::move(out), [a, width, n, d](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& dx = g.grad(a.id);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < width; ++j) dx.row(i + j) += dy.block(i, j * d, 1, d);
    }
  });
}

// Column-wise maximum over rows whose mask entry is true (an empty mask means
// all rows). Masked rows act as -inf. Gradient goes to the first maximising row.
inline Var max_over_time(Var a, const Mask& mask = {}) {
  const Matrix& x = a.value();
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != x.rows()) {
    throw Error("max_over_time: mask length mismatch");
  }
  Matrix out(1, x.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()), -1);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (!mask.empty() && !mask[static_cast<std::size_t>(r)]) continue;
      if (arg[static_cast<std::size_t>(c)] < 0 || x(r, c) > best) {
        best = x(r, c);
        arg[static_cast<std::size_t>(c)] = r;
      }
    }
    if (arg[static_cast<std::size_t>(c)] < 0) throw Error("max_over_time: no unmasked rows");
    out(0, c) = best;
  }
  return a.graph->push(std::move(out), [a, arg = std::move(arg)](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& dx = g.grad(a.id);
    for (std::size_t c = 0; c < arg.size(); ++c) {
      dx(arg[c], static_cast<Eigen::Index>(c)) += dy(0, static_cast<Eigen::Index>(c));
    }
  });
}

// --- normalisation and attention -------------------------------------------

// Row-wise softmax; columns with key_mask false get zero probability.
inline Var masked_softmax_rows(Var a, const Mask& key_mask = {}) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (key_mask.empty() || key_mask[static_cast<std::size_t>(c)]) mx = std::max(mx, x(r, c));
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const bool on = key_mask.empty() || key_mask[static_cast<std::size_t>(c)];
      y(r, c) = on ? std::exp(x(r, c) - mx) : 0.0;
      sum += y(r, c);
    }
    y.row(r) /= sum;
  }
  return a.graph->push(std::move(y), [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& dy = g.grad(self);
    const Eigen::VectorXd dot = (dy.cwiseProduct(y)).rowwise().sum();
    g.grad(a.id) += (y.array() * (dy.colwise() - dot).array()).matrix();
  });
}

// Per-row layer normalisation with learned gain and bias (both 1 x n).
inline Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-12) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);
  return a.graph->push(std::move(y), [a, gain, bias, xhat = std::move(xhat), inv_std](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    g.grad(bias.id) += dy.colwise().sum();
    g.grad(gain.id) += dy.cwiseProduct(xhat).colwise().sum();
    const Matrix dxhat = (dy.array().rowwise() * g.value(gain.id).row(0).array()).matrix();
    const double n = static_cast<double>(dxhat.cols());
    Matrix& dx = g.grad(a.id);
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
      const double m1 = dxhat.row(r).sum() / n;
      const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
      dx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
  });
}

// Inverted dropout. Identity when rate is 0 or rng is null (evaluation).
inline Var dropout(Var a, double rate, std::mt19937_64* rng) {
  if (rng == nullptr || rate <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  Matrix y = a.value().cwiseProduct(mask);
  return a.graph->push(std::move(y), [a, mask = std::move(mask)](Graph& g, int self) {
    g.grad(a.id) += g.grad(self).cwiseProduct(mask);
  });
}

// --- output ----------------------------------------------------------------

inline Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::RowVectorXd e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

// Negative log-likelihood of `gold` under softmax(logits); logits is 1 x K.
inline Var cross_entropy(Var logits, int gold) {
  const Eigen::RowVectorXd z = logits.value().row(0);
  if (gold < 0 || gold >= z.size()) throw Error("cross_entropy: gold class out of range");
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  Matrix loss(1, 1);
  loss(0, 0) = lse - z(gold);
  return logits.graph->push(std::move(loss), [logits, gold](Graph& g, int self) {
    Eigen::RowVectorXd p = softmax(g.value(logits.id).row(0));
    p(gold) -= 1.0;
    g.grad(logits.id).row(0) += g.grad(self)(0, 0) * p;
  });
}

}  // namespace veracity::ag
