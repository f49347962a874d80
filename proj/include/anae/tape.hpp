#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anae/graph.hpp"
#include "anae/rng.hpp"

namespace anae {

/// A named trainable matrix. `grad` always matches `value` in shape; the tape
/// accumulates into it during backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a matrix recorded on a Tape (a "tape tensor"). Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records forward ops in order and replays their local gradient rules in
/// reverse. One backward per tape.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix v) { return push(std::move(v), false, nullptr, nullptr); }

  Var parameter(Parameter& p) { return push(p.value, true, nullptr, &p); }

  // Output requires grad iff any input does; `fn` runs only in that case.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
    if (!value.allFinite()) throw NumericalError("non-finite value produced on tape");
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr, nullptr);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient flowing into node `id` (empty when nothing reached it).
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }

  template <typename Expr>
  void accumulate(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Reverse sweep from a 1x1 loss. Parameter grads are accumulated into the
  /// bound Parameter objects; unreachable parameters keep their (zeroed) grad.
  void backward(Var loss) {
    if (backward_done_) throw std::logic_error("backward already ran on this tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw DimensionError("backward needs a scalar loss");
    backward_done_ = true;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Matrix v, bool needs, BackwardFn fn, Parameter* p) {
    nodes_.push_back(Node{std::move(v), Matrix(), needs, std::move(fn), p});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

/// C = A B.
inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
  Tape& t = a.tape();
  std::size_t ia = a.id(), ib = b.id();
  Matrix c = a.value() * b.value();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// C = A Bᵀ; the usual `h Wᵀ` with W stored as out x in.
inline Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
  Tape& t = a.tape();
  std::size_t ia = a.id(), ib = b.id();
  Matrix c = a.value() * b.value().transpose();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

inline Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = a.tape();
  std::size_t ia = a.id(), ib = b.id();
  Matrix c = a.value() + b.value();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

inline Var scale(Var a, double s) {
  Tape& t = a.tape();
  std::size_t ia = a.id();
  Matrix c = a.value() * s;
  return t.record(std::move(c), {a}, [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self) * s); });
}

// Subgradient at 0 takes the positive branch.
inline Var leaky_relu(Var x, double slope) {
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix y = x.value().unaryExpr([slope](double v) { return v >= 0 ? v : slope * v; });
  return t.record(std::move(y), {x}, [ix, slope](Tape& t, std::size_t self) {
    Matrix d = t.value(ix).unaryExpr([slope](double v) { return v >= 0 ? 1.0 : slope; });
    t.accumulate(ix, t.grad(self).cwiseProduct(d));
  });
}

inline Var elu(Var x) {
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix y = x.value().unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
  return t.record(std::move(y), {x}, [ix](Tape& t, std::size_t self) {
    Matrix d = t.value(ix).unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); });
    t.accumulate(ix, t.grad(self).cwiseProduct(d));
  });
}

/// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
/// Identity when not training or p == 0.
inline Var dropout(Var x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Tape& t = x.tape();
  std::size_t ix = x.id();
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix y = x.value().cwiseProduct(mask);
  return t.record(std::move(y), {x}, [ix, mask = std::move(mask)](Tape& t, std::size_t self) {
    t.accumulate(ix, t.grad(self).cwiseProduct(mask));
  });
}

inline Var sum(Var x) {
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix s(1, 1);
  s(0, 0) = x.value().sum();
  const Index r = x.rows(), c = x.cols();
  return t.record(std::move(s), {x}, [ix, r, c](Tape& t, std::size_t self) {
    t.accumulate(ix, Matrix::Constant(r, c, t.grad(self)(0, 0)));
  });
}

/// ‖X‖²_F as a 1x1.
inline Var frobenius_sq(Var x) {
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix s(1, 1);
  s(0, 0) = x.value().squaredNorm();
  return t.record(std::move(s), {x}, [ix](Tape& t, std::size_t self) {
    t.accumulate(ix, t.value(ix) * (2.0 * t.grad(self)(0, 0)));
  });
}

/// ‖target − X‖²_F as a 1x1; `target` is a constant.
inline Var squared_error(Var x, const Matrix& target) {
  if (x.rows() != target.rows() || x.cols() != target.cols())
    throw DimensionError("squared_error: prediction and target shapes differ");
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix diff = x.value() - target;
  Matrix s(1, 1);
  s(0, 0) = diff.squaredNorm();
  return t.record(std::move(s), {x}, [ix, diff = std::move(diff)](Tape& t, std::size_t self) {
    t.accumulate(ix, diff * (2.0 * t.grad(self)(0, 0)));
  });
}

/// λ Σ ‖W‖²_F over `params`; an all-zero 1x1 constant when the list is empty.
inline Var l2_penalty(Tape& tape, std::span<Parameter* const> params, double lambda) {
  if (params.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var total = frobenius_sq(tape.parameter(*params.front()));
  for (std::size_t k = 1; k < params.size(); ++k) total = add(total, frobenius_sq(tape.parameter(*params[k])));
  return scale(total, lambda);
}

/// Variant reusing parameter vars already bound on the tape.
inline Var l2_penalty(std::span<const Var> params, double lambda) {
  if (params.empty()) throw std::invalid_argument("l2_penalty: no parameters");
  Var total = frobenius_sq(params.front());
  for (std::size_t k = 1; k < params.size(); ++k) total = add(total, frobenius_sq(params[k]));
  return scale(total, lambda);
}

/// First `count` rows.
inline Var slice_rows(Var x, Index count) {
  if (count > x.rows()) throw DimensionError("slice_rows: not enough rows");
  if (count == x.rows()) return x;
  Tape& t = x.tape();
  std::size_t ix = x.id();
  const Index r = x.rows(), c = x.cols();
  Matrix y = x.value().topRows(count);
  return t.record(std::move(y), {x}, [ix, r, c, count](Tape& t, std::size_t self) {
    Matrix g = Matrix::Zero(r, c);
    g.topRows(count) = t.grad(self);
    t.accumulate(ix, g);
  });
}

/// Rows `rows` of x, in the given order.
inline Var gather_rows(Var x, const std::vector<std::size_t>& rows) {
  Tape& t = x.tape();
  std::size_t ix = x.id();
  Matrix y(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) y.row(static_cast<Index>(r)) = x.value().row(static_cast<Index>(rows[r]));
  const Index n = x.rows();
  return t.record(std::move(y), {x}, [ix, rows, n](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix gx = Matrix::Zero(n, g.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) gx.row(static_cast<Index>(rows[r])) += g.row(static_cast<Index>(r));
    t.accumulate(ix, gx);
  });
}

/// Averages `heads` equal column blocks: n x (K f) -> n x f.
inline Var head_mean(Var x, int heads) {
  if (heads == 1) return x;
  if (x.cols() % heads != 0) throw DimensionError("head_mean: width not divisible by heads");
  Tape& t = x.tape();
  std::size_t ix = x.id();
  const Index f = x.cols() / heads;
  Matrix y = Matrix::Zero(x.rows(), f);
  for (int k = 0; k < heads; ++k) y += x.value().middleCols(k * f, f);
  y /= heads;
  return t.record(std::move(y), {x}, [ix, heads, f](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix gx(g.rows(), f * heads);
    for (int k = 0; k < heads; ++k) gx.middleCols(k * f, f) = g / heads;
    t.accumulate(ix, gx);
  });
}

/// Row-wise inner products Z_i·Z_j for each pair, as an m x 1 column.
inline Var pair_dots(Var z, const std::vector<Edge>& pairs) {
  Tape& t = z.tape();
  std::size_t iz = z.id();
  Matrix y(static_cast<Index>(pairs.size()), 1);
  const Matrix& zv = z.value();
  for (std::size_t p = 0; p < pairs.size(); ++p)
    y(static_cast<Index>(p), 0) =
        zv.row(static_cast<Index>(pairs[p].first)).dot(zv.row(static_cast<Index>(pairs[p].second)));
  return t.record(std::move(y), {z}, [iz, pairs](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& zv = t.value(iz);
    Matrix gz = Matrix::Zero(zv.rows(), zv.cols());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto a = static_cast<Index>(pairs[p].first), b = static_cast<Index>(pairs[p].second);
      const double gp = g(static_cast<Index>(p), 0);
      gz.row(a) += gp * zv.row(b);
      gz.row(b) += gp * zv.row(a);
    }
    t.accumulate(iz, gz);
  });
}

/// Σ_p w_p · BCE(sigmoid(logit_p), label_p) as a 1x1, computed stably.
inline Var weighted_bce_with_logits(Var logits, std::vector<double> labels, std::vector<double> weights) {
  if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != labels.size() ||
      labels.size() != weights.size())
    throw DimensionError("weighted_bce_with_logits: size mismatch");
  Tape& t = logits.tape();
  std::size_t il = logits.id();
  Matrix s = Matrix::Zero(1, 1);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const double x = logits.value()(static_cast<Index>(p), 0);
    // log(1 + e^x) - y x
    const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    s(0, 0) += weights[p] * (softplus - labels[p] * x);
  }
  return t.record(std::move(s), {logits},
                  [il, labels = std::move(labels), weights = std::move(weights)](Tape& t, std::size_t self) {
                    const double g = t.grad(self)(0, 0);
                    const Matrix& x = t.value(il);
                    Matrix gx(x.rows(), 1);
                    for (Index p = 0; p < x.rows(); ++p) {
                      const double sig = 1.0 / (1.0 + std::exp(-x(p, 0)));
                      gx(p, 0) = g * weights[static_cast<std::size_t>(p)] * (sig - labels[static_cast<std::size_t>(p)]);
                    }
                    t.accumulate(il, gx);
                  });
}

}  // namespace anae
