#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "anae/graph.hpp"
#include "anae/rng.hpp"
#include "anae/tape.hpp"

namespace anae {

/// i.i.d. uniform on ±sqrt(6 / (rows + cols)).
inline Matrix glorot_init(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-bound, bound);
  return w;
}

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Moments are allocated on
/// the first step and shaped like their parameters.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  void step(std::span<Parameter* const> params) {
    if (m_.empty()) {
      for (const Parameter* p : params) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed between steps");
    ++step_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = *params[k];
      m_[k] = opts_.beta1 * m_[k] + (1.0 - opts_.beta1) * p.grad;
      v_[k] = opts_.beta2 * v_[k] + (1.0 - opts_.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= opts_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + opts_.eps);
    }
  }

  long steps() const { return step_; }
  const AdamOptions& options() const { return opts_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions opts_;
  long step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace anae
