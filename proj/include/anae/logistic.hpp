#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>
#include <vector>

#include "anae/graph.hpp"

namespace anae {

struct LogisticOptions {
  double reg_strength = 1.0;  // C; penalty is ‖W‖² / (2C), bias unpenalized
  double tolerance = 1e-5;    // on the max-abs gradient entry
  int max_iterations = 1000;
  int history = 10;
};

/// Multinomial softmax regression. `weights` is num_classes x k.
struct ClassifierModel {
  Matrix weights;
  Eigen::VectorXd bias;
  double reg_strength = 1.0;
  int iterations = 0;
  double final_loss = 0;
  double final_grad_norm = 0;
  bool converged = false;

  Matrix predict_proba(const Matrix& z) const {
    Matrix s = z * weights.transpose();
    s.rowwise() += bias.transpose();
    for (Index i = 0; i < s.rows(); ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    return s;
  }

  std::vector<int> predict(const Matrix& z) const {
    Matrix s = z * weights.transpose();
    s.rowwise() += bias.transpose();
    std::vector<int> out(static_cast<std::size_t>(s.rows()));
    for (Index i = 0; i < s.rows(); ++i) {
      Index best = 0;
      s.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }
};

namespace detail {

// Loss and gradient at theta = [vec(W) row-major, b].
struct LogisticObjective {
  const Matrix& z;
  const std::vector<int>& y;
  Index classes;
  double inv_c;

  Index size() const { return classes * z.cols() + classes; }

  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const Index k = z.cols();
    Eigen::Map<const Matrix> w(theta.data(), classes, k);
    Eigen::Map<const Eigen::VectorXd> b(theta.data() + classes * k, classes);
    Matrix s = z * w.transpose();
    s.rowwise() += b.transpose();
    double loss = 0;
    for (Index i = 0; i < s.rows(); ++i) {
      const auto yi = static_cast<Index>(y[static_cast<std::size_t>(i)]);
      const double target = s(i, yi);
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      const double zsum = s.row(i).sum();
      loss += std::log(zsum) + m - target;
      s.row(i) /= zsum;
      s(i, yi) -= 1.0;
    }
    loss += 0.5 * inv_c * w.squaredNorm();
    grad.resize(size());
    Eigen::Map<Matrix> gw(grad.data(), classes, k);
    gw = s.transpose() * z + inv_c * w;
    grad.tail(classes) = s.colwise().sum().transpose();
    return loss;
  }
};

}  // namespace detail

/// L-BFGS with Armijo backtracking until the max-abs gradient entry falls
/// below `tolerance` or the iteration budget is spent.
inline ClassifierModel fit_logistic(const Matrix& z, const std::vector<int>& y, int num_classes,
                                    LogisticOptions opts = {}) {
  if (static_cast<std::size_t>(z.rows()) != y.size() || y.empty())
    throw std::invalid_argument("fit_logistic: features and labels differ in length");
  if (std::set<int>(y.begin(), y.end()).size() < 2)
    throw std::invalid_argument("fit_logistic: training labels contain a single class");
  for (int label : y)
    if (label < 0 || label >= num_classes) throw std::invalid_argument("fit_logistic: label out of range");

  detail::LogisticObjective f{z, y, num_classes, 1.0 / opts.reg_strength};
  Eigen::VectorXd x = Eigen::VectorXd::Zero(f.size());
  Eigen::VectorXd g;
  double fx = f(x, g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  ClassifierModel model;
  model.reg_strength = opts.reg_strength;
  int it = 0;
  for (; it < opts.max_iterations && g.lpNorm<Eigen::Infinity>() >= opts.tolerance; ++it) {
    // two-loop recursion
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;
    Eigen::VectorXd x_new, g_new;
    double f_new = 0;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      if (f_new <= fx + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(f_new <= fx)) break;  // no progress possible at machine precision
    Eigen::VectorXd sk = x_new - x, yk = g_new - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      s_hist.push_back(sk);
      y_hist.push_back(yk);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = std::move(x_new);
    g = std::move(g_new);
    fx = f_new;
  }

  const Index k = z.cols();
  model.weights = Eigen::Map<const Matrix>(x.data(), num_classes, k);
  model.bias = x.tail(num_classes);
  model.iterations = it;
  model.final_loss = fx;
  model.final_grad_norm = g.lpNorm<Eigen::Infinity>();
  model.converged = model.final_grad_norm < opts.tolerance;
  return model;
}

/// Objective value of a given model on (z, y); shared by tests and oracles.
inline double logistic_loss(const ClassifierModel& m, const Matrix& z, const std::vector<int>& y) {
  Matrix p = m.predict_proba(z);
  double loss = 0;
  for (Index i = 0; i < z.rows(); ++i) loss -= std::log(p(i, static_cast<Index>(y[static_cast<std::size_t>(i)])));
  return loss + m.weights.squaredNorm() / (2 * m.reg_strength);
}

}  // namespace anae
