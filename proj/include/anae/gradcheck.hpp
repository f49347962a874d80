#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "anae/graph.hpp"

namespace anae {

/// Central differences (f(x + h e) - f(x - h e)) / 2h for every entry of x.
inline Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Index k = 0; k < x.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + h;
    const double up = f(probe);
    probe.data()[k] = orig - h;
    const double down = f(probe);
    probe.data()[k] = orig;
    g.data()[k] = (up - down) / (2 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|, floor). The floor keeps entries that are both ~0 from
// reporting noise as large relative error.
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  double worst = 0;
  for (Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

}  // namespace anae
