#pragma once

#include "crystal/geometry.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using crystal::Mat;

inline Mat rot(double t) {
  Mat R(2, 2);
  R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return R;
}

/// Minimum of sum w |A - R(t)|^2 over an angle grid, refined once around the best grid point.
inline double grid_objective(const std::vector<std::pair<double, Mat>>& terms, double step, double* best_angle = nullptr) {
  auto f = [&](double t) {
    double s = 0.0;
    for (const auto& [w, A] : terms) s += w * (A - rot(t)).squaredNorm();
    return s;
  };
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (double t = -M_PI; t < M_PI; t += step)
    if (f(t) < best) best = f(t), arg = t;
  for (double t = arg - step; t <= arg + step; t += step * 1e-3)
    if (f(t) < best) best = f(t), arg = t;
  if (best_angle) *best_angle = arg;
  return best;
}

/// Shoelace area of a closed polygon (columns in order).
inline double shoelace(const Mat& P) {
  double a = 0.0;
  for (int k = 0; k < P.cols(); ++k) {
    int j = (k + 1) % int(P.cols());
    a += P(0, k) * P(1, j) - P(0, j) * P(1, k);
  }
  return std::abs(a) / 2.0;
}

}  // namespace oracle
