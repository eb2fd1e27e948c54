#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace sketchreward {

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without cancellation for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

/// log(1 + exp(x)).
inline double softplus(double x) { return -log_sigmoid(-x); }

/// Writes softmax(xs) into out (same size).
inline void softmax(std::span<const double> xs, std::span<double> out) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double z = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
}

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace sketchreward
