#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace pspider::num {

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line.
/// Nodes ascend and are symmetric about 0; weights sum to sqrt(pi).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Golub-Welsch nodes polished by Newton steps on the orthonormal Hermite
/// recurrence; weights from the same recurrence. Exact for polynomials of
/// degree <= 2*order-1. Throws ConfigError for order < 2.
QuadratureRule gauss_hermite(int order);

/// E[f(Z)] for Z ~ N(mean, sd^2).
template <class F>
double gaussian_expectation(const QuadratureRule& rule, double mean, double sd, F&& f) {
  double acc = 0.0;
  for (int j = 0; j < rule.order(); ++j) {
    acc += rule.weights[j] * f(mean + std::numbers::sqrt2 * sd * rule.nodes[j]);
  }
  return acc / std::sqrt(std::numbers::pi);
}

}  // namespace pspider::num
