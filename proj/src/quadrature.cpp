#include "pspider/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <string>

#include "pspider/errors.hpp"

namespace pspider::num {

namespace {

// Orthonormal Hermite polynomials at x: returns {p_n(x), p_{n-1}(x)}.
std::pair<double, double> hermite_pair(int n, double x) {
  double prev = 0.0;
  double cur = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int j = 0; j < n; ++j) {
    const double next = x * std::sqrt(2.0 / (j + 1)) * cur - std::sqrt(double(j) / (j + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  if (order < 2) {
    throw ConfigError("gauss_hermite: order must be >= 2, got " + std::to_string(order));
  }
  // Jacobi matrix of the Hermite weight: zero diagonal, sqrt(k/2) off it.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub(k - 1) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("gauss_hermite: tridiagonal eigensolver failed");
  }

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int j = 0; j < order; ++j) {
    double x = solver.eigenvalues()(j);
    for (int it = 0; it < 3; ++it) {
      auto [pn, pn1] = hermite_pair(order, x);
      const double dpn = std::sqrt(2.0 * order) * pn1;
      const double step = pn / dpn;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    rule.nodes[j] = x;
  }
  // Enforce exact symmetry, then weights w = 1 / (n p_{n-1}(x)^2).
  for (int j = 0; j < order / 2; ++j) {
    const double a = 0.5 * (rule.nodes[order - 1 - j] - rule.nodes[j]);
    rule.nodes[j] = -a;
    rule.nodes[order - 1 - j] = a;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  for (int j = 0; j < order; ++j) {
    const double pn1 = hermite_pair(order, rule.nodes[j]).second;
    rule.weights[j] = 1.0 / (order * pn1 * pn1);
  }
  for (int j = 0; j < order / 2; ++j) {
    const double w = 0.5 * (rule.weights[j] + rule.weights[order - 1 - j]);
    rule.weights[j] = w;
    rule.weights[order - 1 - j] = w;
  }
  return rule;
}

}  // namespace pspider::num
