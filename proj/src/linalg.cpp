#include "pspider/linalg.hpp"

#include <cmath>
#include <string>

#include "pspider/errors.hpp"

namespace pspider::num {

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("cholesky: matrix is not square", 0);
  }
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pivot = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NotPositiveDefinite(
          "cholesky: non-positive pivot " + std::to_string(pivot) + " at index " +
              std::to_string(j),
          static_cast<std::size_t>(j));
    }
    lower(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dot = lower.row(j).head(j).dot(lower.row(i).head(j));
      lower(i, j) = (a(i, j) - dot) / lower(j, j);
    }
  }
  return lower;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& lower, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = lower.rows();
  if (rhs.size() != n) {
    throw DimensionError("solve_spd: rhs length " + std::to_string(rhs.size()) +
                             " != " + std::to_string(n),
                         0);
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lower(i, i) == 0.0) {
      throw NumericalError("solve_spd: zero diagonal at " + std::to_string(i));
    }
    y(i) = (rhs(i) - lower.row(i).head(i).dot(y.head(i))) / lower(i, i);
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    x(i) = (y(i) - lower.col(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / lower(i, i);
  }
  return x;
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& lower) {
  const Eigen::Index n = lower.rows();
  Eigen::MatrixXd inv(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    inv.col(j) = solve_spd(lower, Eigen::VectorXd::Unit(n, j));
  }
  return 0.5 * (inv + inv.transpose());
}

double max_eigenvalue_spd(const Eigen::MatrixXd& a, PowerIterationOptions opts) {
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw DimensionError("max_eigenvalue_spd: matrix is empty or not square", 0);
  }
  // A deterministic start with no special symmetry, so it is not orthogonal
  // to the dominant eigenvector in practice.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(1.0 + i);
  v.normalize();

  double rayleigh = v.dot(a * v);
  double residual = 0.0;
  int stalled = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Eigen::VectorXd w = a * v;
    const double norm = w.norm();
    if (!(norm > 0.0)) throw NumericalError("max_eigenvalue_spd: matrix annihilates start");
    v = w / norm;
    Eigen::VectorXd av = a * v;
    const double next = v.dot(av);
    residual = (av - next * v).norm();
    if (residual <= opts.rel_tol * std::abs(next)) return next;
    // Rayleigh quotients of power iterates on an SPD matrix are
    // nondecreasing; a long stall means we sit on a tight cluster.
    stalled = (std::abs(next - rayleigh) <= 1e-16 * std::abs(next)) ? stalled + 1 : 0;
    rayleigh = next;
    if (stalled >= 50) return rayleigh;
  }
  throw NumericalError("max_eigenvalue_spd: no convergence, residual " +
                       std::to_string(residual));
}

double min_eigenvalue_of_inverse(const Eigen::MatrixXd& a, PowerIterationOptions opts) {
  return 1.0 / max_eigenvalue_spd(a, opts);
}

}  // namespace pspider::num
