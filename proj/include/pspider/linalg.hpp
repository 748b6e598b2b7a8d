#pragma once

// Small dense SPD kernels. Matrices here are at most a few dozen rows.

#include <Eigen/Dense>

namespace pspider::num {

/// Lower-triangular L with L * L^T = a. Only the lower triangle of `a` is
/// read. Throws NotPositiveDefinite naming the failing pivot.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& a);

/// Solves (L L^T) x = rhs by forward then backward substitution.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& lower, const Eigen::VectorXd& rhs);

/// Inverse of an SPD matrix from its Cholesky factor, symmetrized.
Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& lower);

struct PowerIterationOptions {
  double rel_tol = 1e-10;
  int max_iterations = 100000;
};

/// Largest eigenvalue of an SPD matrix by power iteration.
double max_eigenvalue_spd(const Eigen::MatrixXd& a, PowerIterationOptions opts = {});

/// For a = M^{-1} with M SPD, the smallest eigenvalue of M, computed as
/// 1 / lambda_max(a).
double min_eigenvalue_of_inverse(const Eigen::MatrixXd& a,
                                 PowerIterationOptions opts = {});

}  // namespace pspider::num
