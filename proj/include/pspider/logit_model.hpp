#pragma once

// Latent logistic regression: each example i carries a scalar Gaussian
// latent z with prior N(<X_i, theta>/||X_i||, sigma2) and success
// probability (1 + exp(-||X_i|| z))^{-1}. The ridge-penalized negative
// log-likelihood has an explicit M-step T(s) = Omega s with
//
//   Omega^{-1} = (sigma2 n)^{-1} sum_i X_i X_i^T / ||X_i||^2 + 2 tau I,
//
// a constant preconditioner B(s) = Omega, and statistics constrained to the
// ellipsoid K = { s : tau s^T Omega s <= ln 4 / lambda_min(Omega) }.

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

#include "pspider/em_core.hpp"
#include "pspider/polya_gamma.hpp"
#include "pspider/quadrature.hpp"

namespace pspider::logit {

struct Dataset {
  Eigen::MatrixXd features;  // n x d, intercept column included when used
  Eigen::VectorXd labels;    // entries in {-1, +1}

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

/// Throws DimensionError naming the first zero-norm row or bad label.
void check_dataset(const Dataset& data);

struct LogitOptions {
  double sigma2 = 0.1;
  double tau = 1.0;
  int quad_order = 128;
  int gibbs_warmup = 10;
  num::LatentSampler sampler = num::LatentSampler::kGibbs;
  /// Multiplies the radius the prox projects onto while leaving K itself
  /// unchanged. Anything but 1 is a deliberate defect for exercising the
  /// validation checks.
  double prox_radius_scale = 1.0;
};

/// Posterior moments of z and log of E_{N(m, sigma2)}[(1 + exp(-y c z))^{-1}].
struct PosteriorSummary {
  double mean = 0.0;
  double second = 0.0;  // E[z^2]
  double log_mass = 0.0;
};

/// Quadrature summary of the scalar posterior. Throws NumericalError when
/// the normalizing mass underflows.
PosteriorSummary summarize_posterior(const num::PosteriorParams& p,
                                     const num::QuadratureRule& rule);

/// Posterior quantiles at probabilities in (0, 1), by inverting a
/// trapezoid-rule CDF on a fine grid.
std::vector<double> posterior_quantiles(const num::PosteriorParams& p,
                                        const std::vector<double>& probs);

class LogitModel final : public LatentModel {
 public:
  LogitModel(Dataset data, LogitOptions options);

  std::size_t num_examples() const override { return data_.size(); }
  std::size_t stat_dim() const override { return data_.dim(); }
  std::size_t param_dim() const override { return data_.dim(); }

  StatVector approx_stat(std::size_t i, const StatVector& s, std::size_t budget,
                         num::RngStream stream) const override;
  std::optional<StatVector> exact_stat(std::size_t i, const StatVector& s) const override;
  ParamVector t_map(const StatVector& s) const override;
  std::optional<StatVector> stat_from_param(const ParamVector& theta) const override;
  Preconditioner preconditioner_at(const StatVector& s) const override;
  StatVector weighted_prox(const Preconditioner& b, double gamma,
                           const StatVector& s_prime) const override;
  bool is_feasible(const StatVector& s) const override;
  std::optional<double> objective(const ParamVector& theta) const override;

  /// n^{-1} sum_i s̄_i(Omega s) - s by quadrature.
  StatVector mean_field(const StatVector& s) const;
  /// s̄_i at a parameter value.
  StatVector exact_stat_at_param(std::size_t i, const ParamVector& theta) const;
  /// R(theta) = 1/2 theta^T Omega^{-1} theta.
  double regularizer(const ParamVector& theta) const;
  /// s^T Omega s.
  double omega_norm2(const StatVector& s) const;
  num::PosteriorParams posterior_params(std::size_t i, const ParamVector& theta) const;

  const Dataset& dataset() const noexcept { return data_; }
  const LogitOptions& options() const noexcept { return options_; }
  const Eigen::MatrixXd& omega_inv() const noexcept { return omega_inv_; }
  const Eigen::MatrixXd& omega() const noexcept { return omega_.matrix(); }
  double lambda_min() const noexcept { return lambda_min_; }
  /// c = ln 4 / (tau lambda_min): K is { s : s^T Omega s <= c }.
  double radius2() const noexcept { return radius2_; }
  const num::QuadratureRule& quadrature() const noexcept { return rule_; }

 private:
  Dataset data_;
  LogitOptions options_;
  Eigen::VectorXd norms_;
  Eigen::MatrixXd omega_inv_;
  Eigen::MatrixXd omega_inv_lower_;
  Preconditioner omega_;
  double lambda_min_ = 0.0;
  double radius2_ = 0.0;
  num::QuadratureRule rule_;
};

}  // namespace pspider::logit
