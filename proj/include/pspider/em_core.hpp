#pragma once

// Statistics-space abstractions shared by every algorithm: the vectors an
// EM run moves through, the preconditioner, the contract a latent-variable
// model implements, and the stationarity diagnostic.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pspider/rng.hpp"

namespace pspider {

/// A point s of the statistics space (length q).
using StatVector = Eigen::VectorXd;
/// A point theta of the parameter space (length d).
using ParamVector = Eigen::VectorXd;

/// Symmetric positive-definite weighting matrix with its Cholesky factor.
/// Construction rejects matrices that are not symmetric (relative 1e-12)
/// or not positive definite with a PreconditionerError.
class Preconditioner {
 public:
  explicit Preconditioner(Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return lower_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }

  /// v^T B v
  double squared_norm(const Eigen::VectorXd& v) const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd lower_;
};

/// The interface a latent-variable model exposes to the algorithms.
///
/// Implementations are immutable after construction and safe for
/// concurrent read-only use. Optional capabilities return std::nullopt
/// when the model cannot provide them.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual std::size_t num_examples() const = 0;
  virtual std::size_t stat_dim() const = 0;
  virtual std::size_t param_dim() const = 0;

  /// Stochastic approximation of s̄_i∘T(s) using `budget` draws; the result
  /// is a deterministic function of (i, s, budget, stream).
  virtual StatVector approx_stat(std::size_t i, const StatVector& s, std::size_t budget,
                                 num::RngStream stream) const = 0;

  /// s̄_i∘T(s) when the model can compute it (to quadrature accuracy).
  virtual std::optional<StatVector> exact_stat(std::size_t /*i*/,
                                               const StatVector& /*s*/) const {
    return std::nullopt;
  }

  /// The M-step map T.
  virtual ParamVector t_map(const StatVector& s) const = 0;

  /// A statistic s with T(s) = theta, when T is invertible.
  virtual std::optional<StatVector> stat_from_param(const ParamVector& /*theta*/) const {
    return std::nullopt;
  }

  virtual Preconditioner preconditioner_at(const StatVector& s) const = 0;

  /// argmin_u gamma g(u) + 1/2 (u - s')^T B (u - s').
  virtual StatVector weighted_prox(const Preconditioner& b, double gamma,
                                   const StatVector& s_prime) const = 0;

  /// g(s) < infinity.
  virtual bool is_feasible(const StatVector& s) const = 0;

  /// The objective F(theta) when computable.
  virtual std::optional<double> objective(const ParamVector& /*theta*/) const {
    return std::nullopt;
  }
};

/// Wraps a model and replaces selected capabilities. Used to run the
/// algorithms with oracle statistics or without the constraint.
class ModelOverride final : public LatentModel {
 public:
  struct Options {
    /// approx_stat returns exact_stat (requires the oracle).
    bool exact_stats_as_approx = false;
    /// weighted_prox is the identity and every point is feasible.
    bool disable_prox = false;
  };

  ModelOverride(const LatentModel& base, Options options);

  std::size_t num_examples() const override { return base_.num_examples(); }
  std::size_t stat_dim() const override { return base_.stat_dim(); }
  std::size_t param_dim() const override { return base_.param_dim(); }
  StatVector approx_stat(std::size_t i, const StatVector& s, std::size_t budget,
                         num::RngStream stream) const override;
  std::optional<StatVector> exact_stat(std::size_t i, const StatVector& s) const override {
    return base_.exact_stat(i, s);
  }
  ParamVector t_map(const StatVector& s) const override { return base_.t_map(s); }
  std::optional<StatVector> stat_from_param(const ParamVector& theta) const override {
    return base_.stat_from_param(theta);
  }
  Preconditioner preconditioner_at(const StatVector& s) const override {
    return base_.preconditioner_at(s);
  }
  StatVector weighted_prox(const Preconditioner& b, double gamma,
                           const StatVector& s_prime) const override;
  bool is_feasible(const StatVector& s) const override;
  std::optional<double> objective(const ParamVector& theta) const override {
    return base_.objective(theta);
  }

 private:
  const LatentModel& base_;
  Options options_;
};

/// State carried by the 3P-SPIDER recursion.
struct IterateState {
  StatVector s_hat;       // current iterate
  StatVector s_hat_prev;  // iterate the previous statistics were taken at
  StatVector s_cv;        // control variate
  int t = 1;
  int k = 0;
};

/// ||s_next - s_prev||^2 / gamma^2. Throws ConfigError for gamma <= 0 and
/// DimensionError for unequal lengths.
double stationarity_metric(const StatVector& s_prev, const StatVector& s_next, double gamma);

/// Mean field h(s) = n^{-1} sum_i s̄_i∘T(s) - s from the exact oracle, or
/// std::nullopt without it.
std::optional<StatVector> exact_mean_field(const LatentModel& model, const StatVector& s);

/// Relative discrepancy ||grad_fd W(s) + B(s) h(s)|| / ||B(s) h(s)|| where
/// W = F∘T and the gradient is taken by central differences with step `h`.
/// Requires the objective and exact-statistics oracles.
std::optional<double> gradient_identity_residual(const LatentModel& model, const StatVector& s,
                                                 double h = 1e-5);

struct ProbeReport {
  std::size_t probe = 0;
  bool symmetric = true;
  bool positive_definite = true;
  double prox_idempotence = 0.0;   // ||prox(prox(s')) - prox(s')||
  double variational_gap = 0.0;    // worst violation of the projection inequality
  bool prox_feasible = true;
  std::optional<double> stat_agreement;  // worst |mean approx - exact| / (5 SE), <= 1 passes
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
};

struct ValidationReport {
  std::vector<ProbeReport> probes;

  bool passed() const noexcept;
  std::string summary() const;
};

struct ValidationOptions {
  std::uint64_t seed = 12345;
  std::size_t stat_budget = 4000;
  int stat_replications = 16;
  std::size_t stat_examples = 3;
  int variational_samples = 400;
  double prox_gamma = 0.5;
  double idempotence_tol = 1e-10;
  double variational_tol = 1e-8;
};

/// Self-checks of a model at each probe point: B(s) symmetric and PD, prox
/// idempotent, prox output feasible and satisfying the variational
/// inequality against sampled feasible points, and (when the oracle
/// exists) approx_stat agreeing with exact_stat. Throws DimensionError
/// naming the first probe of the wrong length.
ValidationReport validate_model(const LatentModel& model, std::span<const StatVector> probes,
                                const ValidationOptions& options = {});

}  // namespace pspider
