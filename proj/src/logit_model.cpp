#include "pspider/logit_model.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pspider/errors.hpp"
#include "pspider/linalg.hpp"

namespace pspider::logit {

namespace {

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

Eigen::MatrixXd assemble_omega_inv(const Dataset& data, const Eigen::VectorXd& norms,
                                   double sigma2, double tau) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    const Eigen::VectorXd unit = data.features.row(i).transpose() / norms(i);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(unit);
  }
  acc = acc.selfadjointView<Eigen::Lower>();
  acc /= sigma2 * static_cast<double>(data.size());
  acc.diagonal().array() += 2.0 * tau;
  return acc;
}

Eigen::VectorXd row_norms(const Dataset& data) {
  check_dataset(data);
  return data.features.rowwise().norm();
}

}  // namespace

void check_dataset(const Dataset& data) {
  if (data.size() == 0 || data.dim() == 0) {
    throw DimensionError("dataset is empty", 0);
  }
  if (static_cast<std::size_t>(data.labels.size()) != data.size()) {
    throw DimensionError("dataset has " + std::to_string(data.labels.size()) + " labels for " +
                             std::to_string(data.size()) + " rows",
                         0);
  }
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    const double norm = data.features.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DimensionError("covariate row " + std::to_string(i) + " has zero or non-finite norm",
                           static_cast<std::size_t>(i));
    }
    const double y = data.labels(i);
    if (y != 1.0 && y != -1.0) {
      throw DimensionError("label of row " + std::to_string(i) + " is not -1 or +1",
                           static_cast<std::size_t>(i));
    }
  }
}

PosteriorSummary summarize_posterior(const num::PosteriorParams& p,
                                     const num::QuadratureRule& rule) {
  const int order = rule.order();
  const double sd = std::sqrt(p.sigma2);
  const double half_log_pi = 0.5 * std::log(std::numbers::pi);
  std::vector<double> log_terms(order);
  std::vector<double> nodes(order);
  double peak = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < order; ++j) {
    nodes[j] = p.m + std::numbers::sqrt2 * sd * rule.nodes[j];
    log_terms[j] = std::log(rule.weights[j]) - half_log_pi + log_sigmoid(p.y * p.c * nodes[j]);
    peak = std::max(peak, log_terms[j]);
  }
  double mass = 0.0;
  double first = 0.0;
  double second = 0.0;
  for (int j = 0; j < order; ++j) {
    const double w = std::exp(log_terms[j] - peak);
    mass += w;
    first += w * nodes[j];
    second += w * nodes[j] * nodes[j];
  }
  PosteriorSummary out;
  out.log_mass = peak + std::log(mass);
  out.mean = first / mass;
  out.second = second / mass;
  if (!std::isfinite(out.log_mass) || !std::isfinite(out.mean)) {
    throw NumericalError("posterior quadrature underflow");
  }
  return out;
}

std::vector<double> posterior_quantiles(const num::PosteriorParams& p,
                                        const std::vector<double>& probs) {
  const double sd = std::sqrt(p.sigma2);
  const double center = num::gibbs_start(p);
  const double lo = center - 14.0 * sd;
  const double hi = center + 14.0 * sd;
  constexpr int kGrid = 20000;
  const double h = (hi - lo) / kGrid;
  std::vector<double> grid(kGrid + 1), logf(kGrid + 1), cdf(kGrid + 1, 0.0);
  double peak = -std::numeric_limits<double>::infinity();
  for (int j = 0; j <= kGrid; ++j) {
    grid[j] = lo + h * j;
    const double u = (grid[j] - p.m) / sd;
    logf[j] = -0.5 * u * u + log_sigmoid(p.y * p.c * grid[j]);
    peak = std::max(peak, logf[j]);
  }
  for (int j = 1; j <= kGrid; ++j) {
    cdf[j] = cdf[j - 1] + 0.5 * h * (std::exp(logf[j - 1] - peak) + std::exp(logf[j] - peak));
  }
  std::vector<double> out;
  out.reserve(probs.size());
  for (double q : probs) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile probability must lie in (0, 1)");
    const double target = q * cdf[kGrid];
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const auto j = static_cast<int>(std::clamp<long>(it - cdf.begin(), 1, kGrid));
    const double frac = (target - cdf[j - 1]) / (cdf[j] - cdf[j - 1]);
    out.push_back(grid[j - 1] + frac * h);
  }
  return out;
}

LogitModel::LogitModel(Dataset data, LogitOptions options)
    : data_(std::move(data)),
      options_(options),
      norms_(row_norms(data_)),
      omega_inv_(assemble_omega_inv(data_, norms_, options.sigma2, options.tau)),
      omega_inv_lower_(num::cholesky(omega_inv_)),
      omega_(num::inverse_spd(omega_inv_lower_)),
      rule_(num::gauss_hermite(options.quad_order)) {
  if (!(options_.sigma2 > 0.0) || !(options_.tau > 0.0)) {
    throw ConfigError("sigma2 and tau must be positive");
  }
  lambda_min_ = num::min_eigenvalue_of_inverse(omega_inv_);
  radius2_ = std::log(4.0) / (options_.tau * lambda_min_);
}

num::PosteriorParams LogitModel::posterior_params(std::size_t i, const ParamVector& theta) const {
  const auto row = static_cast<Eigen::Index>(i);
  return {norms_(row), data_.labels(row), data_.features.row(row).dot(theta) / norms_(row),
          options_.sigma2};
}

StatVector LogitModel::approx_stat(std::size_t i, const StatVector& s, std::size_t budget,
                                   num::RngStream stream) const {
  if (budget < 1) throw ConfigError("approx_stat: Monte Carlo budget must be >= 1");
  const auto params = posterior_params(i, t_map(s));
  const double zbar =
      num::mean_latent_draws(params, budget, options_.gibbs_warmup, options_.sampler, stream);
  const auto row = static_cast<Eigen::Index>(i);
  return data_.features.row(row).transpose() * (zbar / (options_.sigma2 * norms_(row)));
}

StatVector LogitModel::exact_stat_at_param(std::size_t i, const ParamVector& theta) const {
  PosteriorSummary post;
  try {
    post = summarize_posterior(posterior_params(i, theta), rule_);
  } catch (const NumericalError&) {
    throw NumericalError("posterior quadrature underflow for example " + std::to_string(i));
  }
  const auto row = static_cast<Eigen::Index>(i);
  return data_.features.row(row).transpose() * (post.mean / (options_.sigma2 * norms_(row)));
}

std::optional<StatVector> LogitModel::exact_stat(std::size_t i, const StatVector& s) const {
  return exact_stat_at_param(i, t_map(s));
}

ParamVector LogitModel::t_map(const StatVector& s) const {
  if (s.size() != omega_inv_.rows()) {
    throw DimensionError("t_map: statistic has length " + std::to_string(s.size()), 0);
  }
  return num::solve_spd(omega_inv_lower_, s);
}

std::optional<StatVector> LogitModel::stat_from_param(const ParamVector& theta) const {
  return StatVector(omega_inv_ * theta);
}

Preconditioner LogitModel::preconditioner_at(const StatVector&) const { return omega_; }

double LogitModel::omega_norm2(const StatVector& s) const { return s.dot(t_map(s)); }

bool LogitModel::is_feasible(const StatVector& s) const {
  return options_.tau * omega_norm2(s) <= std::log(4.0) / lambda_min_ + 1e-12;
}

StatVector LogitModel::weighted_prox(const Preconditioner& b, double /*gamma*/,
                                     const StatVector& s_prime) const {
  const double scale = options_.prox_radius_scale;
  const double radius2 = radius2_ * scale * scale;
  const double q0 = omega_norm2(s_prime);
  if (q0 <= radius2) return s_prime;

  StatVector out;
  const Eigen::MatrixXd& omega = omega_.matrix();
  const double mscale = std::max(omega.cwiseAbs().maxCoeff(), 1e-300);
  if ((b.matrix() - omega).cwiseAbs().maxCoeff() <= 1e-12 * mscale) {
    // In the Omega geometry K is a ball, so projection is radial.
    out = s_prime * std::sqrt(radius2 / q0);
  } else {
    // KKT: B (u - s') + mu Omega u = 0, with mu > 0 fixing u^T Omega u = c.
    const Eigen::VectorXd bs = b.matrix() * s_prime;
    auto point = [&](double mu) {
      Eigen::MatrixXd m = b.matrix() + mu * omega;
      return Eigen::VectorXd(num::solve_spd(num::cholesky(m), bs));
    };
    double lo = 0.0, hi = 1.0;
    while (omega_norm2(point(hi)) > radius2) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (omega_norm2(point(mid)) > radius2 ? lo : hi) = mid;
    }
    out = point(hi);
  }
  while (omega_norm2(out) > radius2) out *= 1.0 - 0x1.0p-50;
  return out;
}

double LogitModel::regularizer(const ParamVector& theta) const {
  return 0.5 * theta.dot(omega_inv_ * theta);
}

std::optional<double> LogitModel::objective(const ParamVector& theta) const {
  const double s2 = options_.sigma2;
  const double log_gauss = 0.5 * std::log(2.0 * std::numbers::pi * s2);
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto p = posterior_params(i, theta);
    PosteriorSummary post;
    try {
      post = summarize_posterior(p, rule_);
    } catch (const NumericalError&) {
      throw NumericalError("objective quadrature underflow for example " + std::to_string(i));
    }
    // log of the integral of h_i(z) exp(z m / sigma2) exp(-z^2 / (2 sigma2)) dz
    acc += p.m * p.m / (2.0 * s2) + log_gauss + post.log_mass;
  }
  return -acc / static_cast<double>(data_.size()) + regularizer(theta);
}

StatVector LogitModel::mean_field(const StatVector& s) const {
  const ParamVector theta = t_map(s);
  StatVector acc = StatVector::Zero(s.size());
  for (std::size_t i = 0; i < data_.size(); ++i) acc += exact_stat_at_param(i, theta);
  return acc / static_cast<double>(data_.size()) - s;
}

}  // namespace pspider::logit
