#include "pspider/em_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pspider/errors.hpp"
#include "pspider/linalg.hpp"

namespace pspider {

Preconditioner::Preconditioner(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
    throw DimensionError("preconditioner must be a nonempty square matrix", 0);
  }
  const double scale = std::max(matrix_.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-12 * scale)) {
    throw PreconditionerError("preconditioner is not symmetric (max asymmetry " +
                                  std::to_string(asym) + ")",
                              PreconditionerError::Kind::kNotSymmetric);
  }
  try {
    lower_ = num::cholesky(matrix_);
  } catch (const NotPositiveDefinite& e) {
    throw PreconditionerError(std::string("preconditioner is not positive definite: ") + e.what(),
                              PreconditionerError::Kind::kNotPositiveDefinite);
  }
}

double Preconditioner::squared_norm(const Eigen::VectorXd& v) const {
  return (lower_.transpose() * v).squaredNorm();
}

ModelOverride::ModelOverride(const LatentModel& base, Options options)
    : base_(base), options_(options) {}

StatVector ModelOverride::approx_stat(std::size_t i, const StatVector& s, std::size_t budget,
                                      num::RngStream stream) const {
  if (!options_.exact_stats_as_approx) return base_.approx_stat(i, s, budget, stream);
  auto exact = base_.exact_stat(i, s);
  if (!exact) throw ConfigError("exact statistics requested but the model has no oracle");
  return *exact;
}

StatVector ModelOverride::weighted_prox(const Preconditioner& b, double gamma,
                                        const StatVector& s_prime) const {
  if (options_.disable_prox) return s_prime;
  return base_.weighted_prox(b, gamma, s_prime);
}

bool ModelOverride::is_feasible(const StatVector& s) const {
  return options_.disable_prox || base_.is_feasible(s);
}

double stationarity_metric(const StatVector& s_prev, const StatVector& s_next, double gamma) {
  if (!(gamma > 0.0)) {
    throw ConfigError("stationarity_metric: step size must be positive, got " +
                      std::to_string(gamma));
  }
  if (s_prev.size() != s_next.size()) {
    throw DimensionError("stationarity_metric: length mismatch", 0);
  }
  return (s_next - s_prev).squaredNorm() / (gamma * gamma);
}

std::optional<StatVector> exact_mean_field(const LatentModel& model, const StatVector& s) {
  StatVector acc = StatVector::Zero(s.size());
  for (std::size_t i = 0; i < model.num_examples(); ++i) {
    auto si = model.exact_stat(i, s);
    if (!si) return std::nullopt;
    acc += *si;
  }
  return StatVector(acc / static_cast<double>(model.num_examples()) - s);
}

std::optional<double> gradient_identity_residual(const LatentModel& model, const StatVector& s,
                                                 double h) {
  const auto field = exact_mean_field(model, s);
  if (!field) return std::nullopt;
  const Eigen::VectorXd target = model.preconditioner_at(s).matrix() * *field;

  Eigen::VectorXd grad(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    StatVector up = s, down = s;
    up(j) += h;
    down(j) -= h;
    const auto fu = model.objective(model.t_map(up));
    const auto fd = model.objective(model.t_map(down));
    if (!fu || !fd) return std::nullopt;
    grad(j) = (*fu - *fd) / (2.0 * h);
  }
  const double denom = target.norm();
  return denom > 0.0 ? (grad + target).norm() / denom : (grad + target).norm();
}

bool ValidationReport::passed() const noexcept {
  return std::all_of(probes.begin(), probes.end(), [](const ProbeReport& p) { return p.passed(); });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& p : probes) {
    out << "probe " << p.probe << ": " << (p.passed() ? "ok" : "FAILED")
        << " symmetric=" << p.symmetric << " pd=" << p.positive_definite
        << " idempotence=" << p.prox_idempotence << " variational_gap=" << p.variational_gap;
    if (p.stat_agreement) out << " stat_agreement=" << *p.stat_agreement;
    out << '\n';
    for (const auto& f : p.failures) out << "  - " << f << '\n';
  }
  return out.str();
}

namespace {

void check_prox(const LatentModel& model, const Preconditioner& b, const StatVector& probe,
                const ValidationOptions& opt, num::RngStream& rng, ProbeReport& report) {
  const Eigen::Index q = probe.size();
  const double base = probe.norm() + 1.0;
  const double gamma = opt.prox_gamma;
  for (double spread : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    StatVector s_prime = probe;
    for (Eigen::Index j = 0; j < q; ++j) s_prime(j) += spread * base * rng.normal();
    const StatVector p = model.weighted_prox(b, gamma, s_prime);
    if (p.size() != q || !p.allFinite()) {
      report.failures.push_back("prox returned a non-finite or wrong-length vector");
      return;
    }
    if (!model.is_feasible(p)) report.prox_feasible = false;

    const StatVector pp = model.weighted_prox(b, gamma, p);
    report.prox_idempotence = std::max(report.prox_idempotence, (pp - p).norm());

    const double own = 0.5 * b.squared_norm(p - s_prime);
    const double scale = std::max(1.0, own);
    for (int r = 0; r < opt.variational_samples; ++r) {
      const double radius = std::pow(10.0, -3.0 + 3.0 * rng.uniform()) * (p.norm() + 1.0);
      StatVector u = p;
      if (r % 4 == 0) {
        // toward s', the direction a too-small projection fails along
        const double dist = (s_prime - p).norm();
        if (dist == 0.0) continue;
        u += radius * (s_prime - p) / dist;
      } else {
        for (Eigen::Index j = 0; j < q; ++j) u(j) += radius * rng.normal() / std::sqrt(double(q));
      }
      if (!model.is_feasible(u)) continue;
      const double other = 0.5 * b.squared_norm(u - s_prime);
      report.variational_gap = std::max(report.variational_gap, (own - other) / scale);
    }
  }
  if (!report.prox_feasible) report.failures.push_back("prox output is infeasible");
  if (report.prox_idempotence > opt.idempotence_tol * base) {
    report.failures.push_back("prox is not idempotent (residual " +
                              std::to_string(report.prox_idempotence) + ")");
  }
  if (report.variational_gap > opt.variational_tol) {
    report.failures.push_back("prox violates the variational inequality by " +
                              std::to_string(report.variational_gap));
  }
}

void check_stats(const LatentModel& model, const StatVector& probe, const ValidationOptions& opt,
                 ProbeReport& report) {
  const std::size_t examples = std::min(opt.stat_examples, model.num_examples());
  double worst = 0.0;
  for (std::size_t i = 0; i < examples; ++i) {
    auto exact = model.exact_stat(i, probe);
    if (!exact) return;
    const int reps = opt.stat_replications;
    Eigen::MatrixXd draws(probe.size(), reps);
    for (int r = 0; r < reps; ++r) {
      draws.col(r) = model.approx_stat(
          i, probe, opt.stat_budget,
          num::derive_stream(opt.seed, 1 + static_cast<long>(report.probe % 4000), r, i,
                             num::StreamRole::kValidation));
    }
    const Eigen::VectorXd mean = draws.rowwise().mean();
    const Eigen::VectorXd centered_sq = (draws.colwise() - mean).array().square().rowwise().sum();
    for (Eigen::Index j = 0; j < probe.size(); ++j) {
      const double se = std::sqrt(centered_sq(j) / (reps - 1) / reps);
      const double tol = 5.0 * se + 1e-9 * (1.0 + std::abs((*exact)(j)));
      worst = std::max(worst, std::abs(mean(j) - (*exact)(j)) / tol);
    }
  }
  report.stat_agreement = worst;
  if (worst > 1.0) {
    report.failures.push_back("approx_stat disagrees with exact_stat (ratio " +
                              std::to_string(worst) + " of the 5-SE band)");
  }
}

}  // namespace

ValidationReport validate_model(const LatentModel& model, std::span<const StatVector> probes,
                                const ValidationOptions& options) {
  if (probes.empty()) throw ConfigError("validate_model: no probe points");
  const auto q = static_cast<Eigen::Index>(model.stat_dim());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    if (probes[p].size() != q) {
      throw DimensionError("validate_model: probe " + std::to_string(p) + " has length " +
                               std::to_string(probes[p].size()) + ", expected " +
                               std::to_string(q),
                           p);
    }
  }

  ValidationReport out;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    ProbeReport report;
    report.probe = p;
    num::RngStream rng =
        num::derive_stream(options.seed, 0, 0, p, num::StreamRole::kValidation);
    std::optional<Preconditioner> b;
    try {
      b.emplace(model.preconditioner_at(probes[p]));
    } catch (const PreconditionerError& e) {
      if (e.kind() == PreconditionerError::Kind::kNotSymmetric) {
        report.symmetric = false;
        report.failures.push_back("B(s) is not symmetric");
      } else {
        report.positive_definite = false;
        report.failures.push_back("B(s) is not positive definite");
      }
    }
    if (b) check_prox(model, *b, probes[p], options, rng, report);
    check_stats(model, probes[p], options, report);
    out.probes.push_back(std::move(report));
  }
  return out;
}

}  // namespace pspider
