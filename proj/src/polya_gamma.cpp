#include "pspider/polya_gamma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pspider::num {

namespace {

constexpr double kPi = std::numbers::pi;
// Switch point between the left (inverse-Gaussian) and right (exponential)
// proposals of the J*(1, z) sampler.
constexpr double kTrunc = 0.64;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// n-th coefficient of the alternating series for the J*(1, 0) density.
double series_coefficient(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x <= 0.0) return 0.0;
  const double expnt =
      -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(expnt);
}

// Probability of using the exponential (right) proposal, p / (p + q).
double right_proposal_mass(double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = (kTrunc * z - 1.0) / std::sqrt(kTrunc);
  const double a = -(kTrunc * z + 1.0) / std::sqrt(kTrunc);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + std::log(normal_cdf(b));
  const double xa = x0 + z + std::log(normal_cdf(a));
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, RngStream& rng) {
  double x = kTrunc + 1.0;
  if (1.0 / kTrunc > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double sample_pg1(double c, RngStream& stream) {
  // PG(1, c) = J*(1, |c|/2) / 4.
  const double z = 0.5 * std::abs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double right_mass = right_proposal_mass(z);
  while (true) {
    double x;
    if (stream.uniform() < right_mass) {
      x = kTrunc + stream.exponential() / fz;
    } else {
      x = truncated_inverse_gaussian(z, stream);
    }
    double s = series_coefficient(0, x);
    const double y = stream.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coefficient(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coefficient(n, x);
        if (y > s) break;
      }
    }
  }
}

double sample_pg1_truncated(double c, RngStream& stream, int terms) {
  const double a2 = c * c / (4.0 * kPi * kPi);
  double acc = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double h = k - 0.5;
    acc += stream.exponential() / (h * h + a2);
  }
  // Expected value of the omitted tail, midpoint-integral approximation.
  const double a = std::sqrt(a2);
  const double tail = a > 0.0 ? (0.5 * kPi - std::atan(terms / a)) / a : 1.0 / terms;
  return (acc + tail) / (2.0 * kPi * kPi);
}

double gibbs_start(const PosteriorParams& p) noexcept {
  return p.m + 0.5 * p.y * p.c * p.sigma2;
}

GibbsState gibbs_step(const GibbsState& state, RngStream& stream) {
  const PosteriorParams& p = state.params;
  const double omega = sample_pg1(p.c * state.z, stream);
  const double precision = 1.0 / p.sigma2 + omega * p.c * p.c;
  const double mean = (p.m / p.sigma2 + 0.5 * p.y * p.c) / precision;
  GibbsState next = state;
  next.z = mean + stream.normal() / std::sqrt(precision);
  return next;
}

double sample_posterior_iid(const PosteriorParams& p, RngStream& stream) {
  const double center = gibbs_start(p);
  const double sd = std::sqrt(p.sigma2);
  while (true) {
    const double z = center + sd * stream.normal();
    if (stream.uniform() * std::cosh(0.5 * p.c * z) < 1.0) return z;
  }
}

double mean_latent_draws(const PosteriorParams& p, std::size_t count, int warmup,
                         LatentSampler sampler, RngStream& stream) {
  double acc = 0.0;
  if (sampler == LatentSampler::kIid) {
    for (std::size_t r = 0; r < count; ++r) acc += sample_posterior_iid(p, stream);
    return acc / static_cast<double>(count);
  }
  GibbsState state{gibbs_start(p), p};
  for (int w = 0; w < warmup; ++w) state = gibbs_step(state, stream);
  for (std::size_t r = 0; r < count; ++r) {
    state = gibbs_step(state, stream);
    acc += state.z;
  }
  return acc / static_cast<double>(count);
}

OneStepMoments one_step_moments(const PosteriorParams& p, std::span<const double> starts,
                                int reps, std::uint64_t seed) {
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    RngStream stream = derive_stream(seed, 0, 0, j, StreamRole::kValidation);
    for (int r = 0; r < reps; ++r) {
      const double z = gibbs_step(GibbsState{starts[j], p}, stream).z;
      const double z2 = z * z;
      s1 += z;
      s2 += z2;
      s4 += z2 * z2;
      ++count;
    }
  }
  const double n = static_cast<double>(count);
  OneStepMoments out;
  out.chains = count;
  out.mean = s1 / n;
  out.second = s2 / n;
  out.mean_se = std::sqrt(std::max(0.0, s2 / n - out.mean * out.mean) / n);
  out.second_se = std::sqrt(std::max(0.0, s4 / n - out.second * out.second) / n);
  return out;
}

}  // namespace pspider::num
