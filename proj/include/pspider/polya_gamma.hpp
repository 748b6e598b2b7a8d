#pragma once

// Polya-Gamma PG(1, c) draws and the two-block Gibbs kernel for the scalar
// latent posterior of the latent logistic model:
//
//   p(z) ∝ (1 + exp(-y c z))^{-1} · N(z; m, sigma2)
//
// Augmenting with omega ~ PG(1, c z) makes z | omega Gaussian with
// precision 1/sigma2 + omega c^2 and linear term m/sigma2 + y c / 2.

#include <span>
#include <vector>

#include "pspider/rng.hpp"

namespace pspider::num {

/// Scalar posterior of one example. c = ||X_i|| (c = 0 is accepted and
/// gives a flat likelihood), y in {-1, +1}, m = <X_i, theta> / ||X_i||.
struct PosteriorParams {
  double c = 1.0;
  double y = 1.0;
  double m = 0.0;
  double sigma2 = 1.0;
};

/// One exact draw from PG(1, |c|) by the alternating-series method.
double sample_pg1(double c, RngStream& stream);

/// Approximate PG(1, c) from the first `terms` terms of its sum-of-gammas
/// representation; kept for cross-checking the exact sampler.
double sample_pg1_truncated(double c, RngStream& stream, int terms = 200);

struct GibbsState {
  double z = 0.0;
  PosteriorParams params;
};

/// One sweep: omega ~ PG(1, c z), then z | omega.
GibbsState gibbs_step(const GibbsState& state, RngStream& stream);

/// Chain start: Gaussian-factor mean shifted by y c sigma2 / 2.
double gibbs_start(const PosteriorParams& p) noexcept;

enum class LatentSampler { kGibbs, kIid };

/// Exact i.i.d. draw by rejection: propose from N(m + y c sigma2/2, sigma2),
/// accept with probability 1 / cosh(c z / 2).
double sample_posterior_iid(const PosteriorParams& p, RngStream& stream);

/// Mean of `count` latent draws after `warmup` discarded sweeps.
double mean_latent_draws(const PosteriorParams& p, std::size_t count, int warmup,
                         LatentSampler sampler, RngStream& stream);

/// Moments after a single Gibbs sweep applied to every start point
/// `reps` times, with their Monte Carlo standard errors.
struct OneStepMoments {
  double mean = 0.0;
  double second = 0.0;
  double mean_se = 0.0;
  double second_se = 0.0;
  std::size_t chains = 0;
};

OneStepMoments one_step_moments(const PosteriorParams& p, std::span<const double> starts,
                                int reps, std::uint64_t seed);

}  // namespace pspider::num
