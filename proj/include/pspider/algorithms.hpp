#pragma once

// 3P-SPIDER, perturbed Online-EM and exact EM, all written
// against the LatentModel contract.
//
// Index conventions. An inner step at (t, k) moves S^_{t,k} to S^_{t,k+1}
// with step gamma_{t,k+1}; its record carries (t, k). The outer boundary
// after loop t moves S^_{t,k_in} = S^_{t+1,-1} to S^_{t+1,0} with
// gamma_{t+1,0}; its record carries (t, k_in). No boundary follows the last
// outer loop, so a run performs exactly k_out control-variate refreshes.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pspider/em_core.hpp"

namespace pspider {

/// Piecewise-constant function of the outer index t >= 1, written
/// "v" or "v;t1:v1;t2:v2" (value v until t1-1, then v1 until t2-1, ...).
class PiecewiseSchedule {
 public:
  PiecewiseSchedule() = default;
  explicit PiecewiseSchedule(double value);

  static PiecewiseSchedule parse(const std::string& text);
  std::string format() const;

  /// Adds a change point: from outer index `from_t` on the value is `value`.
  PiecewiseSchedule& then(int from_t, double value);
  double at(int t) const;

  /// Largest and smallest value over t = 1..t_max.
  double max_over(int t_max) const;
  double min_over(int t_max) const;

 private:
  std::vector<std::pair<int, double>> pieces_{{1, 0.0}};
};

enum class Sampling { kWithoutReplacement, kWithReplacement };

struct SpiderConfig {
  int k_out = 20;
  int k_in = 1;
  std::size_t batch = 1;
  PiecewiseSchedule gamma{0.1};      // gamma_{t,k}, k >= 1
  PiecewiseSchedule gamma0{0.1};     // gamma_{t,0}
  PiecewiseSchedule mc_budget{1.0};  // m_{t,k}
  std::size_t refresh_budget = 1;    // m'
  double refresh_fraction = 1.0;
  Sampling sampling = Sampling::kWithoutReplacement;
  bool couple_pairs = false;
  std::uint64_t seed = 1;
  unsigned workers = 1;          // never affects results
  bool record_wall_time = false;  // wall_ms is 0 otherwise
};

struct StepRecord {
  int t = 0;
  int k = 0;
  double gamma = 0.0;
  double sq_move_over_gamma2 = 0.0;
  double epochs = 0.0;  // cumulative, in units of n statistic evaluations
  double wall_ms = 0.0;
};

/// An iterate S^_{t,k} emitted by a prox step (or the initial point).
struct IterateRecord {
  int t = 0;
  int k = 0;
  StatVector s;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  std::vector<IterateRecord> iterates;
  IterateState final_state;
  double epochs = 0.0;
};

/// b indices from [0, n). Without replacement this is a uniformly random
/// b-subset in draw order (a permutation when b = n).
std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t b, Sampling mode,
                                          num::RngStream& stream);

/// Size of the refresh subset, ceil(f n).
std::size_t refresh_size(std::size_t n, double fraction);

/// Inner step: S <- S + (sum_new - sum_old); S^ <- Prox_{B(S^), gamma g}(S^ + gamma (S - S^)).
/// The sums are already divided by b.
IterateState inner_step(const IterateState& state, const StatVector& sum_new,
                        const StatVector& sum_old, double gamma, const LatentModel& model);

/// Control-variate refresh: mean of approx_stat at the anchor over the refresh subset of
/// outer loop t (all examples when refresh_fraction = 1).
StatVector refresh_control_variate(const LatentModel& model, const StatVector& anchor,
                                   const SpiderConfig& cfg, int t);

/// Outer boundary step. state.s_hat is S^_{t+1,-1} and state.s_cv is S_{t+1,0}.
IterateState outer_boundary_step(const IterateState& state, double gamma0,
                                 const LatentModel& model);

/// Throws ConfigError naming the first invalid field.
void check_config(const SpiderConfig& cfg, std::size_t n);

/// The full 3P-SPIDER run. An infeasible `init` is first projected with the prox.
RunTrace run_3p_spider(const LatentModel& model, const SpiderConfig& cfg, const StatVector& init);

struct OnlineEmConfig {
  int epochs = 40;
  std::size_t batch = 1;
  PiecewiseSchedule gamma{0.1};      // by epoch
  PiecewiseSchedule mc_budget{1.0};  // by epoch
  Sampling sampling = Sampling::kWithoutReplacement;
  bool apply_prox = true;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool record_wall_time = false;
};

/// S^ <- Prox(S^ + gamma (b^{-1} sum_B s^_i(S^) - S^)). Records carry
/// (epoch, iteration within the epoch); an epoch is ceil(n / b) iterations.
RunTrace run_online_em(const LatentModel& model, const OnlineEmConfig& cfg,
                       const StatVector& init);

struct ExactEmTrace {
  std::vector<ParamVector> thetas;
  std::vector<StatVector> stats;  // stats[k] with T(stats[k]) = thetas[k]
  std::vector<double> objective;
};

/// theta_{k+1} = T(s̄(theta_k)), iterated in expectation space. Requires
/// the exact-statistics, inverse-map and objective oracles.
ExactEmTrace run_exact_em(const LatentModel& model, int iters, const ParamVector& theta0);

}  // namespace pspider
