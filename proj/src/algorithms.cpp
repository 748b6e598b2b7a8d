#include "pspider/algorithms.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <functional>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pspider/errors.hpp"
#include "pspider/parallel.hpp"

namespace pspider {

namespace {

double parse_number(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("bad number '" + text + "' in schedule '" + context + "'");
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

PiecewiseSchedule::PiecewiseSchedule(double value) : pieces_{{1, value}} {}

PiecewiseSchedule PiecewiseSchedule::parse(const std::string& text) {
  PiecewiseSchedule out;
  std::stringstream ss(text);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ';')) {
    if (first) {
      out.pieces_ = {{1, parse_number(part, text)}};
      first = false;
      continue;
    }
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("schedule piece '" + part + "' lacks 'from_t:value'");
    }
    const double from = parse_number(part.substr(0, colon), text);
    if (from != std::floor(from) || from < 2 || from > 1e6) {
      throw ConfigError("schedule change point must be an integer >= 2 in '" + text + "'");
    }
    if (static_cast<int>(from) <= out.pieces_.back().first) {
      throw ConfigError("schedule change points must increase in '" + text + "'");
    }
    out.then(static_cast<int>(from), parse_number(part.substr(colon + 1), text));
  }
  if (first) throw ConfigError("empty schedule");
  return out;
}

std::string PiecewiseSchedule::format() const {
  std::string out = shortest(pieces_.front().second);
  for (std::size_t j = 1; j < pieces_.size(); ++j) {
    out += ";" + std::to_string(pieces_[j].first) + ":" + shortest(pieces_[j].second);
  }
  return out;
}

PiecewiseSchedule& PiecewiseSchedule::then(int from_t, double value) {
  if (from_t <= pieces_.back().first) throw ConfigError("schedule change points must increase");
  pieces_.emplace_back(from_t, value);
  return *this;
}

double PiecewiseSchedule::at(int t) const {
  double v = pieces_.front().second;
  for (const auto& [from, value] : pieces_) {
    if (t >= from) v = value;
  }
  return v;
}

double PiecewiseSchedule::max_over(int t_max) const {
  double v = at(1);
  for (const auto& [from, value] : pieces_) {
    if (from <= t_max) v = std::max(v, value);
  }
  return v;
}

double PiecewiseSchedule::min_over(int t_max) const {
  double v = at(1);
  for (const auto& [from, value] : pieces_) {
    if (from <= t_max) v = std::min(v, value);
  }
  return v;
}

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t b, Sampling mode,
                                          num::RngStream& stream) {
  if (b == 0) throw ConfigError("minibatch size must be positive");
  if (n == 0) throw ConfigError("cannot sample from an empty dataset");
  std::vector<std::size_t> out;
  out.reserve(b);
  if (mode == Sampling::kWithReplacement) {
    for (std::size_t j = 0; j < b; ++j) out.push_back(stream.below(n));
    return out;
  }
  if (b > n) {
    throw ConfigError("minibatch of " + std::to_string(b) + " exceeds " + std::to_string(n) +
                      " examples without replacement");
  }
  // Partial Fisher-Yates.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t j = 0; j < b; ++j) {
    const std::size_t pick = j + stream.below(n - j);
    std::swap(pool[j], pool[pick]);
    out.push_back(pool[j]);
  }
  return out;
}

std::size_t refresh_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("refresh_fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  if (fraction == 1.0) return n;
  const auto size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(size, 1, n);
}

namespace {

void require_feasible(const LatentModel& model, const StatVector& s, const char* where) {
  if (!s.allFinite()) throw NumericalError(std::string(where) + ": iterate is not finite");
  if (!model.is_feasible(s)) {
    throw NumericalError(std::string(where) + ": prox returned an infeasible iterate");
  }
}

// Mean of approx_stat over `batch` at `s`, reduced in the order given.
StatVector batch_mean(const LatentModel& model, const std::vector<std::size_t>& batch,
                      const StatVector& s, std::size_t budget, unsigned workers,
                      const std::function<num::RngStream(std::size_t slot)>& stream_for) {
  std::vector<StatVector> parts(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t j) {
    parts[j] = model.approx_stat(batch[j], s, budget, stream_for(j));
  });
  StatVector acc = StatVector::Zero(s.size());
  for (const auto& p : parts) {
    if (p.size() != s.size()) throw DimensionError("approx_stat returned a wrong-length vector", 0);
    acc += p;
  }
  return acc / static_cast<double>(batch.size());
}

std::size_t to_budget(double value, const char* name) {
  if (!(value >= 1.0) || value != std::floor(value) || value > 1e12) {
    throw ConfigError(std::string(name) + " must be a positive integer, got " +
                      std::to_string(value));
  }
  return static_cast<std::size_t>(value);
}

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

StatVector project_init(const LatentModel& model, const StatVector& init) {
  if (init.size() != static_cast<Eigen::Index>(model.stat_dim())) {
    throw DimensionError("initial statistic has length " + std::to_string(init.size()), 0);
  }
  if (model.is_feasible(init)) return init;
  StatVector s = model.weighted_prox(model.preconditioner_at(init), 1.0, init);
  if (!model.is_feasible(s)) throw NumericalError("initial statistic could not be projected");
  return s;
}

}  // namespace

IterateState inner_step(const IterateState& state, const StatVector& sum_new,
                        const StatVector& sum_old, double gamma, const LatentModel& model) {
  const auto q = state.s_hat.size();
  if (sum_new.size() != q || sum_old.size() != q || state.s_cv.size() != q) {
    throw DimensionError("inner_step: length mismatch", 0);
  }
  if (!(gamma > 0.0)) throw ConfigError("inner step size must be positive");
  IterateState next = state;
  next.s_cv = state.s_cv + (sum_new - sum_old);
  const StatVector half = state.s_hat + gamma * (next.s_cv - state.s_hat);
  next.s_hat = model.weighted_prox(model.preconditioner_at(state.s_hat), gamma, half);
  next.s_hat_prev = state.s_hat;
  next.k = state.k + 1;
  return next;
}

StatVector refresh_control_variate(const LatentModel& model, const StatVector& anchor,
                                   const SpiderConfig& cfg, int t) {
  const std::size_t n = model.num_examples();
  const std::size_t size = refresh_size(n, cfg.refresh_fraction);
  if (cfg.refresh_budget < 1) throw ConfigError("refresh_budget must be positive");
  std::vector<std::size_t> subset(n);
  if (size == n) {
    std::iota(subset.begin(), subset.end(), std::size_t{0});
  } else {
    auto stream = num::derive_stream(cfg.seed, t, -1, 0, num::StreamRole::kRefreshSubset);
    subset = sample_minibatch(n, size, Sampling::kWithoutReplacement, stream);
    std::sort(subset.begin(), subset.end());
  }
  return batch_mean(model, subset, anchor, cfg.refresh_budget, cfg.workers, [&](std::size_t j) {
    return num::derive_stream(cfg.seed, t, -1, subset[j], num::StreamRole::kRefresh);
  });
}

IterateState outer_boundary_step(const IterateState& state, double gamma0,
                                 const LatentModel& model) {
  if (!(gamma0 >= 0.0)) throw ConfigError("boundary step size must be nonnegative");
  IterateState next = state;
  const StatVector half = state.s_hat + gamma0 * (state.s_cv - state.s_hat);
  next.s_hat = model.weighted_prox(model.preconditioner_at(state.s_hat), gamma0, half);
  next.s_hat_prev = state.s_hat;
  next.t = state.t + 1;
  next.k = 0;
  return next;
}

void check_config(const SpiderConfig& cfg, std::size_t n) {
  if (cfg.k_out < 1) throw ConfigError("k_out must be >= 1");
  if (cfg.k_in < 1) throw ConfigError("k_in must be >= 1");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (cfg.sampling == Sampling::kWithoutReplacement && cfg.batch > n) {
    throw ConfigError("batch " + std::to_string(cfg.batch) + " exceeds n = " + std::to_string(n));
  }
  for (int t = 1; t <= cfg.k_out; ++t) {
    if (!(cfg.gamma.at(t) > 0.0)) {
      throw ConfigError("gamma must be positive; outer loop " + std::to_string(t) + " has " +
                        std::to_string(cfg.gamma.at(t)));
    }
    if (!(cfg.gamma0.at(t) >= 0.0)) {
      throw ConfigError("gamma0 must be nonnegative at outer loop " + std::to_string(t));
    }
    to_budget(cfg.mc_budget.at(t), "mc_budget");
  }
  if (cfg.refresh_budget < 1) throw ConfigError("refresh_budget must be >= 1");
  refresh_size(n, cfg.refresh_fraction);
  if (cfg.k_out >= 4096 || cfg.k_in >= 4095) {
    throw ConfigError("k_out must be < 4096 and k_in < 4095");
  }
}

RunTrace run_3p_spider(const LatentModel& model, const SpiderConfig& cfg, const StatVector& init) {
  const std::size_t n = model.num_examples();
  check_config(cfg, n);
  const Clock clock(cfg.record_wall_time);
  const double nd = static_cast<double>(n);
  // Epochs are kept as an exact count of statistic evaluations.
  const std::size_t refresh_evals = refresh_size(n, cfg.refresh_fraction);
  std::size_t evals = refresh_evals;

  RunTrace trace;
  IterateState state;
  state.s_hat = project_init(model, init);
  state.s_hat_prev = state.s_hat;
  state.s_cv = refresh_control_variate(model, state.s_hat, cfg, 1);
  trace.iterates.push_back({1, 0, state.s_hat});

  for (int t = 1; t <= cfg.k_out; ++t) {
    const std::size_t budget = to_budget(cfg.mc_budget.at(t), "mc_budget");
    const double gamma = cfg.gamma.at(t);
    for (int k = 0; k < cfg.k_in; ++k) {
      auto batch_stream = num::derive_stream(cfg.seed, t, k, 0, num::StreamRole::kBatch);
      auto batch = sample_minibatch(n, cfg.batch, cfg.sampling, batch_stream);
      std::sort(batch.begin(), batch.end());
      // Without replacement each example appears once and keys its own
      // stream; with replacement duplicates are keyed by slot instead.
      const bool by_slot = cfg.sampling == Sampling::kWithReplacement;
      auto key = [&](std::size_t j) -> std::uint64_t { return by_slot ? j : batch[j]; };
      const auto old_role =
          cfg.couple_pairs ? num::StreamRole::kInnerNew : num::StreamRole::kInnerOld;
      const StatVector sum_new =
          batch_mean(model, batch, state.s_hat, budget, cfg.workers, [&](std::size_t j) {
            return num::derive_stream(cfg.seed, t, k, key(j), num::StreamRole::kInnerNew);
          });
      const StatVector sum_old =
          batch_mean(model, batch, state.s_hat_prev, budget, cfg.workers, [&](std::size_t j) {
            return num::derive_stream(cfg.seed, t, k, key(j), old_role);
          });
      const StatVector before = state.s_hat;
      state = inner_step(state, sum_new, sum_old, gamma, model);
      state.t = t;
      require_feasible(model, state.s_hat, "inner step");
      evals += cfg.batch;
      trace.steps.push_back({t, k, gamma, stationarity_metric(before, state.s_hat, gamma),
                             static_cast<double>(evals) / nd, clock.ms()});
      trace.iterates.push_back({t, k + 1, state.s_hat});
    }
    if (t == cfg.k_out) break;

    // refresh at the new anchor, then the boundary step
    state.s_cv = refresh_control_variate(model, state.s_hat, cfg, t + 1);
    evals += refresh_evals;
    const double gamma0 = cfg.gamma0.at(t + 1);
    const StatVector before = state.s_hat;
    state = outer_boundary_step(state, gamma0, model);
    require_feasible(model, state.s_hat, "boundary step");
    const double move = gamma0 > 0.0 ? stationarity_metric(before, state.s_hat, gamma0) : 0.0;
    trace.steps.push_back({t, cfg.k_in, gamma0, move, static_cast<double>(evals) / nd, clock.ms()});
    trace.iterates.push_back({t + 1, 0, state.s_hat});
  }
  trace.final_state = state;
  trace.epochs = static_cast<double>(evals) / nd;
  return trace;
}

RunTrace run_online_em(const LatentModel& model, const OnlineEmConfig& cfg,
                       const StatVector& init) {
  const std::size_t n = model.num_examples();
  if (cfg.epochs < 1 || cfg.epochs >= 4096) throw ConfigError("epochs must lie in [1, 4095]");
  if (cfg.batch < 1) throw ConfigError("Online-EM batch must be >= 1");
  if (cfg.sampling == Sampling::kWithoutReplacement && cfg.batch > n) {
    throw ConfigError("Online-EM batch exceeds n");
  }
  const std::size_t per_epoch = (n + cfg.batch - 1) / cfg.batch;
  if (per_epoch >= 4095) throw ConfigError("Online-EM batch too small: too many iterations per epoch");
  const Clock clock(cfg.record_wall_time);
  const double nd = static_cast<double>(n);

  RunTrace trace;
  StatVector s = init;
  if (cfg.apply_prox) s = project_init(model, init);
  trace.iterates.push_back({1, 0, s});
  std::size_t evals = 0;
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double gamma = cfg.gamma.at(e);
    if (!(gamma > 0.0)) throw ConfigError("Online-EM step size must be positive");
    const std::size_t budget = to_budget(cfg.mc_budget.at(e), "mc_budget");
    for (std::size_t k = 0; k < per_epoch; ++k) {
      const long kk = static_cast<long>(k);
      auto batch_stream = num::derive_stream(cfg.seed, e, kk, 0, num::StreamRole::kBatch);
      auto batch = sample_minibatch(n, cfg.batch, cfg.sampling, batch_stream);
      std::sort(batch.begin(), batch.end());
      const bool by_slot = cfg.sampling == Sampling::kWithReplacement;
      const StatVector mean = batch_mean(model, batch, s, budget, cfg.workers, [&](std::size_t j) {
        return num::derive_stream(cfg.seed, e, kk, by_slot ? j : batch[j],
                                  num::StreamRole::kInnerNew);
      });
      const StatVector half = s + gamma * (mean - s);
      StatVector next = cfg.apply_prox ? model.weighted_prox(model.preconditioner_at(s), gamma, half)
                                       : half;
      if (cfg.apply_prox) require_feasible(model, next, "Online-EM step");
      evals += cfg.batch;
      trace.steps.push_back({e, static_cast<int>(k), gamma, stationarity_metric(s, next, gamma),
                             static_cast<double>(evals) / nd, clock.ms()});
      s = std::move(next);
      trace.iterates.push_back({e, static_cast<int>(k) + 1, s});
    }
  }
  trace.final_state.s_hat = s;
  trace.final_state.s_hat_prev = s;
  trace.final_state.s_cv = s;
  trace.final_state.t = cfg.epochs;
  trace.epochs = static_cast<double>(evals) / nd;
  return trace;
}

ExactEmTrace run_exact_em(const LatentModel& model, int iters, const ParamVector& theta0) {
  if (iters < 0) throw ConfigError("exact EM needs a nonnegative iteration count");
  auto s = model.stat_from_param(theta0);
  if (!s) throw ConfigError("exact EM: the model cannot map parameters to statistics");
  ExactEmTrace out;
  auto record = [&](const StatVector& stat) {
    const ParamVector theta = model.t_map(stat);
    const auto f = model.objective(theta);
    if (!f) throw ConfigError("exact EM: the model has no objective oracle");
    out.stats.push_back(stat);
    out.thetas.push_back(theta);
    out.objective.push_back(*f);
  };
  record(*s);
  for (int it = 0; it < iters; ++it) {
    const auto field = exact_mean_field(model, out.stats.back());
    if (!field) throw ConfigError("exact EM: the model has no exact-statistics oracle");
    record(StatVector(out.stats.back() + *field));
  }
  return out;
}

}  // namespace pspider
