// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-5 run in
// process against test-side oracles; 6-10 drive the pspider binary and
// read back its trace and iterate files.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pspider/algorithms.hpp"
#include "pspider/data_io.hpp"
#include "pspider/experiment.hpp"
#include "pspider/logit_model.hpp"
#include "pspider/polya_gamma.hpp"

using namespace pspider;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + PSPIDER_CLI + "\" " + args +
                          " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<io::TraceFile> read_runs(const fs::path& dir, int runs) {
  std::vector<io::TraceFile> out;
  for (int r = 0; r < runs; ++r) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03d.trace.csv", r);
    out.push_back(io::read_trace(dir / name));
  }
  return out;
}

// median over runs of the record (t, k)
std::map<std::pair<int, int>, double> medians_by_tk(const std::vector<io::TraceFile>& runs) {
  std::map<std::pair<int, int>, std::vector<double>> acc;
  for (const auto& tr : runs)
    for (const auto& row : tr.rows) acc[{row.t, row.k}].push_back(row.sq_move_over_gamma2);
  std::map<std::pair<int, int>, double> out;
  for (auto& [key, v] : acc) out[key] = median(v);
  return out;
}

logit::Dataset synthetic(std::size_t n, std::size_t d, std::uint64_t seed) {
  return io::generate_synthetic(n, d, 0.1, experiment::default_theta(d), seed);
}

// ---------------------------------------------------------------- 1 and 2

Outcome em_reduction() {
  const logit::LogitModel base(synthetic(50, 3, 1), {});
  const ModelOverride model(base, {true, true});
  SpiderConfig cfg;
  cfg.k_out = 11;
  cfg.k_in = 1;
  cfg.batch = 50;
  cfg.gamma = PiecewiseSchedule(1.0);
  cfg.gamma0 = PiecewiseSchedule(1.0);
  cfg.refresh_fraction = 1.0;
  const auto trace = run_3p_spider(model, cfg, StatVector::Zero(3));
  const int iters = static_cast<int>(trace.iterates.size()) - 1;
  const auto em = run_exact_em(base, iters, ParamVector::Zero(3));
  double worst = 0.0;
  for (std::size_t j = 0; j < trace.iterates.size(); ++j) {
    worst = std::max(worst, (trace.iterates[j].s - em.stats[j]).cwiseAbs().maxCoeff());
    worst = std::max(worst, (base.t_map(trace.iterates[j].s) - em.thetas[j]).cwiseAbs().maxCoeff());
  }
  return {iters >= 20 && worst <= 1e-10,
          std::to_string(iters) + " iterations, max elementwise gap " + fmt(worst)};
}

Outcome em_monotone() {
  const logit::LogitModel model(synthetic(50, 3, 1), {});
  const auto em = run_exact_em(model, 100, ParamVector::Zero(3));
  double worst = -1e300;
  for (std::size_t k = 1; k < em.objective.size(); ++k) {
    worst = std::max(worst, em.objective[k] - em.objective[k - 1]);
  }
  return {em.objective.size() == 101 && worst <= 1e-10,
          "largest increase " + fmt(worst) + ", F: " + fmt(em.objective.front()) + " -> " +
              fmt(em.objective.back())};
}

// ---------------------------------------------------------------- 3

Outcome gradient_identity() {
  const logit::LogitModel model(synthetic(200, 3, 2), {});
  auto rng = num::derive_stream(3, 0, 0, 0, num::StreamRole::kAuxiliary);
  const double h = 1e-5;
  auto w = [&](const StatVector& s) { return *model.objective(model.t_map(s)); };
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    StatVector s(3);
    for (Eigen::Index j = 0; j < 3; ++j) s(j) = rng.normal();
    s *= std::sqrt((0.05 + 0.9 * rng.uniform()) * model.radius2() / model.omega_norm2(s));
    Eigen::VectorXd grad(3);
    for (Eigen::Index j = 0; j < 3; ++j) {
      StatVector up = s, dn = s;
      up(j) += h;
      dn(j) -= h;
      grad(j) = (w(up) - w(dn)) / (2.0 * h);
    }
    const Eigen::VectorXd bh = model.preconditioner_at(s).matrix() * model.mean_field(s);
    worst = std::max(worst, (grad + bh).norm() / bh.norm());
  }
  return {worst <= 1e-5, "worst relative residual " + fmt(worst) + " over 20 points"};
}

// ---------------------------------------------------------------- 4

Outcome sampler() {
  const num::PosteriorParams posts[] = {
      {1.0, 1.0, 0.0, 0.1}, {2.5, -1.0, 0.7, 0.1}, {4.0, 1.0, -2.0, 0.5}};
  std::string detail;
  bool ok = true;
  int idx = 0;
  for (const auto& p : posts) {
    const double want = oracle::posterior_moments(p.c, p.y, p.m, p.sigma2).mean;
    auto stream = num::derive_stream(4, 1, idx, 0, num::StreamRole::kAuxiliary);
    num::GibbsState st{num::gibbs_start(p), p};
    for (int i = 0; i < 1000; ++i) st = num::gibbs_step(st, stream);
    // batch means over 100 batches of 1000 post-warmup samples
    const int batches = 100, per = 1000;
    std::vector<double> means(batches);
    for (int b = 0; b < batches; ++b) {
      double sum = 0.0;
      for (int i = 0; i < per; ++i) {
        st = num::gibbs_step(st, stream);
        sum += st.z;
      }
      means[static_cast<std::size_t>(b)] = sum / per;
    }
    double mean = 0.0;
    for (double v : means) mean += v;
    mean /= batches;
    double ss = 0.0;
    for (double v : means) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (batches - 1) / batches);
    const double z = std::abs(mean - want) / se;
    ok = ok && z <= 5.0;
    detail += "post" + std::to_string(idx++) + " " + fmt(z) + " SE; ";
  }
  auto stream = num::derive_stream(4, 2, 0, 0, num::StreamRole::kAuxiliary);
  const long draws = 1000000;
  double sum = 0.0, sq = 0.0;
  for (long i = 0; i < draws; ++i) {
    const double v = num::sample_pg1(0.0, stream);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sq / draws - mean * mean) / (draws - 1));
  const double z = std::abs(mean - 0.25) / se;
  ok = ok && z <= 5.0;
  detail += "PG(1,0) mean " + fmt(mean) + " at " + fmt(z) + " SE";
  return {ok, detail};
}

// ---------------------------------------------------------------- 5

Outcome prox() {
  auto rng = num::derive_stream(5, 0, 0, 0, num::StreamRole::kAuxiliary);
  double worst = 0.0;
  int outside = 0;
  bool feasible = true;
  double excess = 0.0;
  for (int p = 0; p < 100; ++p) {
    const std::size_t d = 1 + static_cast<std::size_t>(p % 3);
    logit::LogitOptions opt;
    opt.tau = 0.2 + 2.0 * rng.uniform();
    opt.sigma2 = 0.05 + rng.uniform();
    const std::size_t n = 5 + static_cast<std::size_t>(rng.below(30));
    const logit::LogitModel model(io::generate_synthetic(n, d, opt.sigma2,
                                                         experiment::default_theta(d), 100 + p),
                                  opt);
    // constraint radius recomputed from an independent eigen-decomposition
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.omega());
    const double c = std::log(4.0) / (opt.tau * es.eigenvalues().minCoeff());
    StatVector sp(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < sp.size(); ++j) sp(j) = rng.normal();
    sp *= std::sqrt((0.3 + 2.7 * rng.uniform()) * c / sp.dot(model.omega() * sp));
    outside += sp.dot(model.omega() * sp) > c;
    const StatVector got = model.weighted_prox(model.preconditioner_at(sp), 0.5, sp);
    const Eigen::VectorXd want = oracle::constrained_min(model.omega(), model.omega(), c, sp);
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    // zero slack in the model's own arithmetic; an independent evaluation
    // of s'Omega s against c may differ only by rounding
    const double q = got.dot(model.omega() * got);
    excess = std::max(excess, (q - c) / c);
    feasible = feasible && model.omega_norm2(got) <= model.radius2() && q <= c * (1.0 + 1e-13);
  }
  return {worst <= 1e-6 && feasible,
          "max gap " + fmt(worst) + ", " + std::to_string(outside) + "/100 points outside K, " +
              (feasible ? "all outputs feasible" : "infeasible output") +
              ", largest independent (q - c)/c " + fmt(excess)};
}

// ---------------------------------------------------------------- 6 to 10

struct Desk {
  fs::path root;
  std::string base;  // shared configuration
  int runs = 10;
  double spider_seconds = 0.0;
  std::vector<fs::path> dumps;
  bool ok = true;
  std::string error;
};

std::string desk_config(const fs::path& out) {
  // k_in, batch, mc_budget and refresh_budget stay at their auto defaults
  return "--synth_n 2000 --synth_d 5 --sigma2 0.1 --tau 1 --gamma 0.1 --gamma0 0.1 "
         "--k_out 20 --runs 10 --seed 1 --dump_iterates true --output_dir \"" +
         out.string() + "\"";
}

bool launch(Desk& desk, const std::string& name, const std::string& extra, const std::string& env = "") {
  const fs::path dir = desk.root / name;
  fs::remove_all(dir);
  const int code = run_cli("run " + desk_config(dir) + " " + extra, desk.root / (name + ".log"), env);
  if (code != 0) {
    desk.ok = false;
    desk.error += name + " exited " + std::to_string(code) + "; ";
    return false;
  }
  for (int r = 0; r < desk.runs; ++r) {
    char f[32];
    std::snprintf(f, sizeof f, "run_%03d.iterates.csv", r);
    desk.dumps.push_back(dir / f);
  }
  return true;
}

Outcome below_online_em(Desk& desk) {
  auto t0 = Clock::now();
  if (!launch(desk, "c6_spider", "")) return {false, desk.error};
  desk.spider_seconds = seconds_since(t0);
  // Online-EM long enough to cover the epochs 3P-SPIDER reaches
  if (!launch(desk, "c6_online", "--algorithm online-em --epochs 42")) return {false, desk.error};
  const auto spider = read_runs(desk.root / "c6_spider", desk.runs);
  const auto online = read_runs(desk.root / "c6_online", desk.runs);
  const auto sp = medians_by_tk(spider);
  std::map<int, std::vector<double>> per_epoch;
  for (const auto& tr : online)
    for (const auto& row : tr.rows) per_epoch[row.t].push_back(row.sq_move_over_gamma2);
  std::map<int, double> epoch_of_t;
  for (const auto& row : spider.front().rows)
    if (row.k == 0) epoch_of_t[row.t] = row.epochs;

  bool ok = true;
  std::string fails, index_fails;
  double worst = 0.0;
  for (int t = 5; t <= 20; ++t) {
    const int e = static_cast<int>(std::ceil(epoch_of_t.at(t) - 1e-12));
    if (!per_epoch.contains(e)) return {false, "Online-EM trace does not reach epoch " + std::to_string(e)};
    const double a = sp.at({t, 0}), b = median(per_epoch.at(e));
    worst = std::max(worst, a / b);
    if (!(a < b)) {
      ok = false;
      fails += " t=" + std::to_string(t) + "(" + fmt(a) + " vs " + fmt(b) + " at epoch " +
               std::to_string(e) + ")";
    }
    if (!(a < median(per_epoch.at(t)))) index_fails += " " + std::to_string(t);
  }
  std::string detail = "matched by cumulative epochs; worst ratio " + fmt(worst);
  if (!ok) detail += "; not below at" + fails;
  detail += "; matching outer loop t to Online-EM epoch t instead: " +
            (index_fails.empty() ? std::string("below at every t") : "not below at" + index_fails);
  return {ok, detail};
}

Outcome refresh_fraction_order(Desk& desk) {
  if (!launch(desk, "c7_half", "--refresh_fraction 0.5")) return {false, desk.error};
  if (!launch(desk, "c7_quarter", "--refresh_fraction 0.25")) return {false, desk.error};
  const auto full = medians_by_tk(read_runs(desk.root / "c6_spider", desk.runs));
  const auto half = medians_by_tk(read_runs(desk.root / "c7_half", desk.runs));
  const auto quarter = medians_by_tk(read_runs(desk.root / "c7_quarter", desk.runs));
  const int k_in = read_runs(desk.root / "c6_spider", 1).front().k_in;
  bool ok = true;
  std::string fails;
  double worst = 0.0;
  for (int t = 10; t < 20; ++t) {
    const double f = full.at({t, k_in}), h = half.at({t, k_in}), q = quarter.at({t, k_in});
    worst = std::max({worst, f / h, f / q});
    if (!(f < h && f < q)) {
      ok = false;
      fails += " t=" + std::to_string(t);
    }
  }
  std::string detail = "boundary records t=10..19, worst full/other ratio " + fmt(worst);
  if (!ok) detail += "; not below at" + fails;
  return {ok, detail};
}

Outcome more_draws_lower_plateau(Desk& desk) {
  if (!launch(desk, "c8_more_mc", "--mc_budget 'auto;11:auto*5'")) return {false, desk.error};
  const auto runs_base = read_runs(desk.root / "c6_spider", desk.runs);
  const auto base = medians_by_tk(runs_base);
  const auto more = medians_by_tk(read_runs(desk.root / "c8_more_mc", desk.runs));
  const int k_in = runs_base.front().k_in;
  std::vector<double> pb, pm;
  for (int k = 0; k < k_in; ++k) {
    pb.push_back(base.at({20, k}));
    pm.push_back(more.at({20, k}));
  }
  const double a = median(pb), b = median(pm);
  return {b < a, "final-loop plateau " + fmt(a) + " -> " + fmt(b) + " with 5x draws from t=11"};
}

Outcome determinism(Desk& desk) {
  const auto t0 = Clock::now();
  if (!launch(desk, "c9_workers8", "", "PSPIDER_WORKERS=8")) return {false, desk.error};
  const double secs = seconds_since(t0);
  int identical = 0;
  for (int r = 0; r < desk.runs; ++r) {
    char f[32], g[32];
    std::snprintf(f, sizeof f, "run_%03d.trace.csv", r);
    std::snprintf(g, sizeof g, "run_%03d.iterates.csv", r);
    identical += slurp(desk.root / "c6_spider" / f) == slurp(desk.root / "c9_workers8" / f) &&
                 slurp(desk.root / "c6_spider" / g) == slurp(desk.root / "c9_workers8" / g);
  }
  const bool fast = secs < 2.0 * desk.spider_seconds;
  return {identical == desk.runs && fast,
          std::to_string(identical) + "/" + std::to_string(desk.runs) +
              " runs byte-identical; 8 workers " + fmt(secs) + " s vs 1 worker " +
              fmt(desk.spider_seconds) + " s"};
}

Outcome feasibility(const Desk& desk) {
  const auto ex = experiment::resolve_experiment({{"synth_n", "2000"}, {"synth_d", "5"}, {"output_dir", "unused"}});
  // Omega and its smallest eigenvalue rebuilt from the data
  const auto& x = ex.data.features;
  Eigen::MatrixXd om_inv = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd u = x.row(i).transpose() / x.row(i).norm();
    om_inv += u * u.transpose();
  }
  om_inv = om_inv / (0.1 * static_cast<double>(x.rows())) +
           2.0 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  const Eigen::MatrixXd om = om_inv.inverse();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om);
  const double bound = std::log(4.0) / es.eigenvalues().minCoeff() + 1e-12;
  std::size_t checked = 0, bad = 0;
  double worst = -1e300;
  for (const auto& p : desk.dumps) {
    for (const auto& it : io::read_iterates(p)) {
      const double v = it.s.dot(om * it.s);
      worst = std::max(worst, v / bound);
      ++checked;
      bad += v > bound;
    }
  }
  return {checked > 0 && bad == 0,
          std::to_string(checked) + " iterates from " + std::to_string(desk.dumps.size()) +
              " dumps, " + std::to_string(bad) + " violations, max tau s'Omega s / bound " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "pspider_acceptance";
  fs::create_directories(work);
  Desk desk;
  desk.root = work;

  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> body;
  };
  const std::vector<Criterion> criteria{
      {1, "EM reduction", 10, em_reduction},
      {2, "EM monotonicity", 30, em_monotone},
      {3, "gradient identity", 60, gradient_identity},
      {4, "sampler correctness", 120, sampler},
      {5, "prox correctness", 60, prox},
      {6, "3P-SPIDER below Online-EM", 1800, [&] { return below_online_em(desk); }},
      {7, "full refresh below partial refresh", 2700, [&] { return refresh_fraction_order(desk); }},
      {8, "more Monte Carlo draws lower the plateau", 2700, [&] { return more_draws_lower_plateau(desk); }},
      {9, "determinism", 3600, [&] { return determinism(desk); }},
      {10, "feasibility invariant", 600, [&] { return feasibility(desk); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [PRIMARY] " << c.id << " " << c.name << ": "
              << o.detail << " (" << fmt(secs) << " s, limit " << c.limit_s << " s"
              << (in_time ? "" : ", over time") << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
