#include "pspider/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pspider/data_io.hpp"
#include "pspider/em_core.hpp"
#include "pspider/errors.hpp"
#include "pspider/polya_gamma.hpp"

namespace pspider::experiment {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double get_double(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
  return out;
}

long long get_int(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  return out;
}

bool get_bool(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size()) {
      throw ConfigError(key + ": bad list entry '" + part + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string fmt_num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t ceil_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r < n) ++r;
  while (r > 0 && (r - 1) * (r - 1) >= n) --r;
  return r;
}

// "auto" and "auto*K" tokens of a budget schedule, resolved against n.
std::string resolve_budget_tokens(const std::string& text, std::size_t base) {
  std::string out;
  std::stringstream ss(text);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ';')) {
    std::string head, value = part;
    if (!first) {
      const auto colon = part.find(':');
      if (colon == std::string::npos) throw ConfigError("schedule piece '" + part + "' lacks ':'");
      head = part.substr(0, colon + 1);
      value = part.substr(colon + 1);
    }
    if (value == "auto") {
      value = std::to_string(base);
    } else if (value.starts_with("auto*")) {
      const std::string factor = value.substr(5);
      double f = 0.0;
      auto [ptr, ec] = std::from_chars(factor.data(), factor.data() + factor.size(), f);
      if (ec != std::errc() || ptr != factor.data() + factor.size() || !(f > 0.0)) {
        throw ConfigError("bad budget multiplier '" + value + "'");
      }
      value = fmt_num(std::ceil(f * static_cast<double>(base)));
    }
    out += (first ? "" : ";") + head + value;
    first = false;
  }
  return out;
}

Sampling parse_sampling(const std::string& v) {
  if (v == "without") return Sampling::kWithoutReplacement;
  if (v == "with") return Sampling::kWithReplacement;
  throw ConfigError("sampling must be 'with' or 'without', got '" + v + "'");
}

}  // namespace

const ConfigMap& default_config() {
  static const ConfigMap defaults = {
      {"dataset", "synthetic"},
      {"synth_n", "2000"},
      {"synth_d", "5"},
      {"synth_seed", "1"},
      {"synth_theta", "auto"},
      {"sigma2", "0.1"},
      {"tau", "1"},
      {"quad_order", "128"},
      {"sampler", "gibbs"},
      {"gibbs_warmup", "10"},
      {"algorithm", "3p-spider"},
      {"runs", "25"},
      {"seed", "1"},
      {"k_out", "20"},
      {"k_in", "auto"},
      {"batch", "auto"},
      {"gamma", "0.1"},
      {"gamma0", "0.1"},
      {"mc_budget", "auto"},
      {"refresh_budget", "auto"},
      {"refresh_fraction", "1"},
      {"sampling", "without"},
      {"couple_pairs", "false"},
      {"init", "zero"},
      {"epochs", "auto"},
      {"online_prox", "true"},
      {"em_iters", "100"},
      {"output_dir", "out"},
      {"dump_iterates", "false"},
      {"record_wall_time", "false"},
      {"prox_radius_scale", "1"},
  };
  return defaults;
}

ConfigMap parse_config_text(const std::string& text, const std::string& source) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  int ln = 0;
  while (std::getline(ss, line)) {
    ++ln;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(ln);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!default_config().contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (out.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

ConfigMap load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + "=" + v + "\n";
  return out;
}

std::string config_digest(const ConfigMap& effective) {
  static const char* kExcluded[] = {"seed", "runs", "output_dir", "dump_iterates",
                                    "record_wall_time"};
  ConfigMap kept = effective;
  for (const char* k : kExcluded) kept.erase(k);
  return io::hex64(io::fnv1a64(format_config(kept)));
}

Eigen::VectorXd default_theta(std::size_t d) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    theta(static_cast<Eigen::Index>(j)) = (j % 2 ? -1.0 : 1.0) / std::ldexp(1.0, static_cast<int>(j / 2));
  }
  return theta;
}

Experiment resolve_experiment(const ConfigMap& user) {
  ConfigMap c = default_config();
  for (const auto& [k, v] : user) {
    if (!c.contains(k)) throw ConfigError("unknown key '" + k + "'");
    c[k] = v;
  }
  Experiment ex;

  // Dataset.
  if (c["dataset"] == "synthetic") {
    const long long n = get_int(c, "synth_n");
    const long long d = get_int(c, "synth_d");
    if (n < 1 || d < 1) throw ConfigError("synth_n and synth_d must be >= 1");
    Eigen::VectorXd theta;
    if (c["synth_theta"] == "auto") {
      theta = default_theta(static_cast<std::size_t>(d));
    } else {
      const auto v = parse_list(c["synth_theta"], "synth_theta");
      theta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    ex.data = io::generate_synthetic(static_cast<std::size_t>(n), static_cast<std::size_t>(d),
                                     get_double(c, "sigma2"), theta,
                                     static_cast<std::uint64_t>(get_int(c, "synth_seed")));
  } else {
    ex.data = io::load_dataset(c["dataset"]);
  }
  logit::check_dataset(ex.data);
  const std::size_t n = ex.data.size();
  const std::size_t root = ceil_sqrt(n);

  // Model.
  ex.model.sigma2 = get_double(c, "sigma2");
  ex.model.tau = get_double(c, "tau");
  ex.model.quad_order = static_cast<int>(get_int(c, "quad_order"));
  ex.model.gibbs_warmup = static_cast<int>(get_int(c, "gibbs_warmup"));
  ex.model.prox_radius_scale = get_double(c, "prox_radius_scale");
  if (c["sampler"] == "gibbs") {
    ex.model.sampler = num::LatentSampler::kGibbs;
  } else if (c["sampler"] == "iid") {
    ex.model.sampler = num::LatentSampler::kIid;
  } else {
    throw ConfigError("sampler must be 'gibbs' or 'iid'");
  }
  if (ex.model.gibbs_warmup < 0) throw ConfigError("gibbs_warmup must be >= 0");

  // Resolved hyperparameters.
  if (c["k_in"] == "auto") c["k_in"] = std::to_string((root + 9) / 10);
  if (c["batch"] == "auto") {
    c["batch"] = std::to_string(std::min(n, ceil_sqrt(100 * n)));
  } else if (c["batch"] == "full") {
    c["batch"] = std::to_string(n);
  }
  if (c["refresh_budget"] == "auto") c["refresh_budget"] = std::to_string(10 * root);
  c["mc_budget"] = PiecewiseSchedule::parse(resolve_budget_tokens(c["mc_budget"], 2 * root)).format();
  c["gamma"] = PiecewiseSchedule::parse(c["gamma"]).format();
  c["gamma0"] = PiecewiseSchedule::parse(c["gamma0"]).format();
  if (c["epochs"] == "auto") c["epochs"] = std::to_string(2 * get_int(c, "k_out"));

  ex.algorithm = c["algorithm"];
  if (ex.algorithm != "3p-spider" && ex.algorithm != "online-em" && ex.algorithm != "exact-em") {
    throw ConfigError("algorithm must be 3p-spider, online-em or exact-em");
  }
  ex.runs = static_cast<int>(get_int(c, "runs"));
  if (ex.runs < 1) throw ConfigError("runs must be >= 1");
  ex.seed = static_cast<std::uint64_t>(get_int(c, "seed"));

  const long long batch = get_int(c, "batch");
  const long long refresh_budget = get_int(c, "refresh_budget");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (refresh_budget < 1) throw ConfigError("refresh_budget must be >= 1");

  SpiderConfig& s = ex.spider;
  s.k_out = static_cast<int>(get_int(c, "k_out"));
  s.k_in = static_cast<int>(get_int(c, "k_in"));
  s.batch = static_cast<std::size_t>(batch);
  s.gamma = PiecewiseSchedule::parse(c["gamma"]);
  s.gamma0 = PiecewiseSchedule::parse(c["gamma0"]);
  s.mc_budget = PiecewiseSchedule::parse(c["mc_budget"]);
  s.refresh_budget = static_cast<std::size_t>(refresh_budget);
  s.refresh_fraction = get_double(c, "refresh_fraction");
  s.sampling = parse_sampling(c["sampling"]);
  s.couple_pairs = get_bool(c, "couple_pairs");
  s.seed = ex.seed;
  s.record_wall_time = get_bool(c, "record_wall_time");

  OnlineEmConfig& o = ex.online;
  o.epochs = static_cast<int>(get_int(c, "epochs"));
  o.batch = s.batch;
  o.gamma = s.gamma;
  o.mc_budget = s.mc_budget;
  o.sampling = s.sampling;
  o.apply_prox = get_bool(c, "online_prox");
  o.seed = ex.seed;
  o.record_wall_time = s.record_wall_time;

  ex.em_iters = static_cast<int>(get_int(c, "em_iters"));
  ex.init = c["init"];
  ex.output_dir = c["output_dir"];
  ex.dump_iterates = get_bool(c, "dump_iterates");

  if (ex.algorithm == "3p-spider") check_config(s, n);
  ex.effective = c;
  ex.digest = config_digest(c);
  return ex;
}

StatVector initial_statistic(const Experiment& ex, std::size_t q) {
  if (ex.init == "zero") return StatVector::Zero(static_cast<Eigen::Index>(q));
  const auto v = parse_list(ex.init, "init");
  if (v.size() != q) {
    throw ConfigError("init has " + std::to_string(v.size()) + " entries, expected " +
                      std::to_string(q));
  }
  return Eigen::Map<const StatVector>(v.data(), static_cast<Eigen::Index>(q));
}

RunOutput execute_run(const Experiment& ex, const logit::LogitModel& model, int r,
                      unsigned workers) {
  const std::uint64_t seed = ex.seed + static_cast<std::uint64_t>(r);
  const StatVector init = initial_statistic(ex, model.stat_dim());
  RunOutput out;
  if (ex.algorithm == "3p-spider") {
    SpiderConfig cfg = ex.spider;
    cfg.seed = seed;
    cfg.workers = workers;
    out.trace = run_3p_spider(model, cfg, init);
  } else if (ex.algorithm == "online-em") {
    OnlineEmConfig cfg = ex.online;
    cfg.seed = seed;
    cfg.workers = workers;
    out.trace = run_online_em(model, cfg, init);
  } else {
    const auto em = run_exact_em(model, ex.em_iters, model.t_map(init));
    for (std::size_t k = 0; k < em.stats.size(); ++k) {
      out.trace.iterates.push_back({static_cast<int>(k) + 1, 0, em.stats[k]});
      if (k + 1 < em.stats.size()) {
        out.trace.steps.push_back({static_cast<int>(k) + 1, 0, 1.0,
                                   (em.stats[k + 1] - em.stats[k]).squaredNorm(),
                                   static_cast<double>(k + 1), 0.0});
      }
    }
    out.trace.epochs = static_cast<double>(ex.em_iters);
    out.trace.final_state.s_hat = em.stats.back();
    out.em_thetas = em.thetas;
    out.em_objective = em.objective;
  }
  return out;
}

unsigned workers_from_env() {
  const char* v = std::getenv("PSPIDER_WORKERS");
  if (!v || !*v) return 1;
  unsigned w = 0;
  auto [ptr, ec] = std::from_chars(v, v + std::strlen(v), w);
  if (ec != std::errc() || *ptr != '\0' || w == 0) {
    throw ConfigError(std::string("PSPIDER_WORKERS must be a positive integer, got '") + v + "'");
  }
  return w;
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "validation failed: " << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

// Parses `[config] --key value ...`. Returns false when help was printed
// or parsing failed (then `code` holds the exit code).
bool parse_experiment_args(const std::vector<std::string>& args, const std::string& name,
                           const std::string& description, ConfigMap& user, std::ostream& out,
                           std::ostream& err, int& code) {
  CLI::App app{description, "pspider " + name};
  std::string config_path;
  app.add_option("config", config_path, "key=value configuration file");
  std::map<std::string, std::string> overrides;
  for (const auto& [key, value] : default_config()) {
    app.add_option("--" + key, overrides[key], "default: " + value);
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    code = app.exit(e, out, err);
    if (code != 0) code = 2;
    return false;
  }
  if (!config_path.empty()) user = load_config_file(config_path);
  for (const auto& [key, value] : default_config()) {
    if (app.count("--" + key) > 0) user[key] = overrides[key];
  }
  return true;
}

std::string run_name(int r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03d", r);
  return buf;
}

}  // namespace

int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    CLI::App app{"Generate a synthetic latent-logit dataset", "pspider synth"};
    long long n = 1000, d = 5;
    std::uint64_t seed = 1;
    double sigma2 = 0.1;
    std::string theta = "auto", path;
    app.add_option("--n", n, "number of examples");
    app.add_option("--d", d, "dimension including the intercept");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--sigma2", sigma2, "latent variance");
    app.add_option("--theta", theta, "comma-separated theta* or 'auto'");
    app.add_option("--out", path, "output CSV")->required();
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }
    if (n < 1 || d < 1) throw ConfigError("--n and --d must be >= 1");
    Eigen::VectorXd th;
    if (theta == "auto") {
      th = default_theta(static_cast<std::size_t>(d));
    } else {
      const auto v = parse_list(theta, "theta");
      th = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    const auto data = io::generate_synthetic(static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(d), sigma2, th, seed);
    const std::string text = io::format_dataset(data, true);
    io::write_dataset(path, data, true);
    out << "wrote " << n << " rows to " << path << " digest=" << io::hex64(io::fnv1a64(text))
        << '\n';
    return 0;
  });
}

int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    ConfigMap user;
    int code = 0;
    if (!parse_experiment_args(args, "run", "Run an experiment and write one trace per run", user,
                               out, err, code)) {
      return code;
    }
    const unsigned workers = workers_from_env();
    const Experiment ex = resolve_experiment(user);
    const logit::LogitModel model(ex.data, ex.model);
    fs::create_directories(ex.output_dir);
    {
      std::ofstream cfg(ex.output_dir / "effective_config.txt", std::ios::trunc);
      if (!cfg) throw IoError("cannot write to " + ex.output_dir.string());
      cfg << format_config(ex.effective);
    }
    double total = 0.0;
    for (int r = 0; r < ex.runs; ++r) {
      const RunOutput run = execute_run(ex, model, r, workers);
      io::TraceFile tf;
      tf.algorithm = ex.algorithm;
      tf.run_id = run_name(r);
      tf.seed = ex.seed + static_cast<std::uint64_t>(r);
      tf.config_digest = ex.digest;
      tf.k_in = ex.algorithm == "3p-spider" ? ex.spider.k_in : 0;
      tf.rows = run.trace.steps;
      io::write_trace(ex.output_dir / (tf.run_id + ".trace.csv"), tf);
      if (ex.dump_iterates) {
        io::write_iterates(ex.output_dir / (tf.run_id + ".iterates.csv"), run.trace.iterates);
      }
      total += run.trace.epochs;
      out << tf.run_id << ": epochs=" << run.trace.epochs;
      if (!run.em_objective.empty()) out << " F=" << run.em_objective.back();
      out << '\n';
    }
    out << "total epochs=" << total << " digest=" << ex.digest << '\n';
    return 0;
  });
}

int cmd_aggregate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    CLI::App app{"Aggregate trace files into a per-(t,k) summary", "pspider aggregate"};
    std::string dir, path;
    app.add_option("trace_dir", dir, "directory holding *.trace.csv")->required();
    app.add_option("--out", path, "summary CSV (default: <trace_dir>/summary.csv)");
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name.ends_with(".trace.csv")) paths.push_back(entry.path());
    }
    if (paths.empty()) throw IoError("no *.trace.csv files in " + dir);
    const auto summary = io::aggregate_trace_files(paths);
    if (path.empty()) path = (fs::path(dir) / "summary.csv").string();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f << io::format_summary(summary);
    out << "aggregated " << summary.runs << " runs into " << path << '\n';
    return 0;
  });
}

namespace {

struct CheckLine {
  std::string name;
  bool ok;
  std::string detail;
};

}  // namespace

int cmd_validate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    ConfigMap user;
    int code = 0;
    if (!parse_experiment_args(args, "validate", "Self-check a model configuration", user, out,
                               err, code)) {
      return code;
    }
    const Experiment ex = resolve_experiment(user);
    const logit::LogitModel model(ex.data, ex.model);
    const auto q = static_cast<Eigen::Index>(model.stat_dim());
    std::vector<CheckLine> checks;

    // Probe points inside K: the origin, scaled axes, random directions.
    std::vector<StatVector> probes{StatVector::Zero(q)};
    auto rng = num::derive_stream(ex.seed, 0, 0, 0, num::StreamRole::kAuxiliary);
    const double radius = std::sqrt(model.radius2());
    for (Eigen::Index j = 0; j < q; ++j) {
      StatVector e = StatVector::Zero(q);
      e(j) = 1.0;
      probes.push_back(e * (0.5 * radius / std::sqrt(model.omega_norm2(e))));
    }
    for (int r = 0; r < 3; ++r) {
      StatVector v(q);
      for (Eigen::Index j = 0; j < q; ++j) v(j) = rng.normal();
      probes.push_back(v * (0.9 * rng.uniform() * radius / std::sqrt(model.omega_norm2(v))));
    }

    ValidationOptions vopt;
    vopt.seed = ex.seed;
    const auto report = validate_model(model, probes, vopt);
    out << report.summary();
    bool sym = true, pd = true, idem = true, vi = true, feas = true, stats = true;
    for (const auto& p : report.probes) {
      sym &= p.symmetric;
      pd &= p.positive_definite;
      idem &= p.prox_idempotence <= vopt.idempotence_tol * (probes[p.probe].norm() + 1.0);
      vi &= p.variational_gap <= vopt.variational_tol;
      feas &= p.prox_feasible;
      stats &= !p.stat_agreement || *p.stat_agreement <= 1.0;
    }
    checks.push_back({"preconditioner symmetric and positive definite", sym && pd, ""});
    checks.push_back({"prox idempotent", idem, ""});
    checks.push_back({"prox output feasible", feas, ""});
    checks.push_back({"prox variational inequality", vi, ""});
    checks.push_back({"approx_stat agrees with exact_stat", stats, ""});

    // Gradient identity grad W = -B h at the probes (the origin excluded).
    double worst = 0.0;
    for (std::size_t p = 1; p < probes.size(); ++p) {
      const auto res = gradient_identity_residual(model, probes[p], 1e-5);
      if (res) worst = std::max(worst, *res);
    }
    checks.push_back({"gradient identity", worst <= 1e-5, "worst relative residual " + fmt_num(worst)});

    // One Gibbs sweep preserves the first two posterior moments.
    bool inv_ok = true;
    std::string inv_detail;
    const std::size_t examples = std::min<std::size_t>(3, ex.data.size());
    for (std::size_t i = 0; i < examples; ++i) {
      const auto params = model.posterior_params(i, model.t_map(probes[std::min<std::size_t>(i + 1, probes.size() - 1)]));
      const auto exact = logit::summarize_posterior(params, model.quadrature());
      constexpr int kStrata = 200, kPerStratum = 500;
      std::vector<double> probs;
      probs.reserve(kStrata * kPerStratum);
      auto jitter = num::derive_stream(ex.seed, 0, 1, i, num::StreamRole::kAuxiliary);
      for (int s = 0; s < kStrata; ++s) {
        for (int r = 0; r < kPerStratum; ++r) probs.push_back((s + jitter.uniform_open()) / kStrata);
      }
      const auto starts = logit::posterior_quantiles(params, probs);
      const auto mom = num::one_step_moments(params, starts, 1, ex.seed + i);
      const double zm = std::abs(mom.mean - exact.mean) / mom.mean_se;
      const double z2 = std::abs(mom.second - exact.second) / mom.second_se;
      inv_ok &= zm <= 5.0 && z2 <= 5.0;
      inv_detail += "example " + std::to_string(i) + ": " + fmt_num(zm) + "/" + fmt_num(z2) + " SE; ";
    }
    checks.push_back({"Gibbs sweep invariance", inv_ok, inv_detail});

    bool all = true;
    for (const auto& c : checks) {
      out << (c.ok ? "PASS " : "FAIL ") << c.name;
      if (!c.detail.empty()) out << " (" << c.detail << ")";
      out << '\n';
      all &= c.ok;
    }
    if (!all) throw ValidationError("one or more checks failed");
    return 0;
  });
}

int main_entry(int argc, char** argv) {
  const std::string usage =
      "usage: pspider <synth|run|aggregate|validate> [options]\n"
      "       pspider <command> --help\n";
  if (argc < 2) {
    std::cerr << usage;
    return 2;
  }
  const std::string cmd = argv[1];
  const std::vector<std::string> args(argv + 2, argv + argc);
  if (cmd == "synth") return cmd_synth(args, std::cout, std::cerr);
  if (cmd == "run") return cmd_run(args, std::cout, std::cerr);
  if (cmd == "aggregate") return cmd_aggregate(args, std::cout, std::cerr);
  if (cmd == "validate") return cmd_validate(args, std::cout, std::cerr);
  if (cmd == "--help" || cmd == "-h") {
    std::cout << usage;
    return 0;
  }
  std::cerr << "unknown command '" << cmd << "'\n" << usage;
  return 2;
}

}  // namespace pspider::experiment
