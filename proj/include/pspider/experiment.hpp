#pragma once

// Experiment configuration and the four CLI subcommands.
//
// A configuration is a flat key=value map. `resolve_experiment` fills in
// defaults, resolves the `auto` values against the dataset size and
// returns everything a run needs together with the effective config, whose
// digest (seed, runs and output options excluded) tags every trace.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pspider/algorithms.hpp"
#include "pspider/logit_model.hpp"

namespace pspider::experiment {

using ConfigMap = std::map<std::string, std::string>;

/// Every recognized key with its default value.
const ConfigMap& default_config();

/// `key = value` lines; `#` starts a comment line. Unknown keys and
/// duplicates are ConfigErrors naming the line.
ConfigMap parse_config_text(const std::string& text, const std::string& source = "<memory>");
ConfigMap load_config_file(const std::filesystem::path& path);

/// Sorted `key=value` lines.
std::string format_config(const ConfigMap& config);

/// FNV-1a digest of the result-relevant part of an effective config.
std::string config_digest(const ConfigMap& effective);

/// θ* pattern used when synth_theta = auto: 1, -1, 1/2, -1/2, 1/4, ...
Eigen::VectorXd default_theta(std::size_t d);

struct Experiment {
  ConfigMap effective;
  std::string digest;
  logit::Dataset data;
  logit::LogitOptions model;
  std::string algorithm;  // 3p-spider | online-em | exact-em
  int runs = 1;
  std::uint64_t seed = 1;
  SpiderConfig spider;
  OnlineEmConfig online;
  int em_iters = 100;
  std::string init;  // "zero" or a comma list
  std::filesystem::path output_dir;
  bool dump_iterates = false;
};

/// Overlays `user` on the defaults and resolves it. Loads or generates the
/// dataset.
Experiment resolve_experiment(const ConfigMap& user);

StatVector initial_statistic(const Experiment& ex, std::size_t q);

struct RunOutput {
  RunTrace trace;
  std::vector<ParamVector> em_thetas;  // exact-em only
  std::vector<double> em_objective;
};

/// One run with seed ex.seed + r. `workers` never changes the result.
RunOutput execute_run(const Experiment& ex, const logit::LogitModel& model, int r,
                      unsigned workers);

/// Worker count from PSPIDER_WORKERS (default 1).
unsigned workers_from_env();

// Subcommands. `args` excludes the program and subcommand names. Return
// the process exit code: 0 success, 2 configuration or IO error,
// 3 numerical failure, 4 validation failure.
int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_aggregate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_validate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace pspider::experiment
