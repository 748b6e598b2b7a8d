#pragma once

// Dataset files, the synthetic generator, run traces and their
// aggregation across independent runs.
//
// Dataset CSV: a header `label,f1,...,fD` optionally followed by a final
// `intercept=yes` or `intercept=no` field; `yes` appends a column of ones
// after the D features. Labels are -1 or +1.
//
// Trace CSV: `# key=value` metadata lines (the first is the format tag),
// then the header `t,k,gamma,sq_move_over_gamma2,epochs,wall_ms` and one
// row per prox step, floats with 17 significant digits.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pspider/algorithms.hpp"
#include "pspider/logit_model.hpp"

namespace pspider::io {

/// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

logit::Dataset parse_dataset(std::string_view text, const std::string& source = "<memory>");
logit::Dataset load_dataset(const std::filesystem::path& path);

/// CSV text of a dataset. With `intercept_last` the final column (which
/// must be all ones) is dropped and the header requests it back.
std::string format_dataset(const logit::Dataset& data, bool intercept_last);
void write_dataset(const std::filesystem::path& path, const logit::Dataset& data,
                   bool intercept_last);

/// n rows of d - 1 standard normal features followed by an intercept
/// (d counts the intercept). Each row draws its scalar latent
/// z ~ N(<X, theta*> / ||X||, sigma2) and Y = +1 with probability
/// (1 + exp(-||X|| z))^{-1}.
logit::Dataset generate_synthetic(std::size_t n, std::size_t d, double sigma2,
                                  const Eigen::VectorXd& theta_star, std::uint64_t seed);

struct TraceFile {
  std::string algorithm;
  std::string run_id;
  std::uint64_t seed = 0;
  std::string config_digest;
  int k_in = 0;  // 0 when the algorithm has no inner loop
  std::vector<StepRecord> rows;
};

std::string format_trace(const TraceFile& trace);
TraceFile parse_trace(std::string_view text, const std::string& source = "<memory>");
void write_trace(const std::filesystem::path& path, const TraceFile& trace);
TraceFile read_trace(const std::filesystem::path& path);

/// Iterate dump: columns t,k,s1..sq.
void write_iterates(const std::filesystem::path& path, const std::vector<IterateRecord>& its);
std::vector<IterateRecord> read_iterates(const std::filesystem::path& path);

struct AggregateRow {
  int t = 0;
  int k = 0;
  int inner_index = 0;  // cumulated number of inner loops
  double epochs = 0.0;
  bool outer_marker = false;  // the boundary record (t, k_in)
  std::size_t runs = 0;
  double mean = 0.0;
  double ci_half_width = 0.0;  // 1.96 sd / sqrt(runs); 0 for a single run
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AggregateSummary {
  std::string algorithm;
  std::string config_digest;
  std::size_t runs = 0;
  std::vector<AggregateRow> rows;
};

/// Per-(t,k) statistics of sq_move_over_gamma2. The result does not depend
/// on the order of `traces`. Throws ConfigError on mixed digests or rows.
AggregateSummary aggregate_traces(const std::vector<TraceFile>& traces);
AggregateSummary aggregate_trace_files(std::vector<std::filesystem::path> paths);

std::string format_summary(const AggregateSummary& summary);

}  // namespace pspider::io
