#include "pspider/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "pspider/errors.hpp"

namespace pspider::io {

namespace {

constexpr std::string_view kTraceTag = "pspider-trace/1";
constexpr std::string_view kTraceColumns = "t,k,gamma,sq_move_over_gamma2,epochs,wall_ms";

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool to_double(std::string_view s, double& v) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

template <class Int>
bool to_int(std::string_view s, Int& v) {
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto out = split(text, '\n');
  while (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

logit::Dataset parse_dataset(std::string_view text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError(source + ": empty dataset file");
  auto header = split(trim(lines[0]), ',');
  if (header.empty() || trim(header[0]) != "label") {
    throw IoError(source + ":1: header must start with 'label'");
  }
  bool intercept = false;
  if (header.size() > 1) {
    const auto last = trim(header.back());
    if (last.starts_with("intercept=")) {
      if (last == "intercept=yes") {
        intercept = true;
      } else if (last != "intercept=no") {
        throw IoError(source + ":1: intercept flag must be 'yes' or 'no'");
      }
      header.pop_back();
    }
  }
  const std::size_t raw = header.size() - 1;
  const std::size_t d = raw + (intercept ? 1 : 0);
  if (d == 0) throw IoError(source + ":1: no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    const std::string where = source + ":" + std::to_string(ln + 1);
    if (line.empty()) throw IoError(where + ": empty row");
    const auto fields = split(line, ',');
    if (fields.size() != raw + 1) {
      throw IoError(where + ": expected " + std::to_string(raw + 1) + " fields, found " +
                    std::to_string(fields.size()));
    }
    double y = 0.0;
    if (!to_double(fields[0], y)) throw IoError(where + ": malformed label");
    if (y != 1.0 && y != -1.0) throw IoError(where + ": label must be -1 or +1");
    std::vector<double> row(d, 1.0);
    double norm2 = 0.0;
    for (std::size_t j = 0; j < raw; ++j) {
      if (!to_double(fields[j + 1], row[j])) {
        throw IoError(where + ": malformed value in column " + std::to_string(j + 2));
      }
    }
    for (double v : row) norm2 += v * v;
    if (!(norm2 > 0.0)) throw IoError(where + ": covariate row has zero norm");
    rows.push_back(std::move(row));
    labels.push_back(y);
  }
  if (rows.empty()) throw IoError(source + ": no data rows");

  logit::Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  data.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    data.labels(static_cast<Eigen::Index>(i)) = labels[i];
  }
  return data;
}

logit::Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(slurp(path), path.string());
}

std::string format_dataset(const logit::Dataset& data, bool intercept_last) {
  const Eigen::Index cols = data.features.cols() - (intercept_last ? 1 : 0);
  if (intercept_last && (data.features.cols() == 0 || (data.features.col(cols).array() != 1.0).any())) {
    throw ConfigError("format_dataset: last column is not an intercept");
  }
  std::string out = "label";
  for (Eigen::Index j = 0; j < cols; ++j) out += ",f" + std::to_string(j + 1);
  out += intercept_last ? ",intercept=yes\n" : ",intercept=no\n";
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    out += data.labels(i) > 0 ? "1" : "-1";
    for (Eigen::Index j = 0; j < cols; ++j) out += "," + g17(data.features(i, j));
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const logit::Dataset& data,
                   bool intercept_last) {
  spit(path, format_dataset(data, intercept_last));
}

logit::Dataset generate_synthetic(std::size_t n, std::size_t d, double sigma2,
                                  const Eigen::VectorXd& theta_star, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("synthetic data needs n >= 1 and d >= 1");
  if (!(sigma2 > 0.0)) throw ConfigError("synthetic data needs sigma2 > 0");
  if (static_cast<std::size_t>(theta_star.size()) != d) {
    throw ConfigError("theta* has length " + std::to_string(theta_star.size()) + ", expected " +
                      std::to_string(d));
  }
  logit::Dataset data;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);
  data.features.resize(rows, cols);
  data.labels.resize(rows);
  const double sd = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto rng = num::derive_stream(seed, 0, 0, static_cast<std::uint64_t>(i),
                                  num::StreamRole::kSynthetic);
    for (Eigen::Index j = 0; j + 1 < cols; ++j) data.features(i, j) = rng.normal();
    data.features(i, cols - 1) = 1.0;
    const double c = data.features.row(i).norm();
    const double z = data.features.row(i).dot(theta_star) / c + sd * rng.normal();
    const double p = 1.0 / (1.0 + std::exp(-c * z));
    data.labels(i) = rng.uniform() < p ? 1.0 : -1.0;
  }
  return data;
}

std::string format_trace(const TraceFile& trace) {
  std::string out;
  out += "# format=" + std::string(kTraceTag) + "\n";
  out += "# algorithm=" + trace.algorithm + "\n";
  out += "# run_id=" + trace.run_id + "\n";
  out += "# seed=" + std::to_string(trace.seed) + "\n";
  out += "# config_digest=" + trace.config_digest + "\n";
  out += "# k_in=" + std::to_string(trace.k_in) + "\n";
  out += std::string(kTraceColumns) + "\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.t) + "," + std::to_string(r.k) + "," + g17(r.gamma) + "," +
           g17(r.sq_move_over_gamma2) + "," + g17(r.epochs) + "," + g17(r.wall_ms) + "\n";
  }
  return out;
}

TraceFile parse_trace(std::string_view text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "# format=" + std::string(kTraceTag)) {
    throw IoError(source + ": not a " + std::string(kTraceTag) + " file (version tag mismatch)");
  }
  TraceFile out;
  std::size_t ln = 1;
  for (; ln < lines.size() && lines[ln].starts_with("#"); ++ln) {
    auto body = trim(lines[ln].substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw IoError(source + ": malformed metadata line");
    const auto key = body.substr(0, eq);
    const std::string value(body.substr(eq + 1));
    bool ok = true;
    if (key == "algorithm") {
      out.algorithm = value;
    } else if (key == "run_id") {
      out.run_id = value;
    } else if (key == "seed") {
      ok = to_int(value, out.seed);
    } else if (key == "config_digest") {
      out.config_digest = value;
    } else if (key == "k_in") {
      ok = to_int(value, out.k_in);
    }
    if (!ok) throw IoError(source + ":" + std::to_string(ln + 1) + ": bad value for " + std::string(key));
  }
  if (ln >= lines.size() || trim(lines[ln]) != kTraceColumns) {
    throw IoError(source + ": missing column header");
  }
  for (++ln; ln < lines.size(); ++ln) {
    const auto f = split(trim(lines[ln]), ',');
    StepRecord r;
    if (f.size() != 6 || !to_int(f[0], r.t) || !to_int(f[1], r.k) || !to_double(f[2], r.gamma) ||
        !to_double(f[3], r.sq_move_over_gamma2) || !to_double(f[4], r.epochs) ||
        !to_double(f[5], r.wall_ms)) {
      throw IoError(source + ":" + std::to_string(ln + 1) + ": malformed trace row");
    }
    out.rows.push_back(r);
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const TraceFile& trace) {
  spit(path, format_trace(trace));
}

TraceFile read_trace(const std::filesystem::path& path) {
  return parse_trace(slurp(path), path.string());
}

void write_iterates(const std::filesystem::path& path, const std::vector<IterateRecord>& its) {
  std::string out = "t,k";
  const Eigen::Index q = its.empty() ? 0 : its.front().s.size();
  for (Eigen::Index j = 0; j < q; ++j) out += ",s" + std::to_string(j + 1);
  out += '\n';
  for (const auto& it : its) {
    out += std::to_string(it.t) + "," + std::to_string(it.k);
    for (Eigen::Index j = 0; j < it.s.size(); ++j) out += "," + g17(it.s(j));
    out += '\n';
  }
  spit(path, out);
}

std::vector<IterateRecord> read_iterates(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  const auto lines = lines_of(text);
  if (lines.empty() || !lines[0].starts_with("t,k")) throw IoError(path.string() + ": bad header");
  const std::size_t q = split(trim(lines[0]), ',').size() - 2;
  std::vector<IterateRecord> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto f = split(trim(lines[ln]), ',');
    IterateRecord r;
    r.s.resize(static_cast<Eigen::Index>(q));
    bool ok = f.size() == q + 2 && to_int(f[0], r.t) && to_int(f[1], r.k);
    for (std::size_t j = 0; ok && j < q; ++j) ok = to_double(f[j + 2], r.s(static_cast<Eigen::Index>(j)));
    if (!ok) throw IoError(path.string() + ":" + std::to_string(ln + 1) + ": malformed row");
    out.push_back(std::move(r));
  }
  return out;
}

AggregateSummary aggregate_traces(const std::vector<TraceFile>& traces) {
  if (traces.empty()) throw ConfigError("no traces to aggregate");
  const TraceFile& first = traces.front();
  for (const auto& tr : traces) {
    if (tr.config_digest != first.config_digest || tr.algorithm != first.algorithm) {
      throw ConfigError("traces mix config digests (" + first.config_digest + " vs " +
                        tr.config_digest + ")");
    }
    if (tr.rows.size() != first.rows.size()) {
      throw ConfigError("traces of run " + tr.run_id + " and " + first.run_id +
                        " have different lengths");
    }
    for (std::size_t j = 0; j < tr.rows.size(); ++j) {
      if (tr.rows[j].t != first.rows[j].t || tr.rows[j].k != first.rows[j].k) {
        throw ConfigError("traces disagree on the (t, k) grid at row " + std::to_string(j));
      }
    }
  }
  AggregateSummary out;
  out.algorithm = first.algorithm;
  out.config_digest = first.config_digest;
  out.runs = traces.size();
  const double runs = static_cast<double>(traces.size());
  std::vector<double> values(traces.size());
  for (std::size_t j = 0; j < first.rows.size(); ++j) {
    AggregateRow row;
    row.t = first.rows[j].t;
    row.k = first.rows[j].k;
    row.runs = traces.size();
    row.epochs = first.rows[j].epochs;
    for (std::size_t r = 0; r < traces.size(); ++r) {
      values[r] = traces[r].rows[j].sq_move_over_gamma2;
      row.epochs = std::min(row.epochs, traces[r].rows[j].epochs);
    }
    if (first.k_in > 0) {
      row.inner_index = (row.t - 1) * first.k_in + std::min(row.k + 1, first.k_in);
      row.outer_marker = row.k == first.k_in;
    } else {
      row.inner_index = static_cast<int>(j) + 1;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = sum / runs;
    double ss = 0.0;
    for (double v : values) ss += (v - row.mean) * (v - row.mean);
    row.ci_half_width = values.size() > 1 ? 1.96 * std::sqrt(ss / (runs - 1.0) / runs) : 0.0;
    const std::size_t mid = values.size() / 2;
    row.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    row.min = values.front();
    row.max = values.back();
    out.rows.push_back(row);
  }
  return out;
}

AggregateSummary aggregate_trace_files(std::vector<std::filesystem::path> paths) {
  std::sort(paths.begin(), paths.end());
  std::vector<TraceFile> traces;
  traces.reserve(paths.size());
  for (const auto& p : paths) traces.push_back(read_trace(p));
  return aggregate_traces(traces);
}

std::string format_summary(const AggregateSummary& s) {
  std::string out = "# algorithm=" + s.algorithm + "\n# config_digest=" + s.config_digest +
                    "\n# runs=" + std::to_string(s.runs) + "\n";
  out += "t,k,inner_index,epochs,outer_marker,runs,mean,ci95_half_width,median,min,max\n";
  for (const auto& r : s.rows) {
    out += std::to_string(r.t) + "," + std::to_string(r.k) + "," + std::to_string(r.inner_index) +
           "," + g17(r.epochs) + "," + (r.outer_marker ? "1" : "0") + "," +
           std::to_string(r.runs) + "," + g17(r.mean) + "," + g17(r.ci_half_width) + "," +
           g17(r.median) + "," + g17(r.min) + "," + g17(r.max) + "\n";
  }
  return out;
}

}  // namespace pspider::io
