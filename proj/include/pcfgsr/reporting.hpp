#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pcfgsr {

// Runs above this test MSE (or non-finite) are left out of mean/std.
inline constexpr double kExclusionMse = 1e10;

struct RunRow {
  std::string benchmark;
  std::string method;
  std::uint64_t seed = 0;
  double test_mse = std::numeric_limits<double>::infinity();
  bool recovered = false;
  std::size_t complexity = 0;
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
  bool excluded_from_stats = false;
};

class RunTable {
 public:
  // Throws std::invalid_argument on a duplicate (benchmark, method, seed).
  void add(RunRow row);
  const std::vector<RunRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

 private:
  std::vector<RunRow> rows_;
};

// Reads every result.json (with its timing.json sidecar) and failed.json
// below `dir`, in sorted path order.
RunTable load_run_table(const std::string& dir);
RunRow run_row_from_json(const nlohmann::json& result);

enum class StdKind { Population, Sample };

struct BenchmarkSummary {
  std::string benchmark;
  std::string method;
  std::size_t runs = 0;
  std::size_t valid = 0;
  std::size_t excluded = 0;  // runs dropped by the exclusion rule or failed
  double mean_mse = std::numeric_limits<double>::quiet_NaN();
  double std_mse = std::numeric_limits<double>::quiet_NaN();
  double recovery_percent = 0.0;
  double mean_complexity = std::numeric_limits<double>::quiet_NaN();
  double mean_r2 = std::numeric_limits<double>::quiet_NaN();
  bool excluded_from_stats = false;
};

// One summary per (benchmark, method), sorted by benchmark then method.
std::vector<BenchmarkSummary> aggregate(const RunTable& table, StdKind kind = StdKind::Population);

struct MannWhitney {
  double u_a = 0.0;
  double u_b = 0.0;
  double z = 0.0;
  double p = 1.0;  // two-sided, normal approximation
};

// Average ranks for ties; continuity and tie-corrected normal approximation.
MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

struct SignificanceCounts {
  std::string method;
  std::size_t better = 0;
  std::size_t equivalent = 0;
  std::size_t worse = 0;

  std::string label() const;  // "+a /~b /-c"
};

struct SignificanceLabel {
  std::string benchmark;
  std::string method;
  char label = '~';  // '+', '~' or '-'
};

struct Significance {
  std::vector<SignificanceLabel> labels;
  std::vector<SignificanceCounts> counts;  // sorted by method
};

// Per benchmark, the method with the lowest median test MSE is compared to
// every other method. Methods with p >= alpha against it are equivalent
// (and so is the best method); the rest are worse. The best method is
// better only when it beats all others with p < alpha.
Significance significance_summary(const RunTable& table, double alpha = 0.05);

struct Report {
  std::vector<BenchmarkSummary> summaries;
  Significance significance;
};

Report build_report(const RunTable& table, double alpha = 0.05);

enum class ReportFormat { Json, Csv, Markdown };
ReportFormat parse_report_format(const std::string& name);

std::string render_report(const Report& report, ReportFormat format);
// Throws std::runtime_error if `path` cannot be written.
void emit_report(const Report& report, ReportFormat format, const std::string& path);
Report report_from_json(const nlohmann::json& j);

}  // namespace pcfgsr
