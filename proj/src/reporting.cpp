#include "pcfgsr/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace pcfgsr {

namespace fs = std::filesystem;

void RunTable::add(RunRow row) {
  for (const auto& r : rows_)
    if (r.benchmark == row.benchmark && r.method == row.method && r.seed == row.seed)
      throw std::invalid_argument("duplicate run row: " + row.benchmark + "/" + row.method + "/" +
                                  std::to_string(row.seed));
  rows_.push_back(std::move(row));
}

namespace {

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return nlohmann::json::parse(in);
}

}  // namespace

RunRow run_row_from_json(const nlohmann::json& j) {
  RunRow r;
  r.benchmark = j.value("benchmark", std::string{});
  r.method = j.value("method", std::string{"pcfgsr"});
  r.seed = j.value("seed", std::uint64_t{0});
  r.test_mse = number_or(j, "best_test_mse", std::numeric_limits<double>::infinity());
  r.recovered = j.value("recovered", false);
  r.complexity = j.value("complexity", std::size_t{0});
  r.r2 = number_or(j, "test_r2", std::numeric_limits<double>::quiet_NaN());
  r.wall_seconds = number_or(j, "wall_seconds", std::numeric_limits<double>::quiet_NaN());
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
  r.excluded_from_stats = j.value("excluded_from_stats", false);
  return r;
}

RunTable load_run_table(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "result.json" || name == "failed.json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  RunTable table;
  for (const auto& f : files) {
    auto j = read_json(f);
    if (f.filename() == "failed.json") j["failed"] = true;
    const auto timing = f.parent_path() / "timing.json";
    if (fs::exists(timing)) j["wall_seconds"] = read_json(timing).value("wall_seconds", 0.0);
    table.add(run_row_from_json(j));
  }
  return table;
}

std::vector<BenchmarkSummary> aggregate(const RunTable& table, StdKind kind) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunRow*>> groups;
  for (const auto& r : table.rows()) groups[{r.benchmark, r.method}].push_back(&r);

  std::vector<BenchmarkSummary> out;
  for (const auto& [key, rows] : groups) {
    BenchmarkSummary s;
    s.benchmark = key.first;
    s.method = key.second;
    s.runs = rows.size();
    std::vector<double> values;
    double complexity_sum = 0.0;
    std::size_t complexity_n = 0;
    double r2_sum = 0.0;
    std::size_t r2_n = 0;
    std::size_t recovered = 0;
    for (const auto* r : rows) {
      s.excluded_from_stats = s.excluded_from_stats || r->excluded_from_stats;
      recovered += r->recovered && !r->failed;
      if (r->failed || !std::isfinite(r->test_mse) || r->test_mse > kExclusionMse) continue;
      values.push_back(r->test_mse);
      complexity_sum += static_cast<double>(r->complexity);
      ++complexity_n;
      if (std::isfinite(r->r2)) {
        r2_sum += r->r2;
        ++r2_n;
      }
    }
    // summation order fixed by sorting, so the mean is permutation-invariant
    std::sort(values.begin(), values.end());
    s.valid = values.size();
    s.excluded = s.runs - s.valid;
    s.recovery_percent = 100.0 * static_cast<double>(recovered) / static_cast<double>(s.runs);
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean_mse = sum / static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean_mse) * (v - s.mean_mse);
      const double denom = kind == StdKind::Population ? static_cast<double>(values.size())
                                                        : static_cast<double>(values.size()) - 1.0;
      s.std_mse = denom > 0.0 ? std::sqrt(ss / denom) : 0.0;
      s.mean_complexity = complexity_sum / static_cast<double>(complexity_n);
    }
    if (r2_n > 0) s.mean_r2 = r2_sum / static_cast<double>(r2_n);
    out.push_back(s);
  }
  return out;
}

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u needs two nonempty samples");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  // NaN compares as the worst value
  auto key = [](double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; };
  std::vector<std::pair<double, bool>> all;
  all.reserve(n);
  for (double v : a) all.emplace_back(key(v), true);
  for (double v : b) all.emplace_back(key(v), false);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum_a += avg_rank;
    i = j;
  }

  MannWhitney out;
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  out.u_a = rank_sum_a - dna * (dna + 1.0) / 2.0;
  out.u_b = dna * dnb - out.u_a;
  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    out.z = 0.0;
    out.p = 1.0;
    return out;
  }
  out.z = std::max(0.0, std::abs(out.u_a - mu) - 0.5) / std::sqrt(var);
  out.p = std::min(1.0, std::erfc(out.z / std::sqrt(2.0)));
  return out;
}

std::string SignificanceCounts::label() const {
  return "+" + std::to_string(better) + " /~" + std::to_string(equivalent) + " /-" + std::to_string(worse);
}

Significance significance_summary(const RunTable& table, double alpha) {
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
  std::set<std::string> methods;
  std::set<std::string> excluded;
  for (const auto& r : table.rows()) {
    methods.insert(r.method);
    if (r.excluded_from_stats) excluded.insert(r.benchmark);
    const double v = r.failed ? std::numeric_limits<double>::infinity() : r.test_mse;
    samples[r.benchmark][r.method].push_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
  }

  Significance sig;
  std::map<std::string, SignificanceCounts> counts;
  for (const auto& m : methods) counts[m].method = m;

  for (const auto& [bench, per_method] : samples) {
    if (excluded.count(bench) || per_method.size() < 2) continue;
    // best = lowest median test MSE (robust to the odd diverged run);
    // ties go to the first method by name
    std::string best;
    double best_median = std::numeric_limits<double>::infinity();
    for (const auto& [m, v] : per_method) {
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t h = sorted.size() / 2;
      const double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
      if (best.empty() || median < best_median) {
        best = m;
        best_median = median;
      }
    }
    bool any_equivalent = false;
    std::map<std::string, char> labels;
    for (const auto& [m, v] : per_method) {
      if (m == best) continue;
      const auto test = mann_whitney_u(per_method.at(best), v);
      const bool equivalent = test.p >= alpha;
      any_equivalent = any_equivalent || equivalent;
      labels[m] = equivalent ? '~' : '-';
    }
    labels[best] = any_equivalent ? '~' : '+';
    for (const auto& [m, l] : labels) {
      sig.labels.push_back({bench, m, l});
      auto& c = counts[m];
      if (l == '+') ++c.better;
      else if (l == '~') ++c.equivalent;
      else ++c.worse;
    }
  }
  for (auto& [m, c] : counts) sig.counts.push_back(c);
  return sig;
}

Report build_report(const RunTable& table, double alpha) {
  return {aggregate(table), significance_summary(table, alpha)};
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  throw std::invalid_argument("unknown report format: " + name);
}

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json summary_json(const BenchmarkSummary& s) {
  return {{"benchmark", s.benchmark},
          {"method", s.method},
          {"runs", s.runs},
          {"valid", s.valid},
          {"excluded", s.excluded},
          {"mean_mse", number_or_null(s.mean_mse)},
          {"std_mse", number_or_null(s.std_mse)},
          {"recovery_percent", s.recovery_percent},
          {"mean_complexity", number_or_null(s.mean_complexity)},
          {"mean_r2", number_or_null(s.mean_r2)},
          {"excluded_from_stats", s.excluded_from_stats}};
}

std::string render_json(const Report& r) {
  nlohmann::json j;
  j["summaries"] = nlohmann::json::array();
  for (const auto& s : r.summaries) j["summaries"].push_back(summary_json(s));
  j["significance"] = nlohmann::json::array();
  for (const auto& c : r.significance.counts)
    j["significance"].push_back(
        {{"method", c.method}, {"better", c.better}, {"equivalent", c.equivalent}, {"worse", c.worse}});
  j["labels"] = nlohmann::json::array();
  for (const auto& l : r.significance.labels)
    j["labels"].push_back({{"benchmark", l.benchmark}, {"method", l.method}, {"label", std::string(1, l.label)}});
  return j.dump(2) + "\n";
}

std::string render_csv(const Report& r) {
  std::ostringstream os;
  os << "benchmark,method,runs,valid,excluded,mean_mse,std_mse,recovery_percent,mean_complexity,mean_r2,"
        "excluded_from_stats\n";
  for (const auto& s : r.summaries)
    os << csv_field(s.benchmark) << ',' << csv_field(s.method) << ',' << s.runs << ',' << s.valid << ','
       << s.excluded << ',' << fmt(s.mean_mse, "%.17g") << ',' << fmt(s.std_mse, "%.17g") << ','
       << fmt(s.recovery_percent, "%.17g") << ',' << fmt(s.mean_complexity, "%.17g") << ','
       << fmt(s.mean_r2, "%.17g") << ',' << (s.excluded_from_stats ? "true" : "false") << '\n';
  return os.str();
}

std::string render_markdown(const Report& r) {
  std::set<std::string> method_set;
  std::vector<std::string> benchmarks;
  for (const auto& s : r.summaries) {
    method_set.insert(s.method);
    if (benchmarks.empty() || benchmarks.back() != s.benchmark) benchmarks.push_back(s.benchmark);
  }
  const std::vector<std::string> methods(method_set.begin(), method_set.end());
  auto find = [&](const std::string& b, const std::string& m) -> const BenchmarkSummary* {
    for (const auto& s : r.summaries)
      if (s.benchmark == b && s.method == m) return &s;
    return nullptr;
  };

  std::ostringstream os;
  os << "## Test MSE, mean (±std)\n\n| Benchmark |";
  for (const auto& m : methods) os << ' ' << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& b : benchmarks) {
    bool excluded = false;
    for (const auto& m : methods)
      if (const auto* s = find(b, m)) excluded = excluded || s->excluded_from_stats;
    os << "| " << b << (excluded ? " (excluded)" : "") << " |";
    for (const auto& m : methods) {
      const auto* s = find(b, m);
      if (!s) os << " |";
      else if (s->valid == 0) os << " - |";
      else os << ' ' << fmt(s->mean_mse, "%.3g") << " (±" << fmt(s->std_mse, "%.3g") << ") |";
    }
    os << '\n';
  }
  if (!r.significance.counts.empty() && methods.size() >= 2) {
    os << "| +/~/- |";
    for (const auto& m : methods) {
      std::string label;
      for (const auto& c : r.significance.counts)
        if (c.method == m) label = c.label();
      os << ' ' << label << " |";
    }
    os << '\n';
  }

  os << "\n## Per-run summary\n\n"
        "| Benchmark | Method | Runs | Valid | Mean MSE | Std | Recovery % | C | R² |\n"
        "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : r.summaries)
    os << "| " << s.benchmark << " | " << s.method << " | " << s.runs << " | " << s.valid << " | "
       << fmt(s.mean_mse, "%.4g") << " | " << fmt(s.std_mse, "%.4g") << " | " << fmt(s.recovery_percent, "%.1f")
       << " | " << fmt(s.mean_complexity, "%.1f") << " | " << fmt(s.mean_r2, "%.3f") << " |\n";
  return os.str();
}

}  // namespace

std::string render_report(const Report& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return render_json(report);
    case ReportFormat::Csv: return render_csv(report);
    case ReportFormat::Markdown: return render_markdown(report);
  }
  throw std::invalid_argument("unknown report format");
}

void emit_report(const Report& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << render_report(report, format);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : j.at("summaries")) {
    BenchmarkSummary b;
    b.benchmark = s.at("benchmark");
    b.method = s.at("method");
    b.runs = s.at("runs");
    b.valid = s.at("valid");
    b.excluded = s.at("excluded");
    b.mean_mse = number_or(s, "mean_mse", nan);
    b.std_mse = number_or(s, "std_mse", nan);
    b.recovery_percent = s.at("recovery_percent");
    b.mean_complexity = number_or(s, "mean_complexity", nan);
    b.mean_r2 = number_or(s, "mean_r2", nan);
    b.excluded_from_stats = s.at("excluded_from_stats");
    r.summaries.push_back(b);
  }
  for (const auto& c : j.at("significance"))
    r.significance.counts.push_back({c.at("method"), c.at("better"), c.at("equivalent"), c.at("worse")});
  for (const auto& l : j.at("labels"))
    r.significance.labels.push_back({l.at("benchmark"), l.at("method"), l.at("label").get<std::string>().at(0)});
  return r;
}

}  // namespace pcfgsr
