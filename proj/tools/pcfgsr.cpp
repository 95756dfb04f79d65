// Command-line entry point: validate, gen-bench, train, ablate, experiment,
// report. Exit codes: 0 ok, 1 invalid input or config, 2 unreadable file,
// 3 training aborted on a non-finite update.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <omp.h>

#include "CLI11.hpp"
#include "pcfgsr/benchmarks.hpp"
#include "pcfgsr/config.hpp"
#include "pcfgsr/grammar.hpp"
#include "pcfgsr/reporting.hpp"
#include "pcfgsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace pcfgsr;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUnreadable = 2;
constexpr int kTrainingFailed = 3;

constexpr const char* kOutputEnv = "PCFGSR_OUTPUT_ROOT";

struct FileMissing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string output_root(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return configured;
}

struct LoadedData {
  std::string label;
  Dataset train;
  Dataset test;
  bool excluded_from_stats = false;
};

LoadedData load_data(const RunConfig& rc, const std::string& benchmark, std::uint64_t seed) {
  LoadedData d;
  if (benchmark == "airfoil") {
    std::string path = rc.csv;
    if (path.empty())
      if (const char* env = std::getenv("AIRFOIL_PATH"); env && *env) path = env;
    auto split = split_dataset(load_airfoil(path), rc.split, seed);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    d.label = "airfoil";
    d.train = std::move(split.train);
    d.test = std::move(split.test);
  } else if (!benchmark.empty()) {
    auto bm = generate_benchmark(benchmark, seed);
    d.label = benchmark;
    d.train = std::move(bm.train);
    d.test = std::move(bm.test);
    d.excluded_from_stats = bm.spec.excluded_from_stats;
  } else {
    auto split = load_csv(rc.csv, rc.target, rc.split, seed);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    d.label = fs::path(rc.csv).stem().string();
    d.train = std::move(split.train);
    d.test = std::move(split.test);
  }
  return d;
}

std::string method_label(const std::string& base, const std::string& ablation) {
  return ablation == "baseline" ? base : base + ":" + ablation;
}

std::string dir_name(std::string s) {
  for (auto& c : s)
    if (c == ':' || c == '/') c = '_';
  return s;
}

// One training run with all of its output files.
RunResult execute_run(RunConfig rc, const std::string& benchmark, const std::string& ablation, std::uint64_t seed,
                      const fs::path& root, fs::path* run_dir_out = nullptr) {
  auto data = load_data(rc, benchmark, seed);
  GrammarOptions go;
  go.nvar = data.train.width();
  const Grammar g = load_grammar_file(rc.grammar, go);

  const std::string method = method_label(rc.method, ablation);
  const fs::path dir = root / data.label / dir_name(method) / ("seed-" + std::to_string(seed));
  if (run_dir_out) *run_dir_out = dir;
  fs::create_directories(dir);

  rc.trainer.seed = seed;
  rc.benchmark = benchmark;
  TrainConfig effective = rc.trainer;
  effective.seed = run_seed(seed, data.label);

  std::ofstream ledger(dir / "ledger.jsonl", std::ios::binary);
  if (!ledger) throw std::runtime_error("cannot write " + (dir / "ledger.jsonl").string());
  auto result = run_ablation(effective, ablation, g, data.train, data.test,
                             [&](const IterationRecord& r) { ledger << to_json(r).dump() << "\n"; });
  result.config.seed = seed;
  result.benchmark = data.label;
  result.method = method;

  auto j = to_json(result);
  j["run_seed"] = effective.seed;
  j["excluded_from_stats"] = data.excluded_from_stats;
  j["train_rows"] = data.train.rows();
  j["test_rows"] = data.test.rows();
  write_file(dir / "result.json", j.dump(2) + "\n");
  write_file(dir / "timing.json", nlohmann::json{{"wall_seconds", result.wall_seconds}}.dump() + "\n");
  write_file(dir / "config.echo.toml", echo_config(rc));
  save_policy_binary(result.policy, (dir / "policy.bin").string());
  return result;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw FileMissing("config file not found: " + path);
  auto file = load_config(path);
  for (const auto& o : overrides) apply_override(file, o);
  return resolve_run_config(file);
}

int cmd_validate(const std::string& path, std::size_t nvar) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kUnreadable;
  }
  GrammarOptions go;
  go.nvar = nvar;
  Grammar g;
  try {
    g = parse_grammar_unchecked(text, go);
  } catch (const GrammarError& e) {
    std::cerr << path << ":" << e.where().line << ":" << e.where().column << ": error: " << e.what() << "\n";
    return kInvalid;
  }
  const auto diags = validate_grammar(g);
  bool errors = false;
  for (const auto& d : diags) {
    std::cerr << path << ": " << to_string(d) << "\n";
    errors = errors || d.is_error();
  }
  if (errors) return kInvalid;
  std::cout << path << ": " << g.nonterminal_count() << " productions, " << g.action_count() << " actions\n";
  return kOk;
}

int cmd_gen_bench(const std::vector<std::string>& names, std::uint64_t seed, const std::string& out) {
  std::vector<std::string> list = names;
  if (list.empty())
    for (const auto& s : benchmark_specs()) list.push_back(s.name);
  for (const auto& name : list) {
    const auto bm = generate_benchmark(name, seed);
    const fs::path dir = fs::path(out) / name;
    fs::create_directories(dir);
    write_csv((dir / "train.csv").string(), bm.train);
    write_csv((dir / "test.csv").string(), bm.test);
    write_file(dir / "truth.txt", bm.truth.to_string() + "\n");
    std::cout << name << ": train " << bm.train.rows() << " rows, test " << bm.test.rows() << " rows"
              << (bm.spec.excluded_from_stats ? " (excluded from stats)" : "") << "\n";
  }
  return kOk;
}

int cmd_train(const std::string& config, std::optional<std::uint64_t> seed, const std::vector<std::string>& overrides,
              std::optional<std::size_t> workers, const std::string& output, const std::string& ablation) {
  auto rc = load_run_config(config, overrides);
  if (rc.benchmark.empty() && rc.csv.empty()) throw ConfigError("train needs run.benchmark or run.csv");
  if (workers) rc.trainer.workers = *workers;
  const auto s = seed.value_or(rc.trainer.seed);
  rc.output = output_root(output, rc.output);
  fs::path dir;
  const auto result = execute_run(rc, rc.benchmark, ablation, s, rc.output, &dir);
  std::cout << "best: " << (result.best ? result.best_expression : std::string("(none)")) << "\n";
  std::cout << "test_mse: " << result.best_test_mse << "\n";
  std::cout << "recovered: " << (result.recovered ? "yes" : "no") << "\n";
  std::cout << "results: " << dir.string() << "\n";
  return kOk;
}

int cmd_experiment(const std::string& config, const std::vector<std::string>& overrides, const std::string& suite,
                   const std::string& seeds, const std::string& ablations, std::optional<std::size_t> workers,
                   const std::string& output) {
  auto rc = load_run_config(config, overrides);
  if (!suite.empty()) rc.suite = parse_name_list(suite);
  if (!seeds.empty()) rc.seeds = parse_seed_list(seeds);
  if (!ablations.empty()) rc.ablations = parse_name_list(ablations);
  if (rc.suite.empty() && !rc.benchmark.empty()) rc.suite = {rc.benchmark};
  if (rc.suite.empty()) throw ConfigError("experiment needs a suite");
  if (rc.seeds.empty()) rc.seeds = {rc.trainer.seed};
  for (const auto& a : rc.ablations) {
    TrainConfig probe = rc.trainer;
    apply_ablation(probe, a);  // validates the name
  }
  for (const auto& b : rc.suite)
    if (b != "airfoil") benchmark_spec(b);
  rc.output = output_root(output, rc.output);
  std::size_t run_workers = workers.value_or(1);
  if (run_workers == 0) run_workers = static_cast<std::size_t>(omp_get_max_threads());
  rc.trainer.workers = 1;  // parallelism goes across runs

  struct Job {
    std::string benchmark, ablation;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& b : rc.suite)
    for (const auto& a : rc.ablations)
      for (auto s : rc.seeds) jobs.push_back({b, a, s});

  std::vector<std::string> lines(jobs.size());
  std::size_t failures = 0;
  const auto n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(run_workers)) reduction(+ : failures)
  for (long i = 0; i < n; ++i) {
    const auto& job = jobs[static_cast<std::size_t>(i)];
    const std::string method = method_label(rc.method, job.ablation);
    try {
      const auto r = execute_run(rc, job.benchmark, job.ablation, job.seed, rc.output);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s %s seed %llu: test_mse %.6g%s", job.benchmark.c_str(), method.c_str(),
                    static_cast<unsigned long long>(job.seed), r.best_test_mse, r.recovered ? " (recovered)" : "");
      lines[static_cast<std::size_t>(i)] = buf;
    } catch (const std::exception& e) {
      ++failures;
      const bool excluded = job.benchmark != "airfoil" && benchmark_spec(job.benchmark).excluded_from_stats;
      nlohmann::json j{{"benchmark", job.benchmark}, {"method", method},       {"seed", job.seed},
                       {"failed", true},             {"error", e.what()},      {"excluded_from_stats", excluded}};
      const fs::path dir = fs::path(rc.output) / job.benchmark / dir_name(method) / ("seed-" + std::to_string(job.seed));
      try {
        fs::remove(dir / "result.json");
        write_file(dir / "failed.json", j.dump(2) + "\n");
      } catch (const std::exception&) {
      }
      lines[static_cast<std::size_t>(i)] = job.benchmark + " " + method + " seed " + std::to_string(job.seed) +
                                           ": FAILED " + e.what();
    }
  }
  for (const auto& l : lines) std::cout << l << "\n";
  std::cout << jobs.size() - failures << " of " << jobs.size() << " runs finished; results under " << rc.output
            << "\n";
  return kOk;
}

int cmd_report(const std::string& results, const std::string& format, const std::string& out, double alpha) {
  if (!fs::is_directory(results)) {
    std::cerr << "results directory not found: " << results << "\n";
    return kUnreadable;
  }
  const auto table = load_run_table(results);
  if (table.empty()) std::cerr << "warning: no run results under " << results << "\n";
  const auto report = build_report(table, alpha);
  std::string dir = out;
  if (dir.empty()) dir = (fs::path(output_root("", "runs")) / "report").string();
  fs::create_directories(dir);
  std::vector<std::pair<ReportFormat, std::string>> targets;
  if (format == "all" || format == "json") targets.emplace_back(ReportFormat::Json, "report.json");
  if (format == "all" || format == "csv") targets.emplace_back(ReportFormat::Csv, "report.csv");
  if (format == "all" || format == "markdown" || format == "md")
    targets.emplace_back(ReportFormat::Markdown, "report.md");
  if (targets.empty()) throw ConfigError("unknown report format: " + format);
  for (const auto& [fmt, name] : targets) {
    emit_report(report, fmt, (fs::path(dir) / name).string());
    std::cout << (fs::path(dir) / name).string() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar-guided symbolic regression with a risk-seeking recurrent policy"};
  app.require_subcommand(1);

  std::string grammar_path;
  std::size_t nvar = 1;
  auto* validate = app.add_subcommand("validate", "Check a grammar file");
  validate->add_option("grammar", grammar_path, "Grammar file")->required();
  validate->add_option("--nvar", nvar, "Variable count for '1... nvar' productions")->capture_default_str();

  std::vector<std::string> bench_names;
  std::uint64_t bench_seed = 0;
  std::string bench_out = "benchmarks";
  auto* gen = app.add_subcommand("gen-bench", "Write benchmark datasets as CSV");
  gen->add_option("--name", bench_names, "Benchmarks to generate (default: all)")->delimiter(',');
  gen->add_option("--seed", bench_seed, "Sampling seed")->capture_default_str();
  gen->add_option("--out", bench_out, "Output directory")->capture_default_str();

  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::size_t> workers;
  std::string output;
  std::string which = "baseline";
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "Run configuration file")->required();
    cmd->add_option("--override", overrides, "section.key=value (repeatable)");
    cmd->add_option("--workers", workers, "Worker threads");
    cmd->add_option("--output", output, std::string("Output root (also $") + kOutputEnv + ")");
  };
  auto* train_cmd = app.add_subcommand("train", "Run one training");
  add_run_options(train_cmd);
  train_cmd->add_option("--seed", seed, "Run seed");

  auto* ablate = app.add_subcommand("ablate", "Run one training with a component removed");
  add_run_options(ablate);
  ablate->add_option("--seed", seed, "Run seed");
  ablate->add_option("--which", which, "Ablation name")->required()->check(CLI::IsMember(ablation_names()));

  std::string suite, seeds, ablations;
  auto* experiment = app.add_subcommand("experiment", "Run a benchmark x seed matrix");
  add_run_options(experiment);
  experiment->add_option("--suite", suite, "Comma-separated benchmarks (overrides experiment.suite)");
  experiment->add_option("--seeds", seeds, "Seeds, e.g. 1-10 (overrides experiment.seeds)");
  experiment->add_option("--ablations", ablations, "Comma-separated ablations (overrides experiment.ablations)");

  std::string results, format = "all", report_out;
  double alpha = 0.05;
  auto* report = app.add_subcommand("report", "Aggregate run results into tables");
  report->add_option("results", results, "Directory of run results")->required();
  report->add_option("--format", format, "json, csv, markdown or all")->capture_default_str();
  report->add_option("--out", report_out, "Report directory (default: $PCFGSR_OUTPUT_ROOT or runs/report)");
  report->add_option("--alpha", alpha, "Significance level")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*validate) return cmd_validate(grammar_path, nvar);
    if (*gen) return cmd_gen_bench(bench_names, bench_seed, bench_out);
    if (*train_cmd) return cmd_train(config, seed, overrides, workers, output, "baseline");
    if (*ablate) return cmd_train(config, seed, overrides, workers, output, which);
    if (*experiment) return cmd_experiment(config, overrides, suite, seeds, ablations, workers, output);
    if (*report) return cmd_report(results, format, report_out, alpha);
  } catch (const FileMissing& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnreadable;
  } catch (const TrainingError& e) {
    std::cerr << "error: training aborted: " << e.what() << "\n";
    return kTrainingFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
