#include "pcfgsr/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "pcfgsr/benchmarks.hpp"
#include "pcfgsr/grammar.hpp"

namespace pcfgsr {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string resolve_path(const std::string& dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute() || dir.empty()) return fs::absolute(path).lexically_normal().string();
  const fs::path near_config = fs::path(dir) / path;
  if (fs::exists(near_config)) return fs::absolute(near_config).lexically_normal().string();
  return fs::absolute(path).lexically_normal().string();
}

}  // namespace

ConfigFile parse_config(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    cfg.values[section.empty() ? key : section + "." + key] = unquote(trim(std::string_view(line).substr(eq + 1)));
  }
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  auto cfg = parse_config(read_text_file(path));
  cfg.directory = fs::absolute(fs::path(path)).parent_path().string();
  return cfg;
}

void apply_override(ConfigFile& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override must look like section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.find('.') == std::string::npos) throw ConfigError("override key needs a section: " + key);
  cfg.values[key] = unquote(trim(assignment.substr(eq + 1)));
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : parse_name_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_uint("seeds", item));
      continue;
    }
    const auto lo = parse_uint("seeds", item.substr(0, dash));
    const auto hi = parse_uint("seeds", item.substr(dash + 1));
    if (hi < lo) throw ConfigError("seeds: empty range " + item);
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

std::vector<std::string> parse_name_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& label) {
  return derive_seed({seed, hash_string(label)});
}

RunConfig resolve_run_config(const ConfigFile& file) {
  RunConfig rc;
  nlohmann::json trainer = to_json(rc.trainer);
  for (const auto& [key, value] : file.values) {
    if (key == "run.grammar") rc.grammar = resolve_path(file.directory, value);
    else if (key == "run.benchmark") rc.benchmark = value;
    else if (key == "run.csv") rc.csv = resolve_path(file.directory, value);
    else if (key == "run.target") rc.target = value;
    else if (key == "run.split") rc.split = parse_double(key, value);
    else if (key == "run.output") rc.output = value;
    else if (key == "run.method") rc.method = value;
    else if (key == "experiment.suite") rc.suite = parse_name_list(value);
    else if (key == "experiment.seeds") rc.seeds = parse_seed_list(value);
    else if (key == "experiment.ablations") rc.ablations = parse_name_list(value);
    else if (key.rfind("trainer.", 0) == 0) {
      const std::string field = key.substr(8);
      if (!trainer.contains(field)) throw ConfigError("unknown trainer key: " + key);
      const auto& current = trainer[field];
      if (current.is_boolean()) trainer[field] = parse_bool(key, value);
      else if (current.is_number_float()) trainer[field] = parse_double(key, value);
      else if (field == "constant_budget") trainer[field] = static_cast<int>(parse_uint(key, value));
      else trainer[field] = parse_uint(key, value);
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  try {
    rc.trainer = train_config_from_json(trainer);
    rc.trainer.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (rc.grammar.empty()) throw ConfigError("run.grammar is required");
  if (!fs::exists(rc.grammar)) throw ConfigError("grammar file not found: " + rc.grammar);
  if (!(rc.split > 0.0 && rc.split <= 1.0)) throw ConfigError("run.split must be in (0, 1]");
  if (!rc.benchmark.empty() && rc.benchmark != "airfoil") {
    try {
      benchmark_spec(rc.benchmark);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (rc.benchmark.empty() && rc.csv.empty() && rc.suite.empty())
    throw ConfigError("one of run.benchmark, run.csv or experiment.suite is required");
  if (!rc.csv.empty() && !fs::exists(rc.csv)) throw ConfigError("dataset file not found: " + rc.csv);
  for (const auto& b : rc.suite) {
    if (b == "airfoil") continue;
    try {
      benchmark_spec(b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& a : rc.ablations)
    if (std::find(ablation_names().begin(), ablation_names().end(), a) == ablation_names().end())
      throw ConfigError("unknown ablation: " + a);
  return rc;
}

std::string echo_config(const RunConfig& rc) {
  std::ostringstream os;
  os << "[run]\n";
  os << "grammar = \"" << rc.grammar << "\"\n";
  if (!rc.benchmark.empty()) os << "benchmark = " << rc.benchmark << "\n";
  if (!rc.csv.empty()) os << "csv = \"" << rc.csv << "\"\n";
  if (!rc.target.empty()) os << "target = " << rc.target << "\n";
  os << "split = " << format_double(rc.split) << "\n";
  os << "output = \"" << rc.output << "\"\n";
  os << "method = " << rc.method << "\n";
  if (!rc.suite.empty() || !rc.seeds.empty()) {
    os << "\n[experiment]\n";
    auto join = [](const auto& v) {
      std::ostringstream j;
      for (std::size_t i = 0; i < v.size(); ++i) j << (i ? "," : "") << v[i];
      return j.str();
    };
    if (!rc.suite.empty()) os << "suite = " << join(rc.suite) << "\n";
    if (!rc.seeds.empty()) os << "seeds = " << join(rc.seeds) << "\n";
    os << "ablations = " << join(rc.ablations) << "\n";
  }
  os << "\n[trainer]\n";
  const nlohmann::json trainer = to_json(rc.trainer);
  for (const auto& [key, v] : trainer.items()) {
    os << key << " = ";
    if (v.is_number_float()) os << format_double(v.get<double>());
    else os << v.dump();
    os << "\n";
  }
  return os.str();
}

}  // namespace pcfgsr
