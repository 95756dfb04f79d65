#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcfgsr/trainer.hpp"

namespace pcfgsr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `[section]` / `key = value` text; keys are stored as "section.key".
// `#` starts a comment line. Values may be double-quoted.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::string directory;  // for resolving relative paths; empty = cwd
};

ConfigFile parse_config(std::string_view text);
// Throws std::runtime_error if the file cannot be read.
ConfigFile load_config(const std::string& path);
// "section.key=value"; throws ConfigError on malformed input.
void apply_override(ConfigFile& cfg, std::string_view assignment);

struct RunConfig {
  std::string grammar;    // path
  std::string benchmark;  // benchmark name, or "airfoil"
  std::string csv;        // used when benchmark is empty, or for airfoil
  std::string target;
  double split = 0.7;
  std::string output = "runs";
  std::string method = "pcfgsr";
  std::vector<std::string> suite;    // experiment benchmarks
  std::vector<std::uint64_t> seeds;  // experiment seeds
  std::vector<std::string> ablations{"baseline"};
  TrainConfig trainer;
};

// Validates every field and resolves relative paths; throws ConfigError.
RunConfig resolve_run_config(const ConfigFile& file);

// Config text that resolve_run_config maps back to the same RunConfig.
std::string echo_config(const RunConfig& cfg);

// "1-10", "1,2,5" or a mix.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<std::string> parse_name_list(std::string_view text);

// Trainer seed for a (user seed, dataset label) pair, shared by every
// subcommand so `train --seed s` and an experiment row with seed s agree.
std::uint64_t run_seed(std::uint64_t seed, const std::string& label);

}  // namespace pcfgsr
