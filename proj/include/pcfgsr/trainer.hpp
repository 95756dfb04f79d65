#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcfgsr/dataset.hpp"
#include "pcfgsr/derivation.hpp"
#include "pcfgsr/evaluator.hpp"
#include "pcfgsr/expression.hpp"
#include "pcfgsr/grammar.hpp"
#include "pcfgsr/policy.hpp"

namespace pcfgsr {

struct TrainConfig {
  std::size_t horizon = 50;
  std::size_t batch = 1000;
  std::size_t iterations = 2000;
  double epsilon = 0.05;
  double entropy_weight = 0.005;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;

  ObservationToggles toggles;
  bool risk_seeking = true;
  bool entropy = true;

  std::size_t hidden = 64;
  std::size_t embedding = 8;
  std::size_t encoder = 16;
  std::size_t past_window = 10;
  std::size_t sibling_window = 4;

  // Add the grammar's rule log-probabilities to the action logits.
  bool grammar_prior = true;
  bool fit_constants = true;  // only matters if the grammar has `const`
  int constant_budget = 50;
  bool early_stop = true;
  std::size_t workers = 1;

  // Throws std::invalid_argument naming the offending field.
  void check() const;
  ObservationConfig observation() const;
  PolicyShape policy_shape(const Grammar& g) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys throw.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Episode {
  PolicyEpisode replay;
  bool complete = false;
  std::string text;                   // derivation text, pending symbols included
  std::optional<Expression> expression;
  double train_mse = std::numeric_limits<double>::infinity();
  double reward = 0.0;

  const std::vector<ActionId>& trajectory() const { return replay.actions; }
};

// One rollout of Algorithm 1: observe, forward, sample, expand until the
// derivation completes or `horizon` actions were taken. Expressions are
// built with `feature_names` so `x.name` terminals resolve.
Episode sample_episode(const PolicyParameters& policy, const Grammar& g, const ObservationConfig& obs,
                       Rng& rng, std::span<const std::string> feature_names = {});

// B episodes; episode k draws from its own stream seeded by
// (seed, iteration, k), so Serial and Parallel agree bit for bit.
std::vector<Episode> sample_batch(const PolicyParameters& policy, const Grammar& g, const ObservationConfig& obs,
                                  std::uint64_t seed, std::size_t iteration, std::size_t count,
                                  std::span<const std::string> feature_names, Execution mode,
                                  std::size_t workers = 0);

struct QuantileSelection {
  std::vector<std::size_t> kept;  // indices into the batch, sample order
  double threshold = 0.0;         // R_eps
};

// Keeps max(1, ceil(eps * n)) episodes: all rewards above R_eps, then ties
// at R_eps in sample order.
QuantileSelection quantile_filter(std::span<const double> rewards, double epsilon);

std::size_t kept_count(std::size_t batch, double epsilon);

// Episodes and advantages for one update. Risk-seeking keeps the top
// quantile with advantage R - R_eps; otherwise every episode gets R - mean.
// `baseline` receives R_eps or the mean.
std::vector<WeightedEpisode> weight_batch(const std::vector<Episode>& batch, bool risk_seeking, double epsilon,
                                          double* baseline = nullptr);

struct IterationRecord {
  std::size_t iteration = 0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  double r_eps = 0.0;
  double best_mse = std::numeric_limits<double>::infinity();
  std::string best_expression;
  std::size_t complete = 0;
};

nlohmann::json to_json(const IterationRecord& r);

struct RunResult {
  TrainConfig config;
  std::string benchmark;  // dataset label, filled in by the caller
  std::string method = "pcfgsr";
  std::string ablation = "baseline";
  std::optional<Expression> best;
  std::string best_expression;  // printed with feature names
  std::vector<ActionId> best_trajectory;  // actions that derived `best`
  double best_train_mse = std::numeric_limits<double>::infinity();
  double best_test_mse = std::numeric_limits<double>::infinity();
  double test_r2 = std::numeric_limits<double>::quiet_NaN();
  bool recovered = false;
  std::size_t complexity = 0;
  std::vector<double> reward_curve;  // best reward in each iteration's batch
  std::vector<double> best_curve;    // best-so-far reward after each iteration
  std::size_t iterations_run = 0;
  std::size_t expressions_sampled = 0;
  bool early_stopped = false;
  double wall_seconds = 0.0;  // kept out of to_json so results stay byte-stable
  PolicyParameters policy;    // final parameters
};

// Deterministic document; wall time is written separately.
nlohmann::json to_json(const RunResult& r);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

// Algorithm 2. Rewards use `train`; the best expression is scored on
// `test` at the end. Throws TrainingError on a non-finite gradient.
RunResult train(const TrainConfig& cfg, const Grammar& g, const Dataset& train, const Dataset& test,
                const IterationCallback& on_iteration = {});

// Ablation names: baseline, no_entropy, no_risk_seeking, no_parent,
// no_siblings, no_past, no_depth, no_symbol.
const std::vector<std::string>& ablation_names();
TrainConfig apply_ablation(TrainConfig cfg, const std::string& which);
RunResult run_ablation(const TrainConfig& cfg, const std::string& which, const Grammar& g, const Dataset& train,
                       const Dataset& test, const IterationCallback& on_iteration = {});

}  // namespace pcfgsr
