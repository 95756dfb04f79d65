#include "pcfgsr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include <omp.h>

namespace pcfgsr {

void TrainConfig::check() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("trainer." + what); };
  if (horizon < 1) fail("horizon must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) fail("epsilon must be in (0, 1]");
  if (!(entropy_weight >= 0.0) || !std::isfinite(entropy_weight)) fail("entropy_weight must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (hidden < 1) fail("hidden must be >= 1");
  if (embedding < 1) fail("embedding must be >= 1");
  if (encoder < 1) fail("encoder must be >= 1");
  if (constant_budget < 1) fail("constant_budget must be >= 1");
}

ObservationConfig TrainConfig::observation() const {
  ObservationConfig o;
  o.past_window = past_window;
  o.sibling_window = sibling_window;
  o.horizon = horizon;
  o.toggles = toggles;
  return o;
}

PolicyShape TrainConfig::policy_shape(const Grammar& g) const {
  PolicyShape s;
  s.actions = g.action_count();
  s.symbols = g.nonterminal_count();
  s.hidden = hidden;
  s.embedding = embedding;
  s.encoder = encoder;
  s.past_window = past_window;
  s.sibling_window = sibling_window;
  return s;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"horizon", c.horizon},
      {"batch", c.batch},
      {"iterations", c.iterations},
      {"epsilon", c.epsilon},
      {"entropy_weight", c.entropy_weight},
      {"learning_rate", c.learning_rate},
      {"seed", c.seed},
      {"use_parent", c.toggles.parent},
      {"use_siblings", c.toggles.siblings},
      {"use_past", c.toggles.past},
      {"use_depth", c.toggles.depth},
      {"use_symbol", c.toggles.symbol},
      {"use_risk_seeking", c.risk_seeking},
      {"use_entropy", c.entropy},
      {"hidden", c.hidden},
      {"embedding", c.embedding},
      {"encoder", c.encoder},
      {"past_window", c.past_window},
      {"sibling_window", c.sibling_window},
      {"grammar_prior", c.grammar_prior},
      {"fit_constants", c.fit_constants},
      {"constant_budget", c.constant_budget},
      {"early_stop", c.early_stop},
      {"workers", c.workers},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "horizon") c.horizon = v.get<std::size_t>();
    else if (key == "batch") c.batch = v.get<std::size_t>();
    else if (key == "iterations") c.iterations = v.get<std::size_t>();
    else if (key == "epsilon") c.epsilon = v.get<double>();
    else if (key == "entropy_weight") c.entropy_weight = v.get<double>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "use_parent") c.toggles.parent = v.get<bool>();
    else if (key == "use_siblings") c.toggles.siblings = v.get<bool>();
    else if (key == "use_past") c.toggles.past = v.get<bool>();
    else if (key == "use_depth") c.toggles.depth = v.get<bool>();
    else if (key == "use_symbol") c.toggles.symbol = v.get<bool>();
    else if (key == "use_risk_seeking") c.risk_seeking = v.get<bool>();
    else if (key == "use_entropy") c.entropy = v.get<bool>();
    else if (key == "hidden") c.hidden = v.get<std::size_t>();
    else if (key == "embedding") c.embedding = v.get<std::size_t>();
    else if (key == "encoder") c.encoder = v.get<std::size_t>();
    else if (key == "past_window") c.past_window = v.get<std::size_t>();
    else if (key == "sibling_window") c.sibling_window = v.get<std::size_t>();
    else if (key == "grammar_prior") c.grammar_prior = v.get<bool>();
    else if (key == "fit_constants") c.fit_constants = v.get<bool>();
    else if (key == "constant_budget") c.constant_budget = v.get<int>();
    else if (key == "early_stop") c.early_stop = v.get<bool>();
    else if (key == "workers") c.workers = v.get<std::size_t>();
    else throw std::invalid_argument("unknown trainer key: " + key);
  }
  return c;
}

Episode sample_episode(const PolicyParameters& policy, const Grammar& g, const ObservationConfig& obs, Rng& rng,
                       std::span<const std::string> feature_names) {
  Episode ep;
  DerivationState state(g);
  ep.replay.initial = initial_hidden(policy.shape().hidden, rng);
  HiddenState eta = ep.replay.initial;
  while (!state.is_complete() && state.depth() < obs.horizon) {
    auto o = state.observe(obs);
    auto fr = forward(policy, o, eta);
    const ActionId a = sample_action(fr.probs, rng);
    ep.replay.sampled_probs.push_back(fr.probs[a]);
    state.apply(a);
    ep.replay.observations.push_back(std::move(o));
    ep.replay.actions.push_back(a);
    eta = std::move(fr.next);
  }
  ep.complete = state.is_complete();
  ep.text = state.text();
  if (ep.complete) {
    try {
      ep.expression = to_expression(state, feature_names);
    } catch (const ExpressionError&) {
      // the grammar produced text outside the expression language; such an
      // episode simply earns no reward
    }
  }
  return ep;
}

std::vector<Episode> sample_batch(const PolicyParameters& policy, const Grammar& g, const ObservationConfig& obs,
                                  std::uint64_t seed, std::size_t iteration, std::size_t count,
                                  std::span<const std::string> feature_names, Execution mode, std::size_t workers) {
  std::vector<Episode> out(count);
  auto one = [&](std::size_t k) {
    Rng rng(derive_seed({seed, iteration, k}));
    out[k] = sample_episode(policy, g, obs, rng, feature_names);
  };
  if (mode == Execution::Serial) {
    for (std::size_t k = 0; k < count; ++k) one(k);
    return out;
  }
  std::exception_ptr error;
  const int threads = workers > 0 ? static_cast<int>(workers) : omp_get_max_threads();
  const auto n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads) if (threads != 1)
  for (long k = 0; k < n; ++k) {
    try {
      one(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(pcfgsr_sample_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<WeightedEpisode> weight_batch(const std::vector<Episode>& batch, bool risk_seeking, double epsilon,
                                          double* baseline) {
  std::vector<double> rewards(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) rewards[k] = batch[k].reward;
  std::vector<WeightedEpisode> weighted;
  double b = 0.0;
  if (risk_seeking) {
    const auto sel = quantile_filter(rewards, epsilon);
    b = sel.threshold;
    for (auto k : sel.kept) weighted.push_back({&batch[k].replay, rewards[k] - b});
  } else {
    for (double r : rewards) b += r;
    b /= static_cast<double>(std::max<std::size_t>(1, rewards.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) weighted.push_back({&batch[k].replay, rewards[k] - b});
  }
  if (baseline) *baseline = b;
  return weighted;
}

std::size_t kept_count(std::size_t batch, double epsilon) {
  const auto k = static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(batch) - 1e-12));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(batch, 1));
}

QuantileSelection quantile_filter(std::span<const double> rewards, double epsilon) {
  if (rewards.empty()) throw std::invalid_argument("quantile_filter on an empty batch");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in (0, 1]");
  const std::size_t n = rewards.size();
  const std::size_t k = kept_count(n, epsilon);
  std::vector<double> sorted(rewards.begin(), rewards.end());
  std::sort(sorted.begin(), sorted.end());
  QuantileSelection sel;
  sel.threshold = sorted[n > k ? n - k - 1 : 0];
  if (k == n) {
    sel.kept.resize(n);
    std::iota(sel.kept.begin(), sel.kept.end(), 0);
    return sel;
  }
  std::vector<bool> take(n, false);
  std::size_t taken = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (rewards[i] > sel.threshold) {
      take[i] = true;
      ++taken;
    }
  for (std::size_t i = 0; i < n && taken < k; ++i)
    if (!take[i] && rewards[i] == sel.threshold) {
      take[i] = true;
      ++taken;
    }
  for (std::size_t i = 0; i < n; ++i)
    if (take[i]) sel.kept.push_back(i);
  return sel;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},          {"mean_reward", r.mean_reward},
          {"max_reward", r.max_reward},        {"R_eps", r.r_eps},
          {"best_mse", number_or_null(r.best_mse)}, {"best_expression", r.best_expression},
          {"complete", r.complete}};
}

namespace {

std::vector<std::size_t> one_based(const std::vector<ActionId>& actions) {
  std::vector<std::size_t> out(actions.begin(), actions.end());
  for (auto& a : out) ++a;
  return out;
}

}  // namespace

nlohmann::json to_json(const RunResult& r) {
  auto cfg = to_json(r.config);
  cfg.erase("workers");  // does not affect results
  return {
      {"benchmark", r.benchmark},
      {"method", r.method},
      {"ablation", r.ablation},
      {"seed", r.config.seed},
      {"config", cfg},
      {"best_expression", r.best ? nlohmann::json(r.best->to_string()) : nlohmann::json(nullptr)},
      {"best_expression_named", r.best ? nlohmann::json(r.best_expression) : nlohmann::json(nullptr)},
      {"best_trajectory", one_based(r.best_trajectory)},
      {"best_train_mse", number_or_null(r.best_train_mse)},
      {"best_test_mse", number_or_null(r.best_test_mse)},
      {"test_r2", number_or_null(r.test_r2)},
      {"recovered", r.recovered},
      {"complexity", r.complexity},
      {"iterations_run", r.iterations_run},
      {"expressions_sampled", r.expressions_sampled},
      {"early_stopped", r.early_stopped},
      {"reward_curve", r.reward_curve},
      {"best_curve", r.best_curve},
  };
}

RunResult train(const TrainConfig& cfg, const Grammar& g, const Dataset& train_data, const Dataset& test,
                const IterationCallback& on_iteration) {
  cfg.check();
  train_data.check();
  if (train_data.rows() == 0) throw std::invalid_argument("training set is empty");
  const auto started = std::chrono::steady_clock::now();

  RunResult result;
  result.config = cfg;
  const auto& names = train_data.feature_names;
  const auto obs = cfg.observation();
  const Execution mode = cfg.workers == 1 ? Execution::Serial : Execution::Parallel;
  const double lambda = cfg.entropy ? cfg.entropy_weight : 0.0;
  const bool fit = cfg.fit_constants && g.uses_constants();
  const std::size_t fit_count = kept_count(cfg.batch, cfg.epsilon);

  PolicyParameters policy = init_policy(cfg.policy_shape(g), derive_seed({cfg.seed, hash_string("policy")}));
  if (cfg.grammar_prior) policy.prior_logits() = grammar_prior_logits(g);
  PolicyOptimizer optimizer(PolicyOptimizer::Kind::Adam, cfg.learning_rate);

  double best_reward = 0.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto batch = sample_batch(policy, g, obs, cfg.seed, it, cfg.batch, names, mode, cfg.workers);
    result.expressions_sampled += batch.size();

    std::vector<std::size_t> evaluable;
    std::vector<Expression> exprs;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& e = batch[k].expression;
      if (e && !e->empty() && e->required_width() <= train_data.width()) {
        evaluable.push_back(k);
        exprs.push_back(*e);
      }
    }
    const auto mses = evaluate_mse_batch(exprs, train_data, mode);
    for (std::size_t i = 0; i < evaluable.size(); ++i) {
      auto& ep = batch[evaluable[i]];
      ep.train_mse = mses[i];
      ep.reward = reward_from_mse(mses[i]);
    }

    if (fit) {
      std::vector<std::size_t> order;
      for (auto k : evaluable)
        if (batch[k].expression->constant_count() > 0) order.push_back(k);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return batch[a].reward > batch[b].reward; });
      if (order.size() > fit_count) order.resize(fit_count);
      const auto n = static_cast<long>(order.size());
#pragma omp parallel for schedule(dynamic, 1) if (mode == Execution::Parallel)
      for (long i = 0; i < n; ++i) {
        auto& ep = batch[order[static_cast<std::size_t>(i)]];
        ConstantFitOptions opts;
        opts.budget = cfg.constant_budget;
        opts.seed = derive_seed({cfg.seed, it, order[static_cast<std::size_t>(i)], hash_string("constants")});
        ep.expression = fit_constants(*ep.expression, train_data, opts);
        EvalWorkspace ws;
        ep.train_mse = expression_mse(*ep.expression, train_data, ws);
        ep.reward = reward_from_mse(ep.train_mse);
      }
    }

    std::vector<double> rewards(batch.size());
    IterationRecord rec;
    rec.iteration = it;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      rewards[k] = batch[k].reward;
      rec.mean_reward += rewards[k];
      rec.max_reward = std::max(rec.max_reward, rewards[k]);
      rec.complete += batch[k].complete;
      if (batch[k].expression && batch[k].train_mse < result.best_train_mse) {
        result.best_train_mse = batch[k].train_mse;
        result.best = batch[k].expression;
        result.best_trajectory = batch[k].trajectory();
        best_reward = batch[k].reward;
      }
    }
    rec.mean_reward /= static_cast<double>(batch.size());

    const auto weighted = weight_batch(batch, cfg.risk_seeking, cfg.epsilon, &rec.r_eps);

    PolicyParameters grad;
    try {
      grad = gradient(policy, weighted, lambda);
    } catch (const std::runtime_error& e) {
      throw TrainingError("iteration " + std::to_string(it) + ": " + e.what());
    }
    optimizer.step(policy, grad);

    rec.best_mse = result.best_train_mse;
    rec.best_expression = result.best ? result.best->to_string() : std::string{};
    result.reward_curve.push_back(rec.max_reward);
    result.best_curve.push_back(best_reward);
    result.iterations_run = it + 1;
    if (on_iteration) on_iteration(rec);

    if (cfg.early_stop && result.best_train_mse < kExactRecoveryMse) {
      result.early_stopped = true;
      break;
    }
  }

  result.policy = std::move(policy);
  if (result.best) {
    result.best_expression = result.best->to_string(names);
    result.complexity = complexity(*result.best);
    if (test.rows() > 0 && result.best->required_width() <= test.width()) {
      const auto y_hat = evaluate(*result.best, test);
      result.best_test_mse = mse(test.target, y_hat);
      result.test_r2 = r_squared(test.target, y_hat);
      result.recovered = exact_recovery(*result.best, test);
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"baseline", "no_entropy", "no_risk_seeking", "no_parent",
                                              "no_siblings", "no_past", "no_depth", "no_symbol"};
  return names;
}

TrainConfig apply_ablation(TrainConfig cfg, const std::string& which) {
  if (which == "baseline") return cfg;
  if (which == "no_entropy") cfg.entropy = false;
  else if (which == "no_risk_seeking") cfg.risk_seeking = false;
  else if (which == "no_parent") cfg.toggles.parent = false;
  else if (which == "no_siblings") cfg.toggles.siblings = false;
  else if (which == "no_past") cfg.toggles.past = false;
  else if (which == "no_depth") cfg.toggles.depth = false;
  else if (which == "no_symbol") cfg.toggles.symbol = false;
  else throw std::invalid_argument("unknown ablation: " + which);
  return cfg;
}

RunResult run_ablation(const TrainConfig& cfg, const std::string& which, const Grammar& g, const Dataset& train_data,
                       const Dataset& test, const IterationCallback& on_iteration) {
  auto result = train(apply_ablation(cfg, which), g, train_data, test, on_iteration);
  result.ablation = which;
  if (which != "baseline") result.method += ":" + which;
  return result;
}

}  // namespace pcfgsr
