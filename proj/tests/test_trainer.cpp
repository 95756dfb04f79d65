#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "pcfgsr/benchmarks.hpp"
#include "pcfgsr/trainer.hpp"
#include "test_support.hpp"

using namespace pcfgsr;

namespace {

Grammar nguyen(std::size_t nvar = 1) {
  GrammarOptions o;
  o.nvar = nvar;
  return load_grammar_file(test::grammar_path("nguyen.bnf"), o);
}

TrainConfig tiny_config(std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.batch = 32;
  cfg.iterations = 4;
  cfg.hidden = 8;
  cfg.seed = seed;
  cfg.early_stop = false;
  return cfg;
}

}  // namespace

TEST_CASE("quantile filter examples") {
  SUBCASE("ten rewards, eps 0.2") {
    const std::vector<double> r{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    const auto sel = quantile_filter(r, 0.2);
    CHECK(sel.kept == std::vector<std::size_t>{8, 9});
    CHECK(sel.threshold == 0.8);
  }
  SUBCASE("all equal keeps the earliest") {
    const std::vector<double> r(20, 0.3);
    const auto sel = quantile_filter(r, 0.1);
    CHECK(sel.kept == std::vector<std::size_t>{0, 1});
    CHECK(sel.threshold == 0.3);
  }
  SUBCASE("eps 1 keeps everything at the minimum") {
    const std::vector<double> r{0.5, 0.2, 0.9};
    const auto sel = quantile_filter(r, 1.0);
    CHECK(sel.kept == std::vector<std::size_t>{0, 1, 2});
    CHECK(sel.threshold == 0.2);
  }
  SUBCASE("ties at the threshold fill in sample order") {
    const std::vector<double> r{0.5, 0.9, 0.5, 0.1, 0.5};
    const auto sel = quantile_filter(r, 0.4);  // keep 2
    CHECK(sel.kept == std::vector<std::size_t>{0, 1});
    CHECK(sel.threshold == 0.5);
  }
  SUBCASE("tiny eps keeps one") {
    const std::vector<double> r{0.4, 0.7, 0.2};
    const auto sel = quantile_filter(r, 1e-6);
    CHECK(sel.kept == std::vector<std::size_t>{1});
  }
  CHECK_THROWS_AS(quantile_filter(std::vector<double>{}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile_filter(std::vector<double>{1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(quantile_filter(std::vector<double>{1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("quantile filter properties on random batches") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const double eps = std::max(1e-3, uniform01(rng));
    std::vector<double> r(n);
    // coarse values so ties are common
    for (auto& v : r) v = std::floor(uniform01(rng) * 8.0) / 8.0;
    const auto sel = quantile_filter(r, eps);
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(eps * static_cast<double>(n) - 1e-12)));
    REQUIRE(sel.kept.size() == std::min(k, n));
    CHECK(std::is_sorted(sel.kept.begin(), sel.kept.end()));
    for (auto i : sel.kept) CHECK(r[i] >= sel.threshold);
    for (std::size_t i = 0; i < n; ++i)
      if (r[i] > sel.threshold) CHECK(std::find(sel.kept.begin(), sel.kept.end(), i) != sel.kept.end());
  }
}

TEST_CASE("single-rule grammar gives a one-step episode") {
  const auto g = parse_grammar("<s> ::= x[1]");
  PolicyShape shape;
  shape.actions = 1;
  shape.symbols = 1;
  shape.hidden = 4;
  const auto p = init_policy(shape, 1);
  Rng rng(1);
  const auto ep = sample_episode(p, g, ObservationConfig{}, rng);
  CHECK(ep.complete);
  CHECK(ep.trajectory().size() == 1);
  REQUIRE(ep.expression);
  CHECK(ep.expression->to_string() == "x[1]");
}

TEST_CASE("episodes stop at the horizon") {
  const auto g = nguyen();
  TrainConfig cfg = tiny_config();
  cfg.horizon = 3;
  const auto p = init_policy(cfg.policy_shape(g), 4);
  Rng rng(5);
  std::size_t incomplete = 0;
  for (int k = 0; k < 200; ++k) {
    const auto ep = sample_episode(p, g, cfg.observation(), rng);
    CHECK(ep.trajectory().size() <= 3);
    if (!ep.complete) {
      ++incomplete;
      CHECK_FALSE(ep.expression.has_value());
      CHECK(ep.reward == 0.0);
    }
  }
  CHECK(incomplete > 0);
}

TEST_CASE("serial and parallel batches agree bit for bit") {
  const auto g = nguyen(2);
  const TrainConfig cfg = tiny_config();
  auto p = init_policy(cfg.policy_shape(g), 3);
  p.prior_logits() = grammar_prior_logits(g);
  const auto a = sample_batch(p, g, cfg.observation(), 99, 7, 64, {}, Execution::Serial);
  const auto b = sample_batch(p, g, cfg.observation(), 99, 7, 64, {}, Execution::Parallel, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].trajectory() == b[k].trajectory());
    CHECK(a[k].replay.sampled_probs == b[k].replay.sampled_probs);
    CHECK(a[k].text == b[k].text);
  }
  const auto c = sample_batch(p, g, cfg.observation(), 99, 8, 64, {}, Execution::Serial);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].trajectory() != c[k].trajectory();
  CHECK(differs);
}

TEST_CASE("train config validation and json") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.check());
  CHECK(cfg.horizon == 50);
  CHECK(cfg.batch == 1000);
  CHECK(cfg.iterations == 2000);
  CHECK(cfg.entropy_weight == 0.005);
  CHECK(cfg.learning_rate == 0.001);

  auto bad = cfg;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  bad = cfg;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  bad = cfg;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  bad = cfg;
  bad.entropy_weight = -1.0;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);

  cfg.toggles.siblings = false;
  cfg.seed = 12345678901234ULL;
  const auto j = to_json(cfg);
  CHECK(j.at("use_siblings") == false);
  const auto back = train_config_from_json(j);
  CHECK(to_json(back) == j);
  auto extra = j;
  extra["mystery"] = 1;
  CHECK_THROWS_AS(train_config_from_json(extra), std::invalid_argument);
}

TEST_CASE("ablations") {
  const TrainConfig base;
  CHECK(apply_ablation(base, "no_entropy").entropy == false);
  CHECK(apply_ablation(base, "no_risk_seeking").risk_seeking == false);
  CHECK(apply_ablation(base, "no_parent").toggles.parent == false);
  CHECK(apply_ablation(base, "no_siblings").toggles.siblings == false);
  CHECK(apply_ablation(base, "no_past").toggles.past == false);
  CHECK(apply_ablation(base, "no_depth").toggles.depth == false);
  CHECK(apply_ablation(base, "no_symbol").toggles.symbol == false);
  CHECK(to_json(apply_ablation(base, "baseline")) == to_json(base));
  CHECK_THROWS_AS(apply_ablation(base, "no_everything"), std::invalid_argument);
  CHECK(ablation_names().size() == 8);
}

TEST_CASE("training run invariants") {
  const auto bm = generate_benchmark("N1", 1);
  const auto g = nguyen();
  auto cfg = tiny_config(3);
  cfg.iterations = 6;
  std::vector<IterationRecord> ledger;
  const auto r = train(cfg, g, bm.train, bm.test, [&](const IterationRecord& rec) { ledger.push_back(rec); });

  CHECK(r.iterations_run == 6);
  CHECK(r.expressions_sampled == cfg.batch * cfg.iterations);
  CHECK(ledger.size() == 6);
  CHECK(r.best_curve.size() == 6);
  CHECK(std::is_sorted(r.best_curve.begin(), r.best_curve.end()));
  for (std::size_t i = 1; i < ledger.size(); ++i) CHECK(ledger[i].best_mse <= ledger[i - 1].best_mse);
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    CHECK(ledger[i].max_reward <= r.best_curve[i] + 1e-15);
    CHECK(ledger[i].r_eps <= ledger[i].max_reward);
  }
  REQUIRE(r.best);
  CHECK(r.best_train_mse == ledger.back().best_mse);
  CHECK(std::isfinite(r.best_test_mse));
  CHECK(r.complexity == complexity(*r.best));
  CHECK(r.policy.shape() == cfg.policy_shape(g));

  const auto j = to_json(r);
  CHECK(j.at("benchmark").is_string());
  CHECK_FALSE(j.at("config").contains("workers"));
  CHECK_FALSE(j.contains("wall_seconds"));
}

TEST_CASE("zero iterations gives no solution") {
  const auto bm = generate_benchmark("N1", 1);
  auto cfg = tiny_config();
  cfg.iterations = 0;
  const auto r = train(cfg, nguyen(), bm.train, bm.test);
  CHECK_FALSE(r.best.has_value());
  CHECK(r.iterations_run == 0);
  CHECK_FALSE(r.recovered);
  CHECK(to_json(r).at("best_expression").is_null());
}

TEST_CASE("early stop on exact recovery") {
  const auto g = nguyen();
  Dataset train_set;
  train_set.feature_names = {"x1"};
  train_set.columns = {{-1.0, -0.5, 0.0, 0.5, 1.0}};
  train_set.target = train_set.columns[0];
  auto cfg = tiny_config(2);
  cfg.iterations = 50;
  cfg.early_stop = true;
  const auto r = train(cfg, g, train_set, train_set);
  CHECK(r.early_stopped);
  CHECK(r.recovered);
  CHECK(r.iterations_run < 50);
  CHECK(r.best_train_mse < kExactRecoveryMse);
}

TEST_CASE("runs are deterministic and independent of worker count") {
  const auto bm = generate_benchmark("N2", 4);
  const auto g = nguyen();
  auto cfg = tiny_config(11);
  const auto a = to_json(train(cfg, g, bm.train, bm.test)).dump();
  const auto b = to_json(train(cfg, g, bm.train, bm.test)).dump();
  CHECK(a == b);
  cfg.workers = 3;
  const auto c = to_json(train(cfg, g, bm.train, bm.test)).dump();
  CHECK(a == c);
  cfg.workers = 1;
  cfg.seed = 12;
  CHECK(to_json(train(cfg, g, bm.train, bm.test)).dump() != a);
}

TEST_CASE("risk-seeking off uses every episode") {
  const auto bm = generate_benchmark("N1", 2);
  auto cfg = apply_ablation(tiny_config(5), "no_risk_seeking");
  std::vector<IterationRecord> ledger;
  train(cfg, nguyen(), bm.train, bm.test, [&](const IterationRecord& rec) { ledger.push_back(rec); });
  for (const auto& rec : ledger) CHECK(rec.r_eps == doctest::Approx(rec.mean_reward));
}

TEST_CASE("constants are fitted when the grammar has them") {
  const auto g = parse_grammar("<e> ::= (<e>+<e>) | (const*x[1]) | x[1] || probs [0.2, 0.4, 0.4]");
  CHECK(g.uses_constants());
  Dataset d;
  d.feature_names = {"x1"};
  d.columns = {{1.0, 2.0, 3.0, 4.0}};
  d.target = {2.5, 5.0, 7.5, 10.0};
  auto cfg = tiny_config(6);
  cfg.iterations = 3;
  const auto r = train(cfg, g, d, d);
  REQUIRE(r.best);
  CHECK(r.best->constant_count() == 0);  // frozen into literals
  CHECK(r.best_train_mse < 1e-6);
}
