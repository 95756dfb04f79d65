#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "pcfgsr/policy.hpp"
#include "pcfgsr/trainer.hpp"
#include "test_support.hpp"

using namespace pcfgsr;

namespace {

Grammar nguyen(std::size_t nvar = 1) {
  GrammarOptions o;
  o.nvar = nvar;
  return load_grammar_file(test::grammar_path("nguyen.bnf"), o);
}

PolicyShape shape_for(const Grammar& g, std::size_t hidden = 8) {
  PolicyShape s;
  s.actions = g.action_count();
  s.symbols = g.nonterminal_count();
  s.hidden = hidden;
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pcfgsr_test_" + name);
}

}  // namespace

TEST_CASE("masked softmax") {
  SUBCASE("equal logits spread over allowed actions") {
    const std::vector<double> logits(6, 0.3);
    const Mask m{true, false, true, true, false, true};
    const auto p = masked_softmax(logits, m);
    for (std::size_t i = 0; i < 6; ++i) CHECK(p[i] == (m[i] ? 0.25 : 0.0));
  }
  SUBCASE("restricted softmax oracle") {
    const std::vector<double> logits{1.0, -2.0, 0.5, 3.0, 700.0};
    const Mask m{true, true, true, true, false};
    const auto p = masked_softmax(logits, m);
    double z = 0.0;
    for (int i = 0; i < 4; ++i) z += std::exp(logits[i]);
    for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(std::exp(logits[i]) / z).epsilon(1e-14));
    CHECK(p[4] == 0.0);
  }
  SUBCASE("extreme logits stay finite") {
    const auto p = masked_softmax(std::vector<double>{1e300, -1e300, 0.0}, Mask{true, true, true});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
  }
  CHECK_THROWS_AS(masked_softmax(std::vector<double>{1.0, 2.0}, Mask{false, false}), std::invalid_argument);
  CHECK_THROWS_AS(masked_softmax(std::vector<double>{1.0}, Mask{true, true}), std::invalid_argument);
}

TEST_CASE("step entropy") {
  CHECK(step_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, Mask(4, true)) == doctest::Approx(std::log(4.0)));
  CHECK(step_entropy(std::vector<double>{1.0, 0.0}, Mask{true, true}) == 0.0);
  CHECK(step_entropy(std::vector<double>{0.5, 0.0, 0.5}, Mask{true, false, true}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("init policy") {
  const auto g = nguyen();
  const auto a = init_policy(shape_for(g, 16), 11);
  const auto b = init_policy(shape_for(g, 16), 11);
  const auto c = init_policy(shape_for(g, 16), 12);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.info(Block::HeadB).rows == 20);  // one logit per action
  CHECK(a.info(Block::Embedding).cols == 21);  // plus the null token
  for (double v : a.values()) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(init_policy(g.action_count(), g.nonterminal_count(), 0, 1), std::invalid_argument);
}

TEST_CASE("forward respects the mask and is pure") {
  const auto g = nguyen();
  auto p = init_policy(shape_for(g), 3);
  p.prior_logits() = grammar_prior_logits(g);
  Rng rng(4);
  const auto eta = initial_hidden(8, rng);
  DerivationState s(g);
  const auto obs = s.observe({});
  const auto r1 = forward(p, obs, eta);
  const auto r2 = forward(p, obs, eta);
  CHECK(r1.probs == r2.probs);
  CHECK(r1.next.h == r2.next.h);
  double sum = 0.0;
  for (std::size_t a = 0; a < r1.probs.size(); ++a) {
    sum += r1.probs[a];
    if (obs.mask[a]) {
      CHECK(r1.probs[a] >= 1e-6);
    } else {
      CHECK(r1.probs[a] == 0.0);
    }
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  for (double v : r1.next.h) CHECK(std::isfinite(v));
  for (double v : r1.next.c) CHECK(std::isfinite(v));
}

TEST_CASE("sampling never returns a zero-probability index") {
  Rng rng(9);
  const std::vector<double> probs{0.0, 0.5, 0.0, 0.5, 0.0};
  for (int i = 0; i < 2000; ++i) {
    const auto a = sample_action(probs, rng);
    CHECK((a == 1 || a == 3));
  }
}

TEST_CASE("masking soundness on random policies and grammars") {
  const auto rep = oracle::check_masking(derive_seed({5, hash_string("mask")}), 20000);
  CHECK(rep.sampled >= 20000);
  CHECK(rep.masked_hits == 0);
  CHECK(rep.masked_mass == 0);
  CHECK(rep.max_sum_error <= 1e-9);
}

TEST_CASE("analytic gradient matches central differences") {
  const auto rep = oracle::check_gradient(derive_seed({6, hash_string("grad")}), 20);
  CHECK(rep.configs == 20);
  CHECK(rep.parameters > 1000);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("replay reproduces sampling-time probabilities") {
  const auto g = nguyen(2);
  auto p = init_policy(shape_for(g), 21);
  p.prior_logits() = grammar_prior_logits(g);
  Rng rng(22);
  ObservationConfig obs;
  for (int k = 0; k < 50; ++k) {
    const auto ep = sample_episode(p, g, obs, rng);
    const auto lp = episode_logprob_and_entropy(p, ep.replay);
    double expected = 0.0;
    for (double q : ep.replay.sampled_probs) expected += std::log(q);
    CHECK(lp.log_prob == doctest::Approx(expected).epsilon(1e-12));
    CHECK(lp.entropy >= 0.0);
  }
}

TEST_CASE("replay of an impossible action is an error") {
  const auto g = nguyen();
  const auto p = init_policy(shape_for(g), 1);
  Rng rng(2);
  auto ep = sample_episode(p, g, ObservationConfig{}, rng);
  REQUIRE(!ep.replay.actions.empty());
  // first action must come from <e>; point it at a <sop> rule instead
  ep.replay.actions[0] = g.production(*g.find_symbol("<sop>")).first;
  CHECK_THROWS_AS(episode_logprob_and_entropy(p, ep.replay), ReplayError);
}

TEST_CASE("zero advantages and no entropy give a zero gradient") {
  const auto g = parse_grammar(oracle::kSmallGrammar);
  const auto p = init_policy(shape_for(g, 4), 8);
  Rng rng(3);
  std::vector<Episode> eps;
  for (int k = 0; k < 5; ++k) eps.push_back(sample_episode(p, g, ObservationConfig{}, rng));
  std::vector<WeightedEpisode> batch;
  for (const auto& e : eps) batch.push_back({&e.replay, 0.0});
  const auto grad = gradient(p, batch, 0.0);
  for (double v : grad.values()) CHECK(v == 0.0);
}

TEST_CASE("non-finite advantage is rejected") {
  const auto g = parse_grammar(oracle::kSmallGrammar);
  auto p = init_policy(shape_for(g, 4), 8);
  Rng rng(3);
  const auto ep = sample_episode(p, g, ObservationConfig{}, rng);
  std::vector<WeightedEpisode> batch{{&ep.replay, std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(gradient(p, batch, 0.0), std::invalid_argument);
}

TEST_CASE("non-finite gradient names the block") {
  const auto g = parse_grammar(oracle::kSmallGrammar);
  auto p = init_policy(shape_for(g, 4), 8);
  Rng rng(3);
  const auto ep = sample_episode(p, g, ObservationConfig{}, rng);
  std::vector<WeightedEpisode> batch{{&ep.replay, 1.0}};
  p.block(Block::LstmB)[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    gradient(p, batch, 0.0);
    FAIL("expected a runtime_error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("non-finite gradient in block") != std::string::npos);
  }
}

TEST_CASE("plain update and adam ascend the objective") {
  const auto g = parse_grammar(oracle::kSmallGrammar);
  auto p = init_policy(shape_for(g, 4), 30);
  Rng rng(31);
  std::vector<Episode> eps;
  for (int k = 0; k < 3; ++k) eps.push_back(sample_episode(p, g, ObservationConfig{}, rng));
  std::vector<WeightedEpisode> batch;
  for (const auto& e : eps) batch.push_back({&e.replay, 1.0});

  const double before = objective(p, batch, 0.01);
  const auto grad = gradient(p, batch, 0.01);
  const auto stepped = update(p, grad, 1e-3);
  CHECK(stepped.values()[0] == p.values()[0] + 1e-3 * grad.values()[0]);
  CHECK(objective(stepped, batch, 0.01) > before);

  PolicyOptimizer adam(PolicyOptimizer::Kind::Adam, 1e-3);
  auto q = p;
  for (int i = 0; i < 10; ++i) adam.step(q, gradient(q, batch, 0.01));
  CHECK(objective(q, batch, 0.01) > before);
}

TEST_CASE("checkpoints round-trip") {
  const auto g = nguyen(3);
  auto p = init_policy(shape_for(g, 5), 77);
  p.prior_logits() = grammar_prior_logits(g);
  p.values()[3] = 1.0 / 3.0;
  p.values()[4] = -0.0;

  const auto bin = temp_file("policy.bin");
  save_policy_binary(p, bin.string());
  const auto back = load_policy_binary(bin.string());
  CHECK(back == p);
  CHECK(std::signbit(back.values()[4]));

  const auto json_back = policy_from_json(policy_to_json(p));
  CHECK(json_back.shape() == p.shape());
  CHECK(json_back.values() == p.values());
  CHECK(json_back.prior_logits() == p.prior_logits());

  SUBCASE("corrupt files are rejected") {
    {
      std::ofstream out(bin, std::ios::binary);
      out << "NOTAPOLICY";
    }
    CHECK_THROWS(load_policy_binary(bin.string()));
    CHECK_THROWS(load_policy_binary(temp_file("missing.bin").string()));
    CHECK_THROWS(policy_from_json("{\"format\": \"something-else\"}"));
  }
  std::filesystem::remove(bin);
}
