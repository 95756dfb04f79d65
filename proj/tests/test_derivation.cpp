#include "doctest.h"
#include "pcfgsr/derivation.hpp"
#include "pcfgsr/evaluator.hpp"
#include "pcfgsr/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace pcfgsr;

TEST_CASE("derivation order matches a brute-force leftmost derivation") {
  const auto rep = oracle::check_leftmost(derive_seed({42, hash_string("leftmost")}), 100, 5);
  CHECK(rep.grammars == 100);
  CHECK(rep.steps > 1000);
  CHECK(rep.mismatches == 0);
}

TEST_CASE("queue front is the leftmost pending node") {
  const auto g = load_grammar_file(test::grammar_path("fig1.bnf"));
  DerivationState s(g);
  s.apply(0);  // <exp> -> <a>
  s.apply(2);  // <a> -> <i> * <i>
  const auto q = s.queue();
  REQUIRE(q.size() == 2);
  CHECK(q.front() == s.current_node());
  CHECK(s.tree()[q[0]].parent == s.tree()[q[1]].parent);
  CHECK(q[0] < q[1]);
}

TEST_CASE("illustrative trajectory builds x[9]+x[1]") {
  const auto g = load_grammar_file(test::grammar_path("fig1.bnf"));
  // <exp> -> <b>, <b> -> <i> + <i>, <i> -> x[9], <i> -> x[1]
  const std::vector<ActionId> trajectory{1, 4, 14, 6};
  auto s = init_derivation(g);
  for (auto a : trajectory) s = apply_action(s, a);
  REQUIRE(is_complete(s));
  CHECK(to_expression(s).to_string() == "(x[9] + x[1])");
  CHECK(s.trajectory() == trajectory);
}

TEST_CASE("masked actions and complete states are rejected") {
  const auto g = load_grammar_file(test::grammar_path("fig1.bnf"));
  DerivationState s(g);
  CHECK_THROWS_AS(s.apply(5), std::logic_error);
  s.apply(0);
  s.apply(2);
  s.apply(6);
  s.apply(7);
  REQUIRE(s.is_complete());
  CHECK_THROWS_AS(s.apply(0), std::logic_error);
  CHECK_THROWS_AS(s.observe({}), std::logic_error);
  CHECK_FALSE(s.current_symbol().has_value());
  CHECK_THROWS_AS(to_expression(init_derivation(g)), std::logic_error);
}

TEST_CASE("observation windows, parent and siblings") {
  const auto g = load_grammar_file(test::grammar_path("fig1.bnf"));
  ObservationConfig cfg;
  cfg.past_window = 3;
  cfg.sibling_window = 2;
  DerivationState s(g);

  auto obs = s.observe(cfg);
  CHECK(obs.parent_action == kNullAction);
  CHECK(obs.past_actions == std::vector<ActionId>(3, kNullAction));
  CHECK(obs.sibling_actions == std::vector<ActionId>(2, kNullAction));
  CHECK(obs.depth == 0);
  CHECK(obs.symbol == g.start());
  CHECK(obs.mask == g.mask(g.start()));

  s.apply(0);
  s.apply(2);
  s.apply(8);  // first <i>
  obs = s.observe(cfg);
  CHECK(obs.parent_action == 2);
  CHECK(obs.sibling_actions == std::vector<ActionId>{kNullAction, 8});
  CHECK(obs.past_actions == std::vector<ActionId>{0, 2, 8});
  CHECK(obs.depth == 3);

  SUBCASE("toggles null their fields") {
    cfg.toggles = {false, false, false, false, false};
    obs = s.observe(cfg);
    CHECK(obs.parent_action == kNullAction);
    CHECK(obs.sibling_actions == std::vector<ActionId>(2, kNullAction));
    CHECK(obs.past_actions == std::vector<ActionId>(3, kNullAction));
    CHECK_FALSE(obs.symbol.has_value());
    CHECK(obs.depth_feature() == 0.0);
  }
}

TEST_CASE("fuzzed legal rollouts never produce malformed expressions") {
  const std::vector<std::string> airfoil_names{"f", "alpha", "c", "U_infinity", "delta"};
  struct Case {
    std::string file;
    std::size_t nvar;
    std::vector<std::string> names;
  };
  const std::vector<Case> cases{{"nguyen.bnf", 1, {}}, {"nguyen.bnf", 3, {}}, {"airfoil.bnf", 5, airfoil_names},
                                {"fig1.bnf", 10, {}}};
  Rng rng(derive_seed({7, hash_string("fuzz")}));
  std::size_t rollouts = 0, completed = 0;
  for (const auto& c : cases) {
    GrammarOptions o;
    o.nvar = c.nvar;
    const auto g = load_grammar_file(test::grammar_path(c.file), o);
    for (int i = 0; i < 2500; ++i, ++rollouts) {
      DerivationState s(g);
      while (!s.is_complete() && s.depth() < 50) s.apply(oracle::random_legal(g, *s.current_symbol(), rng));
      if (!s.is_complete()) continue;
      ++completed;
      Expression e;
      REQUIRE_NOTHROW(e = to_expression(s, c.names));
      REQUIRE(!e.empty());
      CHECK(e.required_width() <= c.nvar);
      // the printed form parses back to the same tree
      CHECK(parse_expression(e.to_string()) == e);
    }
  }
  CHECK(rollouts == 10000);
  CHECK(completed > 1000);
}
