#include <cmath>
#include <cstdio>
#include <limits>

#include "doctest.h"
#include "pcfgsr/evaluator.hpp"
#include "pcfgsr/rng.hpp"

using namespace pcfgsr;

namespace {

Dataset make_data(std::vector<std::vector<double>> cols, std::vector<double> y = {}) {
  Dataset d;
  for (std::size_t j = 0; j < cols.size(); ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  d.columns = std::move(cols);
  d.target = y.empty() ? std::vector<double>(d.columns.front().size(), 0.0) : std::move(y);
  return d;
}

}  // namespace

TEST_CASE("reward law") {
  CHECK(reward_from_mse(0.0) == 1.0);
  CHECK(reward_from_mse(1.0) == 0.5);
  CHECK(reward_from_mse(9.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(reward_from_mse(std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(reward_from_mse(std::numeric_limits<double>::quiet_NaN()) == 0.0);

  const auto d = make_data({{0.0, 1.0, 2.0}}, {0.0, 1.0, 2.0});
  CHECK(reward(parse_expression("x[1]"), d, true) == 1.0);
  CHECK(reward(parse_expression("x[1]"), d, false) == 0.0);
  CHECK(reward(parse_expression("log(x[1])"), d, true) == 0.0);  // log(0) = -inf
  CHECK(reward(parse_expression("x[1] / x[1]"), d, true) == 0.0);  // 0/0
}

TEST_CASE("element-wise evaluation") {
  const auto d = make_data({{1.0, 2.0, 4.0}, {0.5, -1.0, 3.0}});
  CHECK(evaluate(parse_expression("x[1] + x[2] * 2"), d) == std::vector<double>{2.0, 0.0, 10.0});
  CHECK(evaluate(parse_expression("x[1] - x[2] - 1"), d) == std::vector<double>{-0.5, 2.0, 0.0});
  CHECK(evaluate(parse_expression("x[1] / x[2]"), d) == std::vector<double>{2.0, -2.0, 4.0 / 3.0});
  CHECK(evaluate(parse_expression("pow(x[1], 2)"), d) == std::vector<double>{1.0, 4.0, 16.0});
  CHECK(evaluate(parse_expression("-x[2]"), d) == std::vector<double>{-0.5, 1.0, -3.0});
  CHECK(evaluate(parse_expression("sqrt(x[1])"), d)[2] == 2.0);
  CHECK(evaluate(parse_expression("log10(x[1])"), d)[0] == 0.0);
  CHECK(evaluate(parse_expression("abs(x[2])"), d)[1] == 1.0);
  CHECK(evaluate(parse_expression("exp(log(x[1]))"), d)[1] == doctest::Approx(2.0));
  CHECK(evaluate(parse_expression("harmonic(x[1])"), d) == std::vector<double>{1.0, 1.5, 1.0 + 0.5 + 1.0 / 3 + 0.25});
  CHECK(std::isnan(evaluate(parse_expression("sqrt(x[2])"), d)[1]));
  CHECK_THROWS_AS(evaluate(parse_expression("x[3]"), d), std::out_of_range);
  CHECK_THROWS_AS(evaluate(Expression{}, d), std::invalid_argument);
}

TEST_CASE("mse, r squared and exact recovery") {
  const std::vector<double> y{1.0, 2.0, 3.0};
  CHECK(mse(y, std::vector<double>{1.0, 2.0, 3.0}) == 0.0);
  CHECK(mse(y, std::vector<double>{2.0, 2.0, 2.0}) == doctest::Approx(2.0 / 3.0));
  CHECK(std::isinf(mse(y, std::vector<double>{1.0, NAN, 3.0})));
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{2.0, 2.0, 2.0}) == 0.0);

  const auto d = make_data({{0.5, 1.5, 2.5}}, {0.75, 3.75, 8.75});
  CHECK(exact_recovery(parse_expression("x[1] * x[1] + x[1]"), d));
  CHECK_FALSE(exact_recovery(parse_expression("x[1] * x[1]"), d));
}

TEST_CASE("expression parse, print and complexity") {
  const auto e = parse_expression("x[1] + cos(x[2] * 3)");
  CHECK(e.to_string() == "(x[1] + cos((x[2] * 3)))");
  CHECK(parse_expression(e.to_string()) == e);
  CHECK(complexity(e) == 5);  // +, cos, *, x1, x2
  CHECK(complexity(parse_expression("const * 2")) == 1);
  const std::vector<std::string> names{"alpha", "beta"};
  const auto named = parse_expression("x.beta / x.alpha", names);
  CHECK(named.to_string() == "(x[2] / x[1])");
  CHECK(named.to_string(names) == "(x.beta / x.alpha)");
  CHECK_THROWS_AS(parse_expression("x.gamma", names), ExpressionError);
  CHECK_THROWS_AS(parse_expression("(x[1] +"), ExpressionError);
  CHECK_THROWS_AS(parse_expression("x[0]"), ExpressionError);
}

TEST_CASE("constant fitting matches closed-form least squares") {
  // y = c1 - 10*log10(x1/c2)*x2 is linear in (c1, log10 c2):
  //   y + 10*x2*log10(x1) = c1 + (10*x2) * log10(c2)
  Rng rng(99);
  std::normal_distribution<double> noise(0.0, 0.3);
  const double c1 = 120.0, c2 = 3.5;
  std::vector<double> x1, x2, y;
  for (int i = 0; i < 60; ++i) {
    x1.push_back(1.0 + 20.0 * uniform01(rng));
    x2.push_back(0.2 + uniform01(rng));
    y.push_back(c1 - 10.0 * std::log10(x1.back() / c2) * x2.back() + noise(rng));
  }
  const auto d = make_data({x1, x2}, y);

  // 2x2 normal equations on z = y + 10*x2*log10(x1), basis (1, 10*x2)
  double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = y[i] + 10.0 * x2[i] * std::log10(x1[i]);
    const double b = 10.0 * x2[i];
    s11 += 1;
    s12 += b;
    s22 += b * b;
    t1 += z;
    t2 += b * z;
  }
  const double det = s11 * s22 - s12 * s12;
  const double a_hat = (s22 * t1 - s12 * t2) / det;
  const double c2_hat = std::pow(10.0, (s11 * t2 - s12 * t1) / det);
  EvalWorkspace ws;
  char text[128];
  std::snprintf(text, sizeof text, "%.17g - 10*log10(x[1]/%.17g)*x[2]", a_hat, c2_hat);
  const auto oracle = parse_expression(text);
  const double oracle_mse = expression_mse(oracle, d, ws);

  ConstantFitOptions opts;
  opts.budget = 400;
  opts.seed = 5;
  const auto fitted = fit_constants(parse_expression("const-10*log10(x[1]/const)*x[2]"), d, opts);
  CHECK(fitted.constant_count() == 0);
  const double fitted_mse = expression_mse(fitted, d, ws);
  CHECK(fitted_mse >= oracle_mse * (1.0 - 1e-6));
  CHECK(fitted_mse <= oracle_mse * (1.0 + 1e-4));
}

TEST_CASE("constant fitting never does worse than all-ones") {
  const auto d = make_data({{1.0, 2.0, 3.0, 4.0}}, {1.0, 2.0, 3.0, 4.0});
  const auto start = parse_expression("const * x[1]");
  const auto fitted = fit_constants(start, d, {});
  EvalWorkspace ws;
  CHECK(expression_mse(fitted, d, ws) <= expression_mse(start.with_constants(std::vector<double>{1.0}), d, ws));
  ConstantFitOptions bad;
  bad.budget = 0;
  CHECK_THROWS_AS(fit_constants(start, d, bad), std::invalid_argument);
  CHECK(fit_constants(parse_expression("x[1]"), d, bad) == parse_expression("x[1]"));
}

TEST_CASE("batch evaluation: serial and parallel agree bit for bit") {
  Rng rng(3);
  std::vector<double> a, b, y;
  for (int i = 0; i < 500; ++i) {
    a.push_back(uniform01(rng) * 4 - 2);
    b.push_back(uniform01(rng) * 4 - 2);
    y.push_back(a.back() * b.back());
  }
  const auto d = make_data({a, b}, y);
  std::vector<Expression> exprs;
  for (const char* t : {"x[1]*x[2]", "sin(x[1])+x[2]", "log(x[1])", "exp(x[1]*x[2])/x[2]", "x[1]-x[2]"})
    for (int k = 0; k < 40; ++k) exprs.push_back(parse_expression(t));
  const auto serial = evaluate_mse_batch(exprs, d, Execution::Serial);
  const auto parallel = evaluate_mse_batch(exprs, d, Execution::Parallel);
  REQUIRE(serial.size() == exprs.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK((serial[i] == parallel[i] || (std::isnan(serial[i]) && std::isnan(parallel[i]))));
  }
  CHECK(serial[0] == 0.0);
  CHECK(std::isinf(serial[80]));

  std::vector<Expression> too_wide{parse_expression("x[3]")};
  CHECK_THROWS_AS(evaluate_mse_batch(too_wide, d, Execution::Parallel), std::out_of_range);
}
