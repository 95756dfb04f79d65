#include "pcfgsr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pcfgsr/rng.hpp"

namespace pcfgsr {

std::vector<double>& EvalWorkspace::acquire(std::size_t depth, std::size_t rows) {
  if (stack_.size() <= depth) stack_.resize(depth + 1);
  auto& buf = stack_[depth];
  buf.resize(rows);
  return buf;
}

namespace {

double harmonic_number(double x) {
  if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  const auto n = static_cast<long>(std::floor(x));
  double sum = 0.0;
  for (long i = 1; i <= n; ++i) sum += 1.0 / static_cast<double>(i);
  return sum;
}

template <class F>
void unary_apply(std::vector<double>& a, F f) {
  for (auto& v : a) v = f(v);
}

}  // namespace

void evaluate_into(const Expression& e, const Dataset& data, std::vector<double>& out,
                   EvalWorkspace& ws) {
  if (e.empty()) throw std::invalid_argument("cannot evaluate an empty expression");
  if (e.required_width() > data.width())
    throw std::out_of_range("expression references x[" + std::to_string(e.required_width()) +
                            "] but the dataset has " + std::to_string(data.width()) + " columns");
  const std::size_t rows = data.rows();
  std::size_t top = 0;
  for (const auto& n : e.nodes()) {
    switch (n.op) {
      case Op::Feature: {
        auto& buf = ws.acquire(top++, rows);
        const auto col = data.column(n.feature);
        std::copy(col.begin(), col.end(), buf.begin());
        break;
      }
      case Op::Literal:
      case Op::Constant: {
        auto& buf = ws.acquire(top++, rows);
        std::fill(buf.begin(), buf.end(), n.value);
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow: {
        auto& a = ws.acquire(top - 2, rows);
        const auto& b = ws.acquire(top - 1, rows);
        double* pa = a.data();
        const double* pb = b.data();
        switch (n.op) {
          case Op::Add: for (std::size_t i = 0; i < rows; ++i) pa[i] += pb[i]; break;
          case Op::Sub: for (std::size_t i = 0; i < rows; ++i) pa[i] -= pb[i]; break;
          case Op::Mul: for (std::size_t i = 0; i < rows; ++i) pa[i] *= pb[i]; break;
          case Op::Div: for (std::size_t i = 0; i < rows; ++i) pa[i] /= pb[i]; break;
          default: for (std::size_t i = 0; i < rows; ++i) pa[i] = std::pow(pa[i], pb[i]); break;
        }
        --top;
        break;
      }
      default: {
        auto& a = ws.acquire(top - 1, rows);
        switch (n.op) {
          case Op::Neg: unary_apply(a, [](double v) { return -v; }); break;
          case Op::Cos: unary_apply(a, [](double v) { return std::cos(v); }); break;
          case Op::Sin: unary_apply(a, [](double v) { return std::sin(v); }); break;
          case Op::Exp: unary_apply(a, [](double v) { return std::exp(v); }); break;
          case Op::Log: unary_apply(a, [](double v) { return std::log(v); }); break;
          case Op::Log10: unary_apply(a, [](double v) { return std::log10(v); }); break;
          case Op::Sqrt: unary_apply(a, [](double v) { return std::sqrt(v); }); break;
          case Op::Abs: unary_apply(a, [](double v) { return std::abs(v); }); break;
          case Op::Asinh: unary_apply(a, [](double v) { return std::asinh(v); }); break;
          case Op::Harmonic: unary_apply(a, harmonic_number); break;
          default: break;
        }
      }
    }
  }
  out = ws.acquire(0, rows);
}

std::vector<double> evaluate(const Expression& e, const Dataset& data) {
  EvalWorkspace ws;
  std::vector<double> out;
  evaluate_into(e, data, out, ws);
  return out;
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw std::invalid_argument("mse: length mismatch (" + std::to_string(y.size()) + " vs " +
                                std::to_string(y_hat.size()) + ")");
  if (y.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y_hat[i])) return std::numeric_limits<double>::infinity();
    const double d = y[i] - y_hat[i];
    sum += d * d;
  }
  const double m = sum / static_cast<double>(y.size());
  return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

double expression_mse(const Expression& e, const Dataset& data, EvalWorkspace& ws) {
  std::vector<double> y_hat;
  evaluate_into(e, data, y_hat, ws);
  return mse(data.target, y_hat);
}

double reward_from_mse(double mse_value) {
  if (!std::isfinite(mse_value) || mse_value < 0.0) return 0.0;
  return 1.0 / (1.0 + mse_value);
}

double reward(const Expression& e, const Dataset& data, bool complete) {
  if (!complete || e.empty()) return 0.0;
  return reward_from_mse(mse(data.target, evaluate(e, data)));
}

double r_squared(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("r_squared: length mismatch");
  if (y.empty()) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

bool exact_recovery(const Expression& e, const Dataset& test) {
  if (test.rows() == 0) throw std::invalid_argument("exact_recovery needs a nonempty test set");
  const auto y_hat = evaluate(e, test);
  if (!std::all_of(y_hat.begin(), y_hat.end(), [](double v) { return std::isfinite(v); })) return false;
  return mse(test.target, y_hat) < kExactRecoveryMse;
}

Expression fit_constants(const Expression& e, const Dataset& train, const ConstantFitOptions& options) {
  const std::size_t k = e.constant_count();
  if (k == 0) return e;
  if (options.budget < 1) throw std::invalid_argument("constant fit budget must be >= 1");

  EvalWorkspace ws;
  Expression probe = e;
  auto objective = [&](const std::vector<double>& c) {
    probe = e.with_constants(c);
    const double m = expression_mse(probe, train, ws);
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
  };
  auto clamp = [&](double v) { return std::clamp(v, options.lower, options.upper); };

  std::vector<double> best(k, 1.0);
  double best_value = objective(best);

  Rng rng(derive_seed({options.seed, 0xc0de}));
  const double log_lo = -4.0;
  const double log_hi = std::log10(std::max(std::abs(options.lower), std::abs(options.upper)));

  for (int start = 0; start <= options.restarts; ++start) {
    std::vector<double> x(k, 1.0);
    if (start > 0) {
      for (auto& v : x) {
        const double mag = std::pow(10.0, log_lo + (log_hi - log_lo) * uniform01(rng));
        v = clamp(uniform01(rng) < 0.5 ? -mag : mag);
      }
    }
    double fx = objective(x);
    std::vector<double> step(k);
    for (std::size_t j = 0; j < k; ++j) step[j] = std::max(1.0, std::abs(x[j])) * 0.5;

    for (int sweep = 0; sweep < options.budget; ++sweep) {
      bool moved = false;
      for (std::size_t j = 0; j < k; ++j) {
        const double origin = x[j];
        double best_local = fx;
        double best_coord = origin;
        for (double dir : {1.0, -1.0}) {
          x[j] = clamp(origin + dir * step[j]);
          const double f = objective(x);
          if (f < best_local) {
            best_local = f;
            best_coord = x[j];
          }
        }
        x[j] = best_coord;
        if (best_local < fx) {
          fx = best_local;
          step[j] *= 2.0;
          moved = true;
        } else {
          step[j] *= 0.5;
        }
      }
      bool converged = !moved;
      for (std::size_t j = 0; j < k && converged; ++j)
        converged = step[j] < 1e-13 * std::max(1.0, std::abs(x[j]));
      if (converged) break;
    }
    if (fx < best_value) {
      best_value = fx;
      best = x;
    }
  }
  return e.with_constants(best).freeze_constants();
}

std::vector<double> evaluate_mse_batch(std::span<const Expression> expressions, const Dataset& data,
                                       Execution mode) {
  std::vector<double> out(expressions.size());
  const auto n = static_cast<long>(expressions.size());
  // an exception escaping an OpenMP region terminates the process, so the
  // only throwing checks happen up front
  if (data.target.size() != data.rows()) throw std::invalid_argument("dataset target length does not match rows");
  for (const auto& e : expressions) {
    if (e.empty()) throw std::invalid_argument("cannot evaluate an empty expression");
    if (e.required_width() > data.width())
      throw std::out_of_range("expression references x[" + std::to_string(e.required_width()) +
                              "] but the dataset has " + std::to_string(data.width()) + " columns");
  }
  if (mode == Execution::Serial) {
    EvalWorkspace ws;
    for (long i = 0; i < n; ++i) out[i] = expression_mse(expressions[i], data, ws);
    return out;
  }
#pragma omp parallel
  {
    EvalWorkspace ws;
#pragma omp for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) out[i] = expression_mse(expressions[i], data, ws);
  }
  return out;
}

}  // namespace pcfgsr
