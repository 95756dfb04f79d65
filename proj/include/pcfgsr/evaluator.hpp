#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcfgsr/dataset.hpp"
#include "pcfgsr/expression.hpp"

namespace pcfgsr {

// Exact recovery means test MSE below this with every prediction finite.
inline constexpr double kExactRecoveryMse = 1e-12;

// Scratch buffers reused across evaluations; one per thread.
class EvalWorkspace {
 public:
  std::vector<double>& acquire(std::size_t depth, std::size_t rows);

 private:
  std::vector<std::vector<double>> stack_;
};

// Element-wise evaluation in double precision. Domain violations produce
// non-finite entries. Throws std::out_of_range if a feature index exceeds
// the dataset width.
std::vector<double> evaluate(const Expression& e, const Dataset& data);
void evaluate_into(const Expression& e, const Dataset& data, std::vector<double>& out,
                   EvalWorkspace& ws);

// Mean squared error; +inf if any prediction is non-finite.
double mse(std::span<const double> y, std::span<const double> y_hat);
double expression_mse(const Expression& e, const Dataset& data, EvalWorkspace& ws);

// Squashed reward 1 / (1 + mse); 0 for non-finite mse.
double reward_from_mse(double mse_value);
double reward(const Expression& e, const Dataset& data, bool complete);

// 1 - SS_res / SS_tot.
double r_squared(std::span<const double> y, std::span<const double> y_hat);

bool exact_recovery(const Expression& e, const Dataset& test);

struct ConstantFitOptions {
  int budget = 50;             // coordinate sweeps per start
  int restarts = 3;            // random starts after the all-ones start
  double lower = -1e4;
  double upper = 1e4;
  std::uint64_t seed = 0;
};

// Fits Constant leaves by derivative-free coordinate search, starting from
// all-ones and `restarts` log-scaled random points. The result has the
// constants frozen into literals and train MSE no worse than all-ones.
Expression fit_constants(const Expression& e, const Dataset& train, const ConstantFitOptions& options);

enum class Execution { Serial, Parallel };

// MSE of each expression on `data`. Parallel mode fans out over
// expressions with OpenMP; results are identical to Serial.
std::vector<double> evaluate_mse_batch(std::span<const Expression> expressions, const Dataset& data,
                                       Execution mode);

}  // namespace pcfgsr
