#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcfgsr/dataset.hpp"
#include "pcfgsr/expression.hpp"
#include "pcfgsr/rng.hpp"

namespace pcfgsr {

// U[a,b,c]: c uniform draws in [a,b]. E[a,b,c]: grid a, a+c, ... up to b.
struct Sampler {
  enum class Kind { Uniform, Grid };
  Kind kind = Kind::Uniform;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  std::string to_string() const;
};

struct BenchmarkSpec {
  std::string name;
  std::string formula;  // ground truth in the expression language
  std::size_t variables = 1;
  std::vector<Sampler> train;  // one per variable
  std::vector<Sampler> test;
  bool excluded_from_stats = false;
};

const std::vector<BenchmarkSpec>& benchmark_specs();
// Throws std::invalid_argument for an unknown name.
const BenchmarkSpec& benchmark_spec(const std::string& name);

std::vector<double> uniform_sample(double a, double b, std::size_t count, Rng& rng);
std::size_t grid_count(double a, double b, double step);
std::vector<double> grid_sample(double a, double b, double step);

// Rows a sampler list produces: the grid product, or the shared c of the
// uniform samplers.
std::size_t sample_rows(const std::vector<Sampler>& samplers);

struct Benchmark {
  BenchmarkSpec spec;
  Dataset train;
  Dataset test;
  Expression truth;
};

// Train and test inputs come from independent streams keyed by
// (name, split, seed); y is the ground truth evaluated on them.
Benchmark generate_benchmark(const std::string& name, std::uint64_t seed);

// Deterministic stand-in for the airfoil self-noise table: 1503 rows over
// the published value grid (frequencies, chords, velocities) with a smooth
// noisy response in the published SSPL range.
Dataset airfoil_surrogate(std::uint64_t seed = 1503);

// Reads the UCI whitespace file or a CSV when `path` is nonempty,
// otherwise returns the surrogate.
Dataset load_airfoil(const std::string& path);

}  // namespace pcfgsr
