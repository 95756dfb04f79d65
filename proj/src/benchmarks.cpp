#include "pcfgsr/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pcfgsr/evaluator.hpp"

namespace pcfgsr {

namespace {

Sampler U(double a, double b, double c) { return {Sampler::Kind::Uniform, a, b, c}; }
Sampler E(double a, double b, double c) { return {Sampler::Kind::Grid, a, b, c}; }

BenchmarkSpec spec(std::string name, std::string formula, std::vector<Sampler> train, std::vector<Sampler> test) {
  BenchmarkSpec s;
  s.name = std::move(name);
  s.formula = std::move(formula);
  s.variables = train.size();
  s.train = std::move(train);
  s.test = std::move(test);
  return s;
}

// shorthand for one sampler repeated per variable
std::vector<Sampler> rep(Sampler s, std::size_t n) { return std::vector<Sampler>(n, s); }

const std::string kTwoPi = "6.283185307179586";

std::vector<BenchmarkSpec> build_specs() {
  const std::string k1 = "0.3*x[1]*sin(" + kTwoPi + "*x[1])";
  const std::string k4 = "x[1]^3*exp(-x[1])*cos(x[1])*sin(x[1])*(sin(x[1])^2*cos(x[1])-1)";
  std::vector<BenchmarkSpec> v;
  v.push_back(spec("N1", "x[1]^3+x[1]^2+x[1]", {U(0, 2, 20)}, {U(0, 2, 20)}));
  v.push_back(spec("N2", "x[1]^4+x[1]^3+x[1]^2+x[1]", {U(-1, 1, 20)}, {U(-1, 1, 20)}));
  v.push_back(spec("N3", "x[1]^5+x[1]^4+x[1]^3+x[1]^2+x[1]", {U(-1, 1, 20)}, {U(-1, 1, 20)}));
  v.push_back(spec("N4", "x[1]^6+x[1]^5+x[1]^4+x[1]^3+x[1]^2+x[1]", {U(-1, 1, 20)}, {U(-1, 1, 20)}));
  v.push_back(spec("N5", "sin(x[1]^2)*cos(x[1])-1", {U(-1, 1, 20)}, {U(-1, 1, 20)}));
  v.push_back(spec("N6", "sin(x[1])+sin(x[1]+x[1]^2)", {U(-1, 1, 20)}, {U(-1, 1, 20)}));
  v.push_back(spec("N7", "log(x[1]+1)+log(x[1]^2+1)", {U(0, 2, 20)}, {U(0, 2, 20)}));
  v.push_back(spec("N8", "sqrt(x[1])", {U(0, 4, 20)}, {U(0, 4, 20)}));
  v.push_back(spec("N9", "sin(x[1])+sin(x[2])", rep(U(0, 2, 100), 2), rep(U(0, 2, 100), 2)));
  v.push_back(spec("N10", "2*sin(x[1])*cos(x[2])", rep(U(0, 2, 100), 2), rep(U(0, 2, 100), 2)));
  v.push_back(spec("K1", k1, {E(-1, 1, 0.1)}, {E(-1, 1, 0.001)}));
  v.push_back(spec("K2", k1, {E(-2, 2, 0.1)}, {E(-2, 2, 0.001)}));
  v.push_back(spec("K3", k1, {E(-3, 3, 0.1)}, {E(-3, 3, 0.001)}));
  v.push_back(spec("K4", k4, {E(0, 10, 0.05)}, {E(0.05, 10.05, 0.05)}));
  {
    auto k5 = spec("K5", "30*x[1]*x[3]/((x[1]-10)*x[2]^2)", {U(-1, 1, 1000), U(1, 2, 1000), U(-1, 1, 1000)},
                   {U(-1, 1, 10000), U(1, 2, 10000), U(-1, 1, 10000)});
    k5.excluded_from_stats = true;
    v.push_back(k5);
  }
  v.push_back(spec("K6", "harmonic(x[1])", {E(1, 50, 1)}, {E(1, 120, 1)}));
  v.push_back(spec("K7", "log(x[1])", {E(1, 100, 1)}, {E(1, 100, 0.1)}));
  v.push_back(spec("K8", "sqrt(x[1])", {E(0, 100, 1)}, {E(0, 100, 0.1)}));
  v.push_back(spec("K9", "asinh(x[1])", {E(0, 100, 1)}, {E(0, 100, 0.1)}));
  v.push_back(spec("K10", "pow(x[1],x[2])", rep(U(0, 1, 100), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("K11", "x[1]*x[2]+sin((x[1]-1)*(x[2]-1))", rep(U(-3, 3, 20), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("K12", "x[1]^4-x[1]^3+x[2]^2/2-x[2]", rep(U(-3, 3, 20), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("K13", "6*sin(x[1])*cos(x[2])", rep(U(-3, 3, 20), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("K14", "8/(2+x[1]^2+x[2]^2)", rep(U(-3, 3, 20), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("K15", "x[1]^3/5+x[2]^3/2-x[2]-x[1]", rep(U(-3, 3, 20), 2), rep(E(0, 1, 0.01), 2)));
  v.push_back(spec("V1", "exp(-(x[1]-1)^2)/(1.2+(x[2]-2.5)^2)", rep(U(0.3, 4, 100), 2), rep(E(-0.2, 4.2, 0.1), 2)));
  v.push_back(spec("V2", "exp(-x[1])*x[1]^3*cos(x[1])*sin(x[1])*(sin(x[1])^2*cos(x[1])-1)", {E(0.05, 10, 0.1)},
                   {E(-0.5, 10.5, 0.05)}));
  v.push_back(spec("V3", "exp(-x[1])*x[1]^3*cos(x[1])*sin(x[1])*(sin(x[1])^2*cos(x[1])-1)*(x[2]-5)",
                   {E(0.05, 10, 0.1), E(0.05, 10.05, 2)}, {E(0.05, 10, 0.1), E(-0.5, 10.5, 0.5)}));
  v.push_back(spec("V4", "10/(5+(x[1]-3)^2+(x[2]-3)^2+(x[3]-3)^2+(x[4]-3)^2+(x[5]-3)^2)", rep(U(0.05, 6.05, 1024), 5),
                   rep(U(-0.25, 6.35, 5000), 5)));
  // z has no sampler of its own in the source table; it reuses x's
  v.push_back(spec("V5", "30*(x[1]-1)*(x[3]-1)/(x[2]^2*(x[1]-10))",
                   {U(0.05, 2, 300), U(1, 2, 300), U(0.05, 2, 300)},
                   {E(-0.05, 2.1, 0.15), E(0.95, 2.05, 0.1), E(-0.05, 2.1, 0.15)}));
  v.push_back(spec("V6", "6*sin(x[1])*cos(x[2])", rep(U(0.1, 5.9, 30), 2), rep(E(-0.05, 6.05, 0.02), 2)));
  v.push_back(spec("V7", "(x[1]-3)*(x[2]-3)+2*sin((x[1]-4)*(x[2]-4))", rep(U(0.05, 6.05, 300), 2),
                   rep(U(-0.25, 6.35, 1000), 2)));
  v.push_back(spec("V8", "((x[1]-3)^4+(x[2]-3)^3-(x[2]-3))/((x[2]-2)^4+10)", rep(U(0.05, 6.05, 50), 2),
                   rep(E(-0.25, 6.35, 0.2), 2)));
  v.push_back(spec("P1", "1/(1+x[1]^(-4))+1/(1+x[2]^(-4))", rep(E(-5, 5, 0.4), 2), rep(E(-5, 5, 0.4), 2)));
  return v;
}

Dataset sample_inputs(const std::vector<Sampler>& samplers, Rng& rng) {
  Dataset d;
  const std::size_t n = samplers.size();
  for (std::size_t j = 0; j < n; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  d.columns.resize(n);
  const bool grid = samplers.front().kind == Sampler::Kind::Grid;
  for (const auto& s : samplers)
    if ((s.kind == Sampler::Kind::Grid) != grid) throw std::invalid_argument("mixed uniform and grid samplers");

  if (!grid) {
    const auto c = static_cast<std::size_t>(samplers.front().c);
    for (std::size_t j = 0; j < n; ++j) d.columns[j] = uniform_sample(samplers[j].a, samplers[j].b, c, rng);
    return d;
  }
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (const auto& s : samplers) {
    axes.push_back(grid_sample(s.a, s.b, s.c));
    total *= axes.back().size();
  }
  for (auto& col : d.columns) col.resize(total);
  // cartesian product, first variable varying slowest
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t r = 0; r < total; ++r) {
    for (std::size_t j = 0; j < n; ++j) d.columns[j][r] = axes[j][idx[j]];
    for (std::size_t j = n; j-- > 0;) {
      if (++idx[j] < axes[j].size()) break;
      idx[j] = 0;
    }
  }
  return d;
}

}  // namespace

std::string Sampler::to_string() const {
  std::ostringstream os;
  os << (kind == Kind::Uniform ? "U[" : "E[") << a << ", " << b << ", " << c << "]";
  return os.str();
}

const std::vector<BenchmarkSpec>& benchmark_specs() {
  static const std::vector<BenchmarkSpec> specs = build_specs();
  return specs;
}

const BenchmarkSpec& benchmark_spec(const std::string& name) {
  for (const auto& s : benchmark_specs())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown benchmark: " + name);
}

std::vector<double> uniform_sample(double a, double b, std::size_t count, Rng& rng) {
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("uniform_sample needs a <= b");
  if (count < 1) throw std::invalid_argument("uniform_sample needs count >= 1");
  std::vector<double> out(count);
  for (auto& v : out) v = a + (b - a) * uniform01(rng);
  return out;
}

std::size_t grid_count(double a, double b, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (!(a < b)) throw std::invalid_argument("grid needs a < b");
  return static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
}

std::vector<double> grid_sample(double a, double b, double step) {
  const std::size_t n = grid_count(a, b, step);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a + static_cast<double>(k) * step;
  return out;
}

std::size_t sample_rows(const std::vector<Sampler>& samplers) {
  if (samplers.front().kind == Sampler::Kind::Uniform) return static_cast<std::size_t>(samplers.front().c);
  std::size_t total = 1;
  for (const auto& s : samplers) total *= grid_count(s.a, s.b, s.c);
  return total;
}

Benchmark generate_benchmark(const std::string& name, std::uint64_t seed) {
  Benchmark bm;
  bm.spec = benchmark_spec(name);
  bm.truth = parse_expression(bm.spec.formula);
  const auto key = hash_string(name);
  Rng train_rng(derive_seed({key, hash_string("train"), seed}));
  Rng test_rng(derive_seed({key, hash_string("test"), seed}));
  bm.train = sample_inputs(bm.spec.train, train_rng);
  bm.test = sample_inputs(bm.spec.test, test_rng);
  bm.train.split = "train";
  bm.test.split = "test";
  bm.train.target = evaluate(bm.truth, bm.train);
  bm.test.target = evaluate(bm.truth, bm.test);
  return bm;
}

Dataset airfoil_surrogate(std::uint64_t seed) {
  static constexpr std::array<double, 21> freqs{200,  250,  315,  400,  500,  630,   800,   1000,  1250,  1600, 2000,
                                                2500, 3150, 4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000};
  static constexpr std::array<double, 6> chords{0.0254, 0.0508, 0.1016, 0.1524, 0.2286, 0.3048};
  static constexpr std::array<double, 4> speeds{31.7, 39.6, 55.5, 71.3};
  constexpr std::size_t kRows = 1503;

  Rng rng(derive_seed({seed, hash_string("airfoil")}));
  std::normal_distribution<double> noise(0.0, 1.5);
  Dataset d;
  d.feature_names = {"f", "alpha", "c", "U_infinity", "delta"};
  d.columns.assign(5, {});
  for (auto& col : d.columns) col.reserve(kRows);
  d.target.reserve(kRows);
  for (std::size_t r = 0; r < kRows; ++r) {
    const double f = freqs[rng() % freqs.size()];
    const double alpha = std::round(22.2 * uniform01(rng) * 10.0) / 10.0;
    const double c = chords[rng() % chords.size()];
    const double u = speeds[rng() % speeds.size()];
    // boundary-layer thickness grows with chord and angle, shrinks with speed
    const double delta =
        std::clamp(0.018 * c * (1.0 + alpha / 6.0) * std::pow(u / 40.0, -0.2), 0.0004, 0.0584);
    const double strouhal = f * delta / u;
    const double s = std::log10(strouhal / 0.1);
    double sspl = 10.0 * std::log10(delta * std::pow(u, 5.0)) + 66.0 - 9.0 * s * s - 0.15 * alpha * std::cos(alpha / 20.0);
    sspl = std::clamp(sspl + noise(rng), 103.38, 140.987);
    d.columns[0].push_back(f);
    d.columns[1].push_back(alpha);
    d.columns[2].push_back(c);
    d.columns[3].push_back(u);
    d.columns[4].push_back(delta);
    d.target.push_back(sspl);
  }
  return d;
}

Dataset load_airfoil(const std::string& path) {
  if (path.empty()) return airfoil_surrogate();
  std::vector<std::string> cols = airfoil_columns();
  return read_table(path, "SSPL", cols);
}

}  // namespace pcfgsr
