// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "pcfgsr/benchmarks.hpp"
#include "pcfgsr/trainer.hpp"

using namespace pcfgsr;

namespace {

const Grammar& nguyen() {
  static const Grammar g = [] {
    GrammarOptions go;
    go.nvar = 2;
    return load_grammar_file(PCFGSR_SOURCE_DIR "/grammars/nguyen.bnf", go);
  }();
  return g;
}

TrainConfig bench_config() {
  TrainConfig cfg;
  cfg.hidden = 64;
  return cfg;
}

void sample(benchmark::State& state, Execution mode) {
  const auto cfg = bench_config();
  const auto policy = init_policy(cfg.policy_shape(nguyen()), 1);
  const auto batch = static_cast<std::size_t>(state.range(0));
  std::size_t it = 0;
  for (auto _ : state) {
    auto eps = sample_batch(policy, nguyen(), cfg.observation(), 1, it++, batch, {}, mode);
    benchmark::DoNotOptimize(eps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}

void evaluate(benchmark::State& state, Execution mode) {
  const auto bm = generate_benchmark("K10", 1);  // 10201 test rows
  const auto cfg = bench_config();
  const auto policy = init_policy(cfg.policy_shape(nguyen()), 2);
  std::vector<Expression> exprs;
  for (const auto& ep : sample_batch(policy, nguyen(), cfg.observation(), 2, 0, 4096, {}, Execution::Serial))
    if (ep.expression) exprs.push_back(*ep.expression);
  exprs.resize(std::min<std::size_t>(exprs.size(), static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) {
    auto m = evaluate_mse_batch(exprs, bm.test, mode);
    benchmark::DoNotOptimize(m.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * exprs.size()));
}

void BM_SampleBatchSerial(benchmark::State& s) { sample(s, Execution::Serial); }
void BM_SampleBatchParallel(benchmark::State& s) { sample(s, Execution::Parallel); }
void BM_EvaluateMseSerial(benchmark::State& s) { evaluate(s, Execution::Serial); }
void BM_EvaluateMseParallel(benchmark::State& s) { evaluate(s, Execution::Parallel); }

}  // namespace

BENCHMARK(BM_SampleBatchSerial)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleBatchParallel)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateMseSerial)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateMseParallel)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
