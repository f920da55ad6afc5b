#include <benchmark/benchmark.h>

#include <algorithm>

#include "seqlim/limits.hpp"

using namespace seqlim;

static SampleSet control_samples(int64_t n) {
  SampleSet s;
  s.n = 64;
  s.count = n;
  s.sigma = 1.0;
  CounterRng rng = CounterRng::substream(2, "bench");
  s.sorted.resize(n);
  for (auto& v : s.sorted) v = rng.normal();
  std::sort(s.sorted.begin(), s.sorted.end());
  return s;
}

static void BM_Kolmogorov(benchmark::State& state) {
  SampleSet s = control_samples(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kolmogorov(s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Kolmogorov)->Arg(100000)->Arg(1000000);

static void BM_Wasserstein1(benchmark::State& state) {
  SampleSet s = control_samples(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein(s, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Wasserstein1)->Arg(100000);

BENCHMARK_MAIN();
