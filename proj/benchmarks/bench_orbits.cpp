#include <benchmark/benchmark.h>

#include "seqlim/mc.hpp"

using namespace seqlim;

static void BM_OrbitSteps(benchmark::State& state) {
  MapSequence seq({make_doubling()}, PeriodicSchedule{{0}},
                  {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}});
  SystemOptions opt;
  opt.grid = 1025;
  System sys(std::move(seq), opt);
  const int n = static_cast<int>(state.range(0));
  OrbitRunner runner(sys, n, InitKind::Reference);
  double sink = 0.0;
  int64_t i = 0;
  for (auto _ : state) {
    runner.run_range(1234, i, i + 1, [&](int, double f) { sink += f; },
                     [](int64_t) {});
    ++i;
  }
  benchmark::DoNotOptimize(sink);
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_OrbitSteps)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
