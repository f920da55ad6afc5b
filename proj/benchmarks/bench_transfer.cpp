#include <benchmark/benchmark.h>

#include "seqlim/rpf.hpp"
#include "seqlim/system.hpp"

using namespace seqlim;

static System make_sys(int grid) {
  MapSequence seq({make_doubling(), make_w_markov()}, PeriodicSchedule{{0, 1}},
                  {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}});
  SystemOptions opt;
  opt.grid = grid;
  return System(std::move(seq), opt);
}

static void BM_CollocationApply(benchmark::State& state) {
  System sys = make_sys(static_cast<int>(state.range(0)));
  FieldFunction v = sys.sample(0, [](double x) { return std::cos(kTwoPi * x); });
  sys.op(0);
  sys.op(1);
  int j = 0;
  for (auto _ : state) {
    v = sys.op(j % 2).apply(v);
    v.set_time(0);
    benchmark::DoNotOptimize(v.values().data());
    ++j;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CollocationApply)->Arg(1024)->Arg(4096);

static void BM_ForwardDensity(benchmark::State& state) {
  System sys = make_sys(2048);
  for (auto _ : state) {
    RpfTriplet trip = forward_density(sys, 0, 8, 30);
    benchmark::DoNotOptimize(trip.residual);
  }
}
BENCHMARK(BM_ForwardDensity);

BENCHMARK_MAIN();
