#include <benchmark/benchmark.h>
#include <omp.h>

#include "quadmcv/sim.hpp"

using namespace quadmcv;

namespace {

sim::Scenario hover(int runs) {
  auto s = sim::hover_scenario(0.75, 10.0);
  s.n_runs = runs;
  return s;
}

sim::Scenario line(int runs) {
  auto s = sim::tracking_scenario(trajectory::default_line_waypoints(), 0.75);
  s.n_runs = runs;
  return s;
}

template <sim::MetricsReport (*Fn)(const sim::Scenario&, const riccati::GainSchedule&)>
void run(benchmark::State& state, const sim::Scenario& s) {
  const auto gains = sim::build_controller(s);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(s, gains));
  state.SetItemsProcessed(state.iterations() * s.n_runs);
  state.counters["threads"] = omp_get_max_threads();
}

void BM_HoverSerial(benchmark::State& st) { run<sim::monte_carlo_serial>(st, hover(st.range(0))); }
void BM_HoverParallel(benchmark::State& st) { run<sim::monte_carlo>(st, hover(st.range(0))); }
void BM_LineSerial(benchmark::State& st) { run<sim::monte_carlo_serial>(st, line(st.range(0))); }
void BM_LineParallel(benchmark::State& st) { run<sim::monte_carlo>(st, line(st.range(0))); }

void BM_BuildLineSchedule(benchmark::State& st) {
  const auto s = line(2);
  for (auto _ : st) benchmark::DoNotOptimize(sim::build_controller(s));
}

}  // namespace

BENCHMARK(BM_HoverSerial)->Arg(16)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HoverParallel)->Arg(16)->Arg(50)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LineSerial)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LineParallel)->Arg(50)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildLineSchedule)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
