#include "hps/leafops.hpp"
#include "hps/solver.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace hps;

namespace {

const Rectangle kUnit{0, 1, 0, 1};

double log_source(Point x) { return std::log(std::hypot(x.x + 2.0, x.y)); }

SolverOptions with_threshold(Index threshold) {
  SolverOptions o;
  o.switch_threshold = threshold;
  return o;
}

void BM_LeafDtn(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const LeafDiscretization disc(q);
  for (auto _ : state)
    benchmark::DoNotOptimize(build_leaf_dtn(CoefficientField::laplace(), kUnit, disc));
}
BENCHMARK(BM_LeafDtn)->DenseRange(8, 24, 4)->Unit(benchmark::kMicrosecond);

void build(benchmark::State& state, Index threshold) {
  const int levels = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const HpsSolver s(kUnit, levels, 16, CoefficientField::laplace(), with_threshold(threshold));
    benchmark::DoNotOptimize(&s);
  }
  state.counters["N"] = static_cast<double>(expected_node_count(levels, 16));
}

void BM_BuildDense(benchmark::State& state) { build(state, SolverOptions::kNeverSwitch); }
void BM_BuildHbs(benchmark::State& state) { build(state, 0); }
BENCHMARK(BM_BuildDense)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildHbs)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
  const int levels = static_cast<int>(state.range(0));
  const HpsSolver s(kUnit, levels, 16, CoefficientField::laplace(), with_threshold(state.range(1)));
  const Vector f = s.boundary_values(log_source);
  for (auto _ : state) benchmark::DoNotOptimize(s.solve(f));
}
BENCHMARK(BM_Solve)
    ->ArgsProduct({{3, 4, 5}, {SolverOptions::kNeverSwitch}})
    ->ArgsProduct({{3, 4}, {0}})
    ->Unit(benchmark::kMillisecond);

void BM_ApplyDtn(benchmark::State& state) {
  const int levels = static_cast<int>(state.range(0));
  const HpsSolver s(kUnit, levels, 16, CoefficientField::laplace(), with_threshold(state.range(1)));
  const Vector f = s.boundary_values(log_source);
  for (auto _ : state) benchmark::DoNotOptimize(s.apply_global_dtn(f));
}
BENCHMARK(BM_ApplyDtn)
    ->ArgsProduct({{3, 4, 5}, {SolverOptions::kNeverSwitch}})
    ->ArgsProduct({{3, 4}, {0}})
    ->Unit(benchmark::kMicrosecond);

}  // namespace
