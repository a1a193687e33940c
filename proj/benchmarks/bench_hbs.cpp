#include "hps/hbs.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace hps;

namespace {

Matrix log_kernel(Index m, double diag) {
  Matrix A(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      A(i, j) = i == j ? diag : std::log(std::abs(static_cast<double>(i - j)) / static_cast<double>(m));
  return A;
}

struct Fixture {
  explicit Fixture(Index m)
      : tree(build_index_tree(m, 64)), dense(log_kernel(m, static_cast<double>(m))),
        hbs(compress_dense(dense, tree, 1e-10)), x(Matrix::Random(m, 1)) {}
  IndexTree tree;
  Matrix dense;
  HbsMatrix hbs;
  Matrix x;
};

void BM_Compress(benchmark::State& state) {
  const Fixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compress_dense(f.dense, f.tree, 1e-10));
}
BENCHMARK(BM_Compress)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond);

void BM_Apply(benchmark::State& state) {
  const Fixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hbs_apply(f.hbs, f.x));
}
BENCHMARK(BM_Apply)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMicrosecond);

void BM_Invert(benchmark::State& state) {
  const Fixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hbs_invert(f.hbs));
}
BENCHMARK(BM_Invert)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond);

void BM_AddRecompress(benchmark::State& state) {
  const Fixture f(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hbs_add(f.hbs, f.hbs, 1e-10));
}
BENCHMARK(BM_AddRecompress)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond);

}  // namespace
