#include <benchmark/benchmark.h>

#include <random>

#include "fidelity/stats.hpp"

using namespace fidelity;

namespace {

void BM_Bootstrap(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (auto& x : v) x = static_cast<double>(rng() & 1);
  for (auto _ : state) benchmark::DoNotOptimize(stats::bootstrap_ci(v, 10000, 0.95, 7));
}
BENCHMARK(BM_Bootstrap)->Arg(300)->Arg(15750)->Unit(benchmark::kMillisecond);

void BM_McNemar(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::mcnemar(5356, 53));
}
BENCHMARK(BM_McNemar);

}  // namespace
