#include <benchmark/benchmark.h>

#include "fidelity/benchgen.hpp"
#include "fidelity/resources.hpp"

using namespace fidelity;

namespace {

void BM_GenerateDefault(benchmark::State& state) {
  static const auto res = LinguisticResources::load(default_data_dir());
  const auto cfg = bench::GenerationConfig::defaults();
  for (auto _ : state) benchmark::DoNotOptimize(bench::generate_benchmark(cfg, res.bundle, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.total()));
}
BENCHMARK(BM_GenerateDefault)->Unit(benchmark::kMillisecond);

}  // namespace
