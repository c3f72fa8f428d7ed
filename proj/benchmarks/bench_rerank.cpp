#include <benchmark/benchmark.h>

#include "fidelity/rerank.hpp"
#include "fidelity/resources.hpp"

using namespace fidelity;

namespace {

void BM_SarSelect(benchmark::State& state) {
  static const auto res = LinguisticResources::load(default_data_dir());
  const cue::EnglishLexicon en(res.bundle);
  const std::string x = "She works as a nurse in the city hospital.";
  const auto c = cue::extract_source_cue(x, en);
  std::vector<rerank::Candidate> pool;
  const char* texts[] = {"उसने शहर के अस्पताल में नर्स के रूप में काम किया।", "वह शहर के अस्पताल में नर्स के रूप में काम करती है।",
                         "वह महिला शहर के अस्पताल में नर्स है।", "वह नर्स है।", "उन्होंने अस्पताल में काम किया।",
                         "वह शहर के अस्पताल में नर्स का काम करती है।"};
  for (std::size_t i = 0; i < std::size(texts); ++i)
    pool.push_back({texts[i], i ? rerank::Origin::sampled : rerank::Origin::base_system, i});
  const rerank::RerankConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(rerank::sar_select(x, c, pool, cfg, res.lexicons));
}
BENCHMARK(BM_SarSelect);

}  // namespace
