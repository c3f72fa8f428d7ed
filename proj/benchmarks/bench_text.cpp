#include <benchmark/benchmark.h>

#include "fidelity/cue_analysis.hpp"
#include "fidelity/hindi_text.hpp"
#include "fidelity/resources.hpp"

using namespace fidelity;

namespace {

const LinguisticResources& res() {
  static const auto r = LinguisticResources::load(default_data_dir());
  return r;
}

const std::string kHindi = "क्लर्क ने प्रोजेक्ट पूरा किया। बाद में, वह महिला पुरस्कार लेने गई और बहुत खुश थी।";

void BM_Tokenize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(hindi::tokenize(kHindi));
}
BENCHMARK(BM_Tokenize);

void BM_ExtractCue(benchmark::State& state) {
  const cue::EnglishLexicon en(res().bundle);
  const std::string x = "The clerk finished the project. Later, she received an award.";
  for (auto _ : state) benchmark::DoNotOptimize(cue::extract_source_cue(x, en));
}
BENCHMARK(BM_ExtractCue);

void BM_Classify(benchmark::State& state) {
  const cue::EnglishLexicon en(res().bundle);
  const auto c = cue::extract_source_cue("The clerk finished the project. Later, she received an award.", en);
  for (auto _ : state) benchmark::DoNotOptimize(cue::classify_preservation(c, kHindi, res().lexicons));
}
BENCHMARK(BM_Classify);

}  // namespace
