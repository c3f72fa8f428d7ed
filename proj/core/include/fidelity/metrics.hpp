#pragma once

// Accuracy, paired significance, ablation and frontier reports.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fidelity/benchgen.hpp"
#include "fidelity/pipeline.hpp"
#include "fidelity/stats.hpp"

namespace fidelity::metrics {

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double percent() const { return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Target rows count as correct only when preserved; every other row when
/// the output does not assert the wrong (or an unlicensed) gender.
bool is_correct(const bench::BenchmarkInstance& instance, cue::PreservationState state);

struct CategoryAccuracy {
  std::vector<std::pair<std::string, Tally>> per_category;  // benchmark category order
  Tally target;
  Tally full;
  std::map<cue::PreservationState, std::size_t> target_states;
  std::size_t missing = 0;  // benchmark rows without an output
  double ergative_rate = 0;  // percent of target outputs with an ergative marker

  const Tally* category(std::string_view name) const;
};

/// Joins outputs to the benchmark by id. Unknown or duplicate ids throw.
CategoryAccuracy score_outputs(std::span<const pipeline::Record> outputs, const bench::BenchmarkSet& benchmark,
                               const hindi::Lexicons& lex);

/// Percent of texts containing an ergative marker.
double ergative_rate(std::span<const std::string> texts, const hindi::Lexicons& lex);

struct PairedOutcome {
  std::size_t n = 0;
  std::size_t both_correct = 0;
  std::size_t both_wrong = 0;
  std::size_t b = 0;  // first correct, second wrong
  std::size_t c = 0;  // first wrong, second correct
  std::vector<double> diffs;  // per-item (first - second) in {-1, 0, 1}
};

/// Pairs two systems on the target ids present in both.
PairedOutcome paired_outcome(std::span<const pipeline::Record> first, std::span<const pipeline::Record> second,
                             const bench::BenchmarkSet& benchmark);

struct PairedReport {
  std::string first;
  std::string second;
  PairedOutcome outcome;
  stats::McNemarResult mcnemar;
  stats::Interval delta_ci;  // accuracy difference in percentage points
};

PairedReport paired_report(std::string first, std::string second, std::span<const pipeline::Record> a,
                           std::span<const pipeline::Record> b, const bench::BenchmarkSet& benchmark,
                           std::size_t resamples, std::uint64_t seed, std::size_t jobs = 1);

struct AblationRow {
  bool lexicalize = false;
  bool phenomenon_prompts = false;
  double explicit_gender = 0;
  double late_binding = 0;
  double winograd_coref = 0;
  double target = 0;
};

/// Rows in the order No/No, Yes/No, No/Yes, Yes/Yes.
std::vector<AblationRow> ablation_table(
    std::span<const std::pair<std::pair<bool, bool>, CategoryAccuracy>> runs);

struct AblationChecks {
  bool lexical_helps_explicit = false;      // lex-only beats phen-only and neither on explicit_gender
  bool phenomenon_helps_late_binding = false;  // phen-only beats lex-only on late_binding
  bool combined_best_target = false;        // Yes/Yes has the highest target accuracy
  bool all() const { return lexical_helps_explicit && phenomenon_helps_late_binding && combined_best_target; }
};
AblationChecks check_ablation(std::span<const AblationRow> rows);

struct SystemHumanScores {
  std::string system;
  double baseline_preservation_pct = 0;
  double system_preservation_pct = 0;
  double baseline_fluency = 0;
  double system_fluency = 0;
};

struct FrontierPoint {
  std::string system;
  double delta_preservation_pp = 0;
  double delta_fluency = 0;
};

/// Baseline at the origin, then each system relative to the baseline of its
/// own study.
std::vector<FrontierPoint> frontier_report(std::span<const SystemHumanScores> systems);

enum class Format { markdown, json };
std::optional<Format> parse_format(std::string_view s);

std::string render(const CategoryAccuracy& acc, Format f);
std::string render(const PairedReport& r, Format f);
std::string render(std::span<const AblationRow> rows, Format f);
std::string render(std::span<const FrontierPoint> points, Format f);

}  // namespace fidelity::metrics
