#pragma once

// Blinded pairwise human evaluation: sampling, A/B assignment, judgment
// storage, and de-blinded aggregation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fidelity/benchgen.hpp"
#include "fidelity/metrics.hpp"
#include "fidelity/stats.hpp"

namespace fidelity::humaneval {

constexpr int kFluencyMin = 1;
constexpr int kFluencyMax = 5;

/// `per_category` ids from each target category, drawn without replacement.
/// Output is grouped by category and sorted by benchmark position.
std::vector<std::string> stratified_sample(const bench::BenchmarkSet& target, std::size_t per_category,
                                           std::uint64_t seed);

/// Internal record; the system texts are never sent to annotators as-is.
struct EvalItem {
  std::string item_id;
  std::string instance_id;
  std::string category;
  std::string source_en;
  std::string baseline_text;
  std::string system_text;
};

/// True when text A is the baseline for this (item, annotator) pair.
bool a_is_baseline(std::string_view item_id, std::string_view annotator_id, std::uint64_t seed, std::uint64_t salt);

struct Study {
  std::string system = "par";
  std::uint64_t seed = 0;
  std::uint64_t salt = 0;
  std::vector<std::string> annotators;
  std::vector<EvalItem> items;

  const EvalItem* find(std::string_view item_id) const;
  bool has_annotator(std::string_view id) const;
  bool a_is_baseline(std::string_view item_id, std::string_view annotator_id) const;
  /// Fraction of items where A is the baseline for this annotator.
  double baseline_first_fraction(std::string_view annotator_id) const;

  /// Smallest salt from the current one that keeps every annotator's
  /// baseline-first fraction within [lo, hi]; stored in `salt`.
  void balance(double lo = 0.4, double hi = 0.6);

  std::string to_json() const;
  static Study from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static Study load(const std::filesystem::path& path);
};

struct StudyInputs {
  std::string system = "par";
  std::vector<std::string> annotators;
  std::uint64_t seed = 0;
};

/// Builds items for the sampled ids. Throws if a text is missing for an id.
Study build_study(const bench::BenchmarkSet& benchmark, std::span<const std::string> ids,
                  const std::unordered_map<std::string, std::string>& baseline_texts,
                  const std::unordered_map<std::string, std::string>& system_texts, const StudyInputs& inputs);

/// What an annotator sees. Carries no system identity.
struct BlindView {
  std::string item_id;
  std::string source_en;
  std::string text_a;
  std::string text_b;
};
BlindView blind_pair(const Study& study, const EvalItem& item, std::string_view annotator_id);

enum class Preference { a, b, tie };
std::string_view to_string(Preference p);
std::optional<Preference> parse_preference(std::string_view s);

struct Judgment {
  std::string item_id;
  std::string annotator_id;
  bool preserved_a = false;
  bool preserved_b = false;
  int fluency_a = 0;
  int fluency_b = 0;
  Preference preference = Preference::tie;
  std::string timestamp;

  /// Throws ValidationError on empty ids or fluency outside the scale.
  void validate() const;
  std::string to_json() const;
  /// Missing timestamps are filled with the current UTC time.
  static Judgment from_json(std::string_view json);
};

std::string utc_timestamp();

/// Append-only judgment log with an in-memory index. One writer at a time;
/// readers take immutable snapshots. The first write for an (item, annotator)
/// pair wins and later ones raise ConflictError.
class JudgmentStore {
 public:
  JudgmentStore() = default;
  /// Replays an existing log; the file is created on first write.
  explicit JudgmentStore(std::filesystem::path path);

  void record(const Judgment& j);
  std::shared_ptr<const std::vector<Judgment>> snapshot() const;
  bool has(std::string_view item_id, std::string_view annotator_id) const;
  std::size_t size() const { return snapshot()->size(); }

 private:
  static std::string key(std::string_view item, std::string_view annotator);

  std::optional<std::filesystem::path> path_;
  mutable std::mutex write_mutex_;
  std::unordered_set<std::string> keys_;
  std::shared_ptr<const std::vector<Judgment>> data_ = std::make_shared<std::vector<Judgment>>();
};

std::vector<Judgment> read_judgments(const std::filesystem::path& path);

struct SystemTotals {
  std::size_t preserved = 0;
  std::size_t fluency_sum = 0;
  std::size_t preferred = 0;
  std::size_t n = 0;
  double preservation_pct() const { return n ? 100.0 * static_cast<double>(preserved) / static_cast<double>(n) : 0; }
  double mean_fluency() const { return n ? static_cast<double>(fluency_sum) / static_cast<double>(n) : 0; }
  double preference_pct() const { return n ? 100.0 * static_cast<double>(preferred) / static_cast<double>(n) : 0; }
};

struct CategoryRow {
  std::string category;
  SystemTotals baseline;
  SystemTotals system;
};

struct AnnotatorRow {
  std::string annotator;
  SystemTotals baseline;
  SystemTotals system;
};

struct HumanEvalSummary {
  std::string system;
  std::size_t judgments = 0;
  std::size_t items = 0;
  bool complete = false;
  SystemTotals baseline;
  SystemTotals sys;
  std::size_t ties = 0;
  /// system / (system + baseline) preferences; empty when every judgment ties.
  std::optional<double> non_tie_rate;
  std::vector<CategoryRow> per_category;
  std::vector<AnnotatorRow> per_annotator;
  stats::Interval baseline_preservation_ci;
  stats::Interval system_preservation_ci;
  stats::Interval baseline_fluency_ci;
  stats::Interval system_fluency_ci;
};

/// De-blinds and pools judgments (each annotator-item pair counts once).
/// Judgments for unknown items or annotators throw ValidationError.
HumanEvalSummary aggregate(const Study& study, std::span<const Judgment> judgments, std::size_t resamples = 10000,
                           std::uint64_t seed = 0);

/// Every item judged by every registered annotator.
bool study_complete(const Study& study, std::span<const Judgment> judgments);

metrics::SystemHumanScores to_scores(const HumanEvalSummary& s);

std::string summary_json(const HumanEvalSummary& s);
std::string render(const HumanEvalSummary& s, metrics::Format f);

}  // namespace fidelity::humaneval
