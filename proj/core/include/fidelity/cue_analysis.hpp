#pragma once

// English source-cue extraction, phenomenon routing, and the rule-based Hindi
// gender-preservation classifier.

#include <cstddef>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fidelity/hindi_text.hpp"
#include "fidelity/resources.hpp"
#include "fidelity/text.hpp"

namespace fidelity::cue {

/// English-side lexicon: gendered pronouns and words, names, professions.
class EnglishLexicon {
 public:
  explicit EnglishLexicon(const ResourceBundle& bundle);

  struct Entry {
    Gender gender;
    CueType type;
  };
  std::optional<Entry> lookup(std::string_view lower_word) const;
  /// Profession terms as lower-case word sequences, longest first.
  const std::vector<std::vector<std::string>>& professions() const { return professions_; }

 private:
  std::unordered_map<std::string, Entry> words_;
  std::vector<std::vector<std::string>> professions_;
};

struct Evidence {
  std::string token;
  CueType type;
  Gender gender;
  std::size_t sentence = 0;
  std::size_t clause = 0;              // global clause index
  std::size_t clause_in_sentence = 0;  // 0 = main clause of its sentence
};

struct SourceCue {
  Gender gender = Gender::neutral;
  std::vector<Evidence> evidence;
  std::size_t clause_index = 0;    // clause of the first gendered evidence
  std::size_t sentence_index = 0;  // sentence of the first gendered evidence
  std::size_t sentence_count = 0;
  std::size_t clause_count = 0;
  bool multi_clause = false;
  std::string text;
};

/// Sentences end at . ? ! and the danda; inside a sentence, the conjunctions
/// because/so/that/when/while open a new clause. Evidence of both genders
/// makes the cue ambiguous; no evidence makes it neutral.
SourceCue extract_source_cue(std::string_view english, const EnglishLexicon& lex);

enum class Phenomenon { explicit_gender, late_binding, winograd_coref, other };
std::string_view to_string(Phenomenon p);
std::optional<Phenomenon> parse_phenomenon(std::string_view s);

/// Distinct profession terms mentioned in `english` (longest match wins).
std::size_t count_professions(std::string_view english, const EnglishLexicon& lex);

/// Priority: winograd_coref (two or more professions and a gendered pronoun in
/// a dependent clause), then late_binding (first cue in a later sentence),
/// then explicit_gender (binary cue), else other.
Phenomenon detect_phenomenon(std::string_view english, const SourceCue& cue, const EnglishLexicon& lex);

enum class PreservationState { preserved, neutralized, wrong_gender };
std::string_view to_string(PreservationState s);
std::optional<PreservationState> parse_state(std::string_view s);

/// Classifier branch that produced a verdict, in evaluation order.
enum class RulePath {
  lexical_marker,
  gendered_name,
  gendered_term,
  morphology,
  honorific,
  ergative,
  fallback,
  default_path,
  source_unmarked,
  unlicensed_marker,
};
std::string_view to_string(RulePath r);

struct PreservationVerdict {
  PreservationState state = PreservationState::neutralized;
  RulePath rule_path = RulePath::default_path;
  bool used_fallback = false;
  /// Lower-ranked evidence disagreed with the deciding branch.
  bool conflict_resolved = false;
  /// The fallback oracle was consulted and failed.
  bool oracle_failed = false;

  /// `rule_path`, suffixed with `+conflict_resolved` when flagged.
  std::string rule_path_label() const;
};

/// Judgment used when no rule fires. Implementations must be deterministic
/// for identical inputs and configuration.
class FallbackOracle {
 public:
  virtual ~FallbackOracle() = default;
  /// Returns nullopt (or throws) when the oracle cannot decide.
  virtual std::optional<PreservationState> judge(std::string_view source, std::string_view hindi,
                                                 Gender expected) = 0;
  /// Oracles that cannot take concurrent calls return true; calls are then
  /// serialized.
  virtual bool single_flight() const { return false; }

  std::optional<PreservationState> call(std::string_view source, std::string_view hindi,
                                        Gender expected);

 private:
  std::mutex mutex_;
};

/// Branch order: lexical markers, names, gendered kinship/profession terms,
/// singular verb/adjective morphology, ergative/honorific neutralization,
/// fallback. Morphology inside a clause that carries an ergative or honorific
/// marker is object agreement and is ignored. Sources without a binary cue are
/// routed to classify_unmarked_source.
PreservationVerdict classify_preservation(const SourceCue& cue, std::string_view hindi,
                                          const hindi::Lexicons& lex,
                                          FallbackOracle* oracle = nullptr);

/// Neutral or ambiguous sources: an inserted lexical gender marker or gendered
/// name is an unlicensed gender claim (wrong_gender); anything else is
/// neutralized. Agreement morphology is grammatically forced and not counted.
PreservationVerdict classify_unmarked_source(std::string_view hindi, const hindi::Lexicons& lex);

// ---------------------------------------------------------------------------
// Agreement harness

struct LabeledExample {
  std::string id;
  std::string source_en;
  std::string hindi;
  PreservationState label;
  std::string note;
};

std::vector<LabeledExample> read_labeled_jsonl(std::istream& in);

struct AgreementReport {
  struct Row {
    std::string id;
    PreservationState label;
    PreservationVerdict verdict;
  };
  std::size_t total = 0;
  std::size_t agree = 0;
  std::size_t rule_determined = 0;
  std::size_t rule_determined_agree = 0;
  std::map<PreservationState, std::pair<std::size_t, std::size_t>> per_label;  // (agree, total)
  std::vector<Row> disagreements;

  double percent() const { return total ? 100.0 * static_cast<double>(agree) / static_cast<double>(total) : 0.0; }
};

AgreementReport agreement(std::span<const LabeledExample> examples, const EnglishLexicon& english,
                          const hindi::Lexicons& lex, FallbackOracle* oracle = nullptr);

}  // namespace fidelity::cue
