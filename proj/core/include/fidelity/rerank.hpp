#pragma once

// Source-aware (SAR) and phenomenon-aware (PAR) candidate reranking.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fidelity/cue_analysis.hpp"
#include "fidelity/hindi_text.hpp"

namespace fidelity::rerank {

enum class Origin { base_system, sampled };
std::string_view to_string(Origin o);

struct Candidate {
  std::string text;
  Origin origin = Origin::sampled;
  std::size_t index = 0;
};

struct ScoreBreakdown {
  double q = 0;  // quality in [0, 1]
  double g = 0;  // gender preservation score
  double e = 0;  // neutralizing-construction penalty, 0 or 1
  double s = 0;  // weighted combination
  int m = 0;     // token-match score
};

/// Trapezoid and penalty constants of the quality heuristic.
struct QualityParams {
  double ratio_zero_low = 0.2;
  double ratio_one_low = 0.6;
  double ratio_one_high = 2.5;
  double ratio_zero_high = 4.0;
  double repeat_saturation = 4.0;
};

/// Mapping from classifier verdicts to the gender score.
struct GenderScores {
  double preserved = 1.0;
  double neutralized = 0.0;
  double wrong_gender = -1.0;
  double unmarked_source = 0.5;
};

struct RerankConfig {
  double lambda_q = 0.35;
  double lambda_g = 1.0;
  double lambda_e = 0.35;
  std::size_t k = 5;
  bool lexicalize = true;
  bool phenomenon_prompts = true;
  int theta_explicit = 1;
  int theta_multiclause = 2;
  double temperature = 0.7;
  QualityParams quality;
  GenderScores gender;

  /// Throws ValidationError on negative weights or k == 0.
  void validate() const;
  /// Canonical one-line rendering of every field; stable across runs.
  std::string canonical() const;
  std::string digest() const;
};

enum class Method { baseline, passthrough, sar, par, par_fallback_sar };
std::string_view to_string(Method m);

struct SelectionResult {
  Candidate chosen;
  std::vector<ScoreBreakdown> scores;  // parallel to the pool
  Method method = Method::sar;
};

struct QualityParts {
  double ratio = 0;
  double length = 0;
  double repetition = 0;
  double script = 0;
  std::size_t repeated_trigrams = 0;
  double total() const { return length * repetition * script; }
};

/// Q = q_len * q_rep * q_script. Throws ValidationError on empty input.
QualityParts quality_parts(std::string_view source, std::string_view hindi,
                           const QualityParams& params = {});
double quality_score(std::string_view source, std::string_view hindi, const QualityParams& params = {});

double gender_score(const cue::SourceCue& cue, std::string_view hindi, const hindi::Lexicons& lex,
                    const GenderScores& scores = {});

/// 1 when the output carries an ergative or honorific construction.
int ergative_penalty(std::string_view hindi, const hindi::Lexicons& lex);

/// Distinct cue-gender set tokens minus distinct opposite-gender set tokens.
int token_match_score(std::string_view hindi, const cue::SourceCue& cue, const hindi::Lexicons& lex);

ScoreBreakdown score_candidate(std::string_view source, const cue::SourceCue& cue,
                               std::string_view hindi, const RerankConfig& config,
                               const hindi::Lexicons& lex);

/// Argmax of S. Exact ties prefer the better weighted component (g, then q,
/// then lower e, each only when its weight is positive), then the lowest
/// index. Throws ValidationError on an empty pool.
SelectionResult sar_select(std::string_view source, const cue::SourceCue& cue,
                           std::span<const Candidate> pool, const RerankConfig& config,
                           const hindi::Lexicons& lex);

/// Token-match threshold for a routed phenomenon.
int threshold_for(cue::Phenomenon p, const RerankConfig& config);

/// Among candidates with m >= threshold, the highest m (ties: higher S, then
/// lowest index). Falls back to sar_select when none qualifies.
SelectionResult par_select(std::string_view source, const cue::SourceCue& cue, cue::Phenomenon phenomenon,
                           std::span<const Candidate> pool, const RerankConfig& config,
                           const hindi::Lexicons& lex);

struct PromptSpec {
  std::string template_name;  // explicit, coreference, generic
  std::string instruction;
  std::string gender_slot;  // filled [male/female] value, empty if none

  /// Instruction followed by a blank line and the source sentence.
  std::string render(std::string_view source) const;
};

PromptSpec generic_prompt();
/// explicit_gender and late_binding use the explicit template; winograd_coref
/// the coreference template; anything else the generic prompt.
PromptSpec par_prompt(cue::Phenomenon phenomenon, const cue::SourceCue& cue, std::string_view source);
/// Prompt for a PAR configuration: the phenomenon template (or the generic
/// prompt when phenomenon prompts are off) plus, when lexicalizing, a clause
/// permitting a minimal lexical gender marker.
PromptSpec build_prompt(cue::Phenomenon phenomenon, const cue::SourceCue& cue, std::string_view source,
                        const RerankConfig& config);

}  // namespace fidelity::rerank
