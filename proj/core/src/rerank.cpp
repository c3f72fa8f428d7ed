#include "fidelity/rerank.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "fidelity/error.hpp"
#include "fidelity/text.hpp"

namespace fidelity::rerank {

std::string_view to_string(Origin o) { return o == Origin::base_system ? "base_system" : "sampled"; }

std::string_view to_string(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::passthrough: return "passthrough";
    case Method::sar: return "sar";
    case Method::par: return "par";
    case Method::par_fallback_sar: return "par_fallback_sar";
  }
  return "?";
}

void RerankConfig::validate() const {
  if (lambda_q < 0 || lambda_g < 0 || lambda_e < 0)
    throw ValidationError("rerank weights must be non-negative");
  if (k == 0) throw ValidationError("k must be at least 1");
  if (theta_explicit < 0 || theta_multiclause < 0) throw ValidationError("thresholds must be non-negative");
  if (temperature < 0) throw ValidationError("temperature must be non-negative");
  const auto& qp = quality;
  if (!(qp.ratio_zero_low < qp.ratio_one_low && qp.ratio_one_low <= qp.ratio_one_high &&
        qp.ratio_one_high < qp.ratio_zero_high))
    throw ValidationError("quality length ratios must be increasing");
  if (qp.repeat_saturation <= 0) throw ValidationError("repeat saturation must be positive");
}

std::string RerankConfig::canonical() const {
  return fmt::format(
      "lq={:.17g};lg={:.17g};le={:.17g};k={};lex={};phen={};te={};tm={};temp={:.17g};"
      "ql={:.17g},{:.17g},{:.17g},{:.17g};qr={:.17g};g={:.17g},{:.17g},{:.17g},{:.17g}",
      lambda_q, lambda_g, lambda_e, k, lexicalize ? 1 : 0, phenomenon_prompts ? 1 : 0, theta_explicit,
      theta_multiclause, temperature, quality.ratio_zero_low, quality.ratio_one_low, quality.ratio_one_high,
      quality.ratio_zero_high, quality.repeat_saturation, gender.preserved, gender.neutralized,
      gender.wrong_gender, gender.unmarked_source);
}

std::string RerankConfig::digest() const { return text::digest(canonical()); }

namespace {

double trapezoid(double r, const QualityParams& p) {
  if (r <= p.ratio_zero_low || r >= p.ratio_zero_high) return 0.0;
  if (r < p.ratio_one_low) return (r - p.ratio_zero_low) / (p.ratio_one_low - p.ratio_zero_low);
  if (r <= p.ratio_one_high) return 1.0;
  return (p.ratio_zero_high - r) / (p.ratio_zero_high - p.ratio_one_high);
}

std::size_t repeated_trigrams(std::string_view hindi) {
  std::vector<std::string> words;
  for (const auto& t : hindi::tokenize(hindi))
    if (t.script != hindi::Script::punct) words.push_back(t.surface);
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i + 2 < words.size(); ++i)
    ++counts[words[i] + '\x1f' + words[i + 1] + '\x1f' + words[i + 2]];
  std::size_t repeats = 0;
  for (const auto& [_, n] : counts) repeats += n - 1;
  return repeats;
}

}  // namespace

QualityParts quality_parts(std::string_view source, std::string_view hindi, const QualityParams& params) {
  const std::size_t xs = text::count_nonspace(source);
  const std::size_t ys = text::count_nonspace(hindi);
  if (xs == 0) throw ValidationError("quality: empty source");
  if (ys == 0) throw ValidationError("quality: empty candidate");

  QualityParts parts;
  parts.ratio = static_cast<double>(ys) / static_cast<double>(xs);
  parts.length = trapezoid(parts.ratio, params);
  parts.repeated_trigrams = repeated_trigrams(hindi);
  parts.repetition =
      1.0 - std::min(1.0, static_cast<double>(parts.repeated_trigrams) / params.repeat_saturation);

  std::size_t ok = 0;
  for (char32_t cp : text::decode_utf8(hindi)) {
    if (text::is_space(cp)) continue;
    if (text::is_devanagari(cp) || text::is_digit(cp) || text::is_punct(cp)) ++ok;
  }
  parts.script = static_cast<double>(ok) / static_cast<double>(ys);
  return parts;
}

double quality_score(std::string_view source, std::string_view hindi, const QualityParams& params) {
  return quality_parts(source, hindi, params).total();
}

double gender_score(const cue::SourceCue& cue, std::string_view hindi, const hindi::Lexicons& lex,
                    const GenderScores& scores) {
  if (!is_binary(cue.gender)) return scores.unmarked_source;
  // Scoring never consults the fallback oracle: it must stay pure and cheap.
  switch (cue::classify_preservation(cue, hindi, lex).state) {
    case cue::PreservationState::preserved: return scores.preserved;
    case cue::PreservationState::neutralized: return scores.neutralized;
    case cue::PreservationState::wrong_gender: return scores.wrong_gender;
  }
  return scores.neutralized;
}

int ergative_penalty(std::string_view hindi, const hindi::Lexicons& lex) {
  if (hindi.empty()) return 0;
  const auto tokens = hindi::tokenize(hindi);
  return hindi::detect_ergative(tokens, lex).empty() && hindi::detect_honorific(tokens, lex).empty() ? 0 : 1;
}

int token_match_score(std::string_view hindi, const cue::SourceCue& cue, const hindi::Lexicons& lex) {
  if (!is_binary(cue.gender)) return 0;
  const auto& same = lex.match_tokens(cue.gender);
  const auto& other = lex.match_tokens(fidelity::opposite(cue.gender));
  std::unordered_set<std::string> seen;
  int m = 0;
  for (const auto& t : hindi::tokenize(hindi)) {
    if (!seen.insert(t.surface).second) continue;
    if (same.count(t.surface)) ++m;
    if (other.count(t.surface)) --m;
  }
  return m;
}

ScoreBreakdown score_candidate(std::string_view source, const cue::SourceCue& cue, std::string_view hindi,
                               const RerankConfig& config, const hindi::Lexicons& lex) {
  ScoreBreakdown b;
  b.q = quality_score(source, hindi, config.quality);
  b.g = gender_score(cue, hindi, lex, config.gender);
  b.e = ergative_penalty(hindi, lex);
  b.s = config.lambda_q * b.q + config.lambda_g * b.g - config.lambda_e * b.e;
  b.m = token_match_score(hindi, cue, lex);
  return b;
}

namespace {

std::vector<ScoreBreakdown> score_pool(std::string_view source, const cue::SourceCue& cue,
                                       std::span<const Candidate> pool, const RerankConfig& config,
                                       const hindi::Lexicons& lex) {
  if (pool.empty()) throw ValidationError("cannot select from an empty candidate pool");
  config.validate();
  std::vector<ScoreBreakdown> out;
  out.reserve(pool.size());
  for (const auto& c : pool) out.push_back(score_candidate(source, cue, c.text, config, lex));
  return out;
}

// Sign of S(a) - S(b), computed from the component differences. Gaps below a
// relative 1e-12 of the weight sum count as ties, so rescaling every weight
// by the same factor cannot flip a rounding-level tie.
int compare_s(const ScoreBreakdown& a, const ScoreBreakdown& b, const RerankConfig& c) {
  const double diff = c.lambda_q * (a.q - b.q) + c.lambda_g * (a.g - b.g) - c.lambda_e * (a.e - b.e);
  const double tol = 1e-12 * (c.lambda_q + c.lambda_g + c.lambda_e);
  return diff > tol ? 1 : diff < -tol ? -1 : 0;
}

// True when a beats b on S; S ties fall through to the weighted components.
// Equal on everything means neither wins and index decides.
bool sar_better(const ScoreBreakdown& a, const ScoreBreakdown& b, const RerankConfig& c) {
  if (const int cmp = compare_s(a, b, c); cmp != 0) return cmp > 0;
  if (c.lambda_g > 0 && a.g != b.g) return a.g > b.g;
  if (c.lambda_q > 0 && a.q != b.q) return a.q > b.q;
  if (c.lambda_e > 0 && a.e != b.e) return a.e < b.e;
  return false;
}

std::size_t sar_argmax(const std::vector<ScoreBreakdown>& scores, const RerankConfig& config) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (sar_better(scores[i], scores[best], config)) best = i;
  return best;
}

}  // namespace

SelectionResult sar_select(std::string_view source, const cue::SourceCue& cue, std::span<const Candidate> pool,
                           const RerankConfig& config, const hindi::Lexicons& lex) {
  SelectionResult r;
  r.scores = score_pool(source, cue, pool, config, lex);
  r.chosen = pool[sar_argmax(r.scores, config)];
  r.method = Method::sar;
  return r;
}

int threshold_for(cue::Phenomenon p, const RerankConfig& config) {
  return p == cue::Phenomenon::late_binding || p == cue::Phenomenon::winograd_coref ? config.theta_multiclause
                                                                                     : config.theta_explicit;
}

SelectionResult par_select(std::string_view source, const cue::SourceCue& cue, cue::Phenomenon phenomenon,
                           std::span<const Candidate> pool, const RerankConfig& config,
                           const hindi::Lexicons& lex) {
  SelectionResult r;
  r.scores = score_pool(source, cue, pool, config, lex);
  const int theta = threshold_for(phenomenon, config);

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& s = r.scores[i];
    if (s.m < theta) continue;
    if (!best || s.m > r.scores[*best].m || (s.m == r.scores[*best].m && compare_s(s, r.scores[*best], config) > 0)) best = i;
  }
  if (best) {
    r.chosen = pool[*best];
    r.method = Method::par;
  } else {
    r.chosen = pool[sar_argmax(r.scores, config)];
    r.method = Method::par_fallback_sar;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Prompts

std::string PromptSpec::render(std::string_view source) const {
  std::string out = instruction;
  out += "\n\n";
  out += source;
  return out;
}

namespace {

constexpr std::string_view kLead = "Translate the following English sentence into natural Hindi.";
constexpr std::string_view kTail = "Output only the Hindi translation.";

std::string lexical_clause(Gender g) {
  const char* marker = g == Gender::female ? "महिला" : "पुरुष";
  return fmt::format(
      "If verb agreement alone would not show that the person is {}, you may add a minimal lexical "
      "gender marker such as {}.",
      to_string(g), marker);
}

}  // namespace

PromptSpec generic_prompt() {
  return {"generic", fmt::format("{} {}", kLead, kTail), ""};
}

PromptSpec par_prompt(cue::Phenomenon phenomenon, const cue::SourceCue& cue, std::string_view /*source*/) {
  using cue::Phenomenon;
  switch (phenomenon) {
    case Phenomenon::explicit_gender:
    case Phenomenon::late_binding:
      if (is_binary(cue.gender)) {
        const std::string g{to_string(cue.gender)};
        return {"explicit",
                fmt::format("{} The English source explicitly marks the relevant person as {}. Preserve this "
                            "gender cue so that a Hindi reader can recover it. {}",
                            kLead, g, kTail),
                g};
      }
      return generic_prompt();
    case Phenomenon::winograd_coref:
      return {"coreference",
              fmt::format("{} Resolve the pronoun/coreference relation in the English source before translating. "
                          "Preserve the gender of the referred person in Hindi if the English source explicitly "
                          "provides it. {}",
                          kLead, kTail),
              ""};
    case Phenomenon::other: break;
  }
  return generic_prompt();
}

PromptSpec build_prompt(cue::Phenomenon phenomenon, const cue::SourceCue& cue, std::string_view source,
                        const RerankConfig& config) {
  PromptSpec p = config.phenomenon_prompts ? par_prompt(phenomenon, cue, source) : generic_prompt();
  if (config.lexicalize && is_binary(cue.gender)) {
    // Keep the final output instruction last.
    const auto pos = p.instruction.rfind(kTail);
    p.instruction.insert(pos, lexical_clause(cue.gender) + " ");
    p.template_name += "+lexical";
    if (p.gender_slot.empty()) p.gender_slot = std::string(to_string(cue.gender));
  }
  return p;
}

}  // namespace fidelity::rerank
