#pragma once

// Devanagari tokenization and the low-level Hindi detectors used by the
// preservation classifier and the rerankers.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fidelity/text.hpp"

namespace fidelity::hindi {

enum class Script { devanagari, latin, digit, punct, other };

struct Token {
  std::string surface;
  std::size_t begin = 0;  // code point offsets, half-open
  std::size_t end = 0;
  Script script = Script::other;
};

/// Splits on whitespace and punctuation. Punctuation (including the danda)
/// becomes single-character tokens; runs of Devanagari, Latin, or digit code
/// points become word tokens. Combining marks and ZWJ/ZWNJ stay attached.
std::vector<Token> tokenize(std::string_view text);

enum class SignalKind { ergative, honorific, fem_verb, masc_verb, lexical_gender, gendered_name };
std::string_view to_string(SignalKind k);

struct MorphSignal {
  SignalKind kind;
  Gender gender = Gender::none;
  std::size_t token_index = 0;

  bool operator==(const MorphSignal&) const = default;
};

/// What kind of gendered noun a lexical signal came from.
enum class TermClass { marker, kinship, profession };

struct GenderedTerm {
  Gender gender;
  TermClass term_class;
};

/// Immutable after construction; safe to share across threads.
///
/// File format: UTF-8, tab-separated `form<TAB>kind<TAB>gender`, `#` comments.
/// Kinds: ergative, honorific, honorific_pronoun, plural_agreement, verb,
/// verb_suffix, opaque, not_verb, auxiliary, stem_auxiliary, dative,
/// subject_pronoun, clause_boundary, lexical_gender, kinship,
/// gendered_profession, name.
class Lexicons {
 public:
  static Lexicons load(const std::filesystem::path& file);
  static Lexicons parse(std::istream& in, std::string_view origin);

  /// Registers a gendered name (Devanagari form). Rejects non-binary gender.
  void add_name(std::string form, Gender g);

  bool is_ergative(std::string_view form) const;
  bool is_honorific(std::string_view form) const;
  bool is_honorific_pronoun(std::string_view form) const;
  bool is_plural_agreement(std::string_view form) const;
  bool is_opaque(std::string_view form) const;
  bool is_auxiliary(std::string_view form) const;
  bool is_clause_boundary(std::string_view form) const;
  /// Modal/aspect auxiliaries (सकना, रहना, चुकना) that follow a bare stem.
  bool is_stem_auxiliary(std::string_view form) const;
  bool is_dative(std::string_view form) const;
  bool is_subject_pronoun(std::string_view form) const;
  /// Gender from the verb/adjective form list, if listed.
  std::optional<Gender> listed_verb(std::string_view form) const;
  /// Gender from the suffix fallback rules; ignores listed and excluded forms.
  std::optional<Gender> suffix_verb(std::string_view form) const;
  std::optional<GenderedTerm> gendered_term(std::string_view form) const;
  std::optional<Gender> name_gender(std::string_view form) const;
  /// True if the form appears anywhere in the lexicon.
  bool known(std::string_view form) const;

  /// Predefined token set used by the phenomenon-aware reranker: gendered
  /// lexical terms plus listed gendered verb forms of the given gender.
  const std::unordered_set<std::string>& match_tokens(Gender g) const;

  std::size_t size() const { return entries_; }
  /// Content digest of everything loaded, for run manifests.
  std::string version() const;

 private:
  void add(std::string form, std::string_view kind, Gender g, std::string_view origin,
           std::size_t line);

  std::unordered_set<std::string> ergative_, honorific_, honorific_pronoun_, plural_agreement_,
      opaque_, not_verb_, auxiliary_, stem_auxiliary_, dative_, subject_pronoun_, clause_boundary_, all_forms_;
  std::unordered_map<std::string, Gender> verbs_;
  std::vector<std::pair<std::u32string, Gender>> suffixes_;
  std::unordered_map<std::string, GenderedTerm> terms_;
  std::unordered_map<std::string, Gender> names_;
  std::unordered_set<std::string> match_male_, match_female_, match_empty_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::size_t entries_ = 0;
};

using Tokens = std::span<const Token>;

std::vector<MorphSignal> detect_ergative(Tokens tokens, const Lexicons& lex);
std::vector<MorphSignal> detect_honorific(Tokens tokens, const Lexicons& lex);
/// Listed gendered forms, plus the suffix rule in predicate position. A
/// token directly before a stem auxiliary is a bare stem and is skipped.
std::vector<MorphSignal> detect_gendered_morphology(Tokens tokens, const Lexicons& lex);
std::vector<MorphSignal> detect_lexical_gender(Tokens tokens, const Lexicons& lex);
std::vector<MorphSignal> detect_gendered_names(Tokens tokens, const Lexicons& lex);
std::optional<Gender> lookup_name_gender(const Token& token, const Lexicons& lex);

/// Clause id per token. Sentence punctuation, commas, and clause_boundary
/// words (कि, और, ...) start a new clause.
std::vector<std::size_t> clause_ids(Tokens tokens, const Lexicons& lex);

}  // namespace fidelity::hindi
