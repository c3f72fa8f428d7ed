#include "fidelity/hindi_text.hpp"

#include <fstream>
#include <sstream>

#include "fidelity/error.hpp"

namespace fidelity::hindi {
namespace {

bool is_latin_letter(char32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
         (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7);
}

bool is_joiner(char32_t cp) { return cp == 0x200C || cp == 0x200D; }

Script classify(char32_t cp) {
  if (text::is_devanagari(cp)) return Script::devanagari;
  if (text::is_digit(cp)) return Script::digit;
  if (text::is_punct(cp)) return Script::punct;
  if (is_latin_letter(cp)) return Script::latin;
  return Script::other;
}

bool ends_sentence(const Token& t) {
  return t.script == Script::punct &&
         (t.surface == "।" || t.surface == "॥" || t.surface == "." || t.surface == "?" ||
          t.surface == "!");
}

bool ends_with(std::u32string_view s, std::u32string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::ergative: return "ergative";
    case SignalKind::honorific: return "honorific";
    case SignalKind::fem_verb: return "fem_verb";
    case SignalKind::masc_verb: return "masc_verb";
    case SignalKind::lexical_gender: return "lexical_gender";
    case SignalKind::gendered_name: return "gendered_name";
  }
  return "unknown";
}

std::vector<Token> tokenize(std::string_view input) {
  const std::u32string cps = text::decode_utf8(input);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t cp = cps[i];
    if (text::is_space(cp)) {
      ++i;
      continue;
    }
    Script script = classify(cp);
    if (is_joiner(cp)) script = Script::other;
    std::size_t j = i + 1;
    if (script != Script::punct) {
      while (j < cps.size()) {
        const char32_t next = cps[j];
        if (text::is_space(next)) break;
        if (is_joiner(next) && script == Script::devanagari) {
          ++j;
          continue;
        }
        if (classify(next) != script || is_joiner(next)) break;
        ++j;
      }
    }
    tokens.push_back(Token{text::encode_utf8(std::u32string_view(cps).substr(i, j - i)), i, j,
                           script});
    i = j;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Lexicons

Lexicons Lexicons::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open lexicon file: " + file.string());
  return parse(in, file.string());
}

Lexicons Lexicons::parse(std::istream& in, std::string_view origin) {
  Lexicons lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError(std::string(origin) + ":" + std::to_string(lineno) +
                            ": expected form<TAB>kind<TAB>gender");
    auto g = parse_gender(text::trim(cols[2]));
    if (!g)
      throw ValidationError(std::string(origin) + ":" + std::to_string(lineno) +
                            ": unknown gender '" + cols[2] + "'");
    lex.add(text::trim(cols[0]), text::trim(cols[1]), *g, origin, lineno);
  }
  if (lex.entries_ == 0) throw ValidationError(std::string(origin) + ": lexicon is empty");
  return lex;
}

void Lexicons::add(std::string form, std::string_view kind, Gender g, std::string_view origin,
                   std::size_t line) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError(std::string(origin) + ":" + std::to_string(line) + ": " + msg);
  };
  const bool gendered = kind == "verb" || kind == "verb_suffix" || kind == "lexical_gender" ||
                        kind == "kinship" || kind == "gendered_profession" || kind == "name";
  if (gendered && !is_binary(g)) fail("kind '" + std::string(kind) + "' needs male or female");
  if (!gendered && g != Gender::none) fail("kind '" + std::string(kind) + "' takes gender none");

  hash_ = text::fnv1a64(form + '\t' + std::string(kind) + '\t' + std::string(to_string(g)), hash_);
  ++entries_;

  if (kind == "verb_suffix") {
    suffixes_.emplace_back(text::decode_utf8(form), g);
    return;
  }
  all_forms_.insert(form);
  if (kind == "ergative") {
    ergative_.insert(form);
  } else if (kind == "honorific") {
    honorific_.insert(form);
  } else if (kind == "honorific_pronoun") {
    honorific_pronoun_.insert(form);
  } else if (kind == "plural_agreement") {
    plural_agreement_.insert(form);
  } else if (kind == "opaque") {
    opaque_.insert(form);
  } else if (kind == "not_verb") {
    not_verb_.insert(form);
  } else if (kind == "auxiliary") {
    auxiliary_.insert(form);
  } else if (kind == "stem_auxiliary") {
    stem_auxiliary_.insert(form);
  } else if (kind == "dative") {
    dative_.insert(form);
  } else if (kind == "subject_pronoun") {
    subject_pronoun_.insert(form);
  } else if (kind == "clause_boundary") {
    clause_boundary_.insert(form);
  } else if (kind == "verb") {
    auto [it, inserted] = verbs_.emplace(form, g);
    if (!inserted && it->second != g) fail("'" + form + "' listed as both fem and masc verb");
    (g == Gender::male ? match_male_ : match_female_).insert(form);
  } else if (kind == "lexical_gender" || kind == "kinship" || kind == "gendered_profession") {
    const TermClass cls = kind == "kinship"               ? TermClass::kinship
                          : kind == "gendered_profession" ? TermClass::profession
                                                          : TermClass::marker;
    auto [it, inserted] = terms_.emplace(form, GenderedTerm{g, cls});
    if (!inserted && it->second.gender != g) fail("'" + form + "' has conflicting genders");
    (g == Gender::male ? match_male_ : match_female_).insert(form);
  } else if (kind == "name") {
    names_[form] = g;
  } else {
    fail("unknown kind '" + std::string(kind) + "'");
  }
}

void Lexicons::add_name(std::string form, Gender g) {
  if (!is_binary(g)) throw ValidationError("name '" + form + "' needs male or female gender");
  hash_ = text::fnv1a64(form + "\tname\t" + std::string(to_string(g)), hash_);
  ++entries_;
  all_forms_.insert(form);
  names_[std::move(form)] = g;
}

bool Lexicons::is_ergative(std::string_view f) const { return ergative_.contains(std::string(f)); }
bool Lexicons::is_honorific(std::string_view f) const {
  return honorific_.contains(std::string(f));
}
bool Lexicons::is_honorific_pronoun(std::string_view f) const {
  return honorific_pronoun_.contains(std::string(f));
}
bool Lexicons::is_plural_agreement(std::string_view f) const {
  return plural_agreement_.contains(std::string(f));
}
bool Lexicons::is_opaque(std::string_view f) const { return opaque_.contains(std::string(f)); }
bool Lexicons::is_auxiliary(std::string_view f) const {
  return auxiliary_.contains(std::string(f));
}
bool Lexicons::is_clause_boundary(std::string_view f) const {
  return clause_boundary_.contains(std::string(f));
}
bool Lexicons::is_stem_auxiliary(std::string_view f) const { return stem_auxiliary_.contains(std::string(f)); }
bool Lexicons::is_dative(std::string_view f) const { return dative_.contains(std::string(f)); }
bool Lexicons::is_subject_pronoun(std::string_view f) const { return subject_pronoun_.contains(std::string(f)); }
bool Lexicons::known(std::string_view f) const { return all_forms_.contains(std::string(f)); }

std::optional<Gender> Lexicons::listed_verb(std::string_view f) const {
  if (auto it = verbs_.find(std::string(f)); it != verbs_.end()) return it->second;
  return std::nullopt;
}

std::optional<Gender> Lexicons::suffix_verb(std::string_view f) const {
  if (known(f)) return std::nullopt;
  const std::u32string cps = text::decode_utf8(f);
  for (const auto& [suffix, g] : suffixes_)
    if (ends_with(cps, suffix)) return g;
  return std::nullopt;
}

std::optional<GenderedTerm> Lexicons::gendered_term(std::string_view f) const {
  if (auto it = terms_.find(std::string(f)); it != terms_.end()) return it->second;
  return std::nullopt;
}

std::optional<Gender> Lexicons::name_gender(std::string_view f) const {
  if (auto it = names_.find(std::string(f)); it != names_.end()) return it->second;
  return std::nullopt;
}

const std::unordered_set<std::string>& Lexicons::match_tokens(Gender g) const {
  if (g == Gender::male) return match_male_;
  if (g == Gender::female) return match_female_;
  return match_empty_;
}

std::string Lexicons::version() const { return text::hex64(hash_); }

// ---------------------------------------------------------------------------
// Detectors

std::vector<std::size_t> clause_ids(Tokens tokens, const Lexicons& lex) {
  std::vector<std::size_t> ids(tokens.size());
  std::size_t clause = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (lex.is_clause_boundary(t.surface) && i > 0) ++clause;
    ids[i] = clause;
    if (ends_sentence(t) || (t.script == Script::punct && t.surface == ",")) ++clause;
  }
  return ids;
}

std::vector<MorphSignal> detect_ergative(Tokens tokens, const Lexicons& lex) {
  std::vector<MorphSignal> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].script == Script::devanagari && lex.is_ergative(tokens[i].surface))
      out.push_back({SignalKind::ergative, Gender::none, i});
  return out;
}

std::vector<MorphSignal> detect_honorific(Tokens tokens, const Lexicons& lex) {
  std::vector<MorphSignal> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.script != Script::devanagari) continue;
    if (lex.is_honorific(t.surface)) {
      out.push_back({SignalKind::honorific, Gender::none, i});
    } else if (lex.is_honorific_pronoun(t.surface)) {
      // आप counts only when plural agreement follows in the same sentence.
      for (std::size_t j = i + 1; j < tokens.size() && !ends_sentence(tokens[j]); ++j) {
        if (lex.is_plural_agreement(tokens[j].surface)) {
          out.push_back({SignalKind::honorific, Gender::none, i});
          break;
        }
      }
    }
  }
  return out;
}

std::vector<MorphSignal> detect_gendered_morphology(Tokens tokens, const Lexicons& lex) {
  std::vector<MorphSignal> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.script != Script::devanagari) continue;
    if (i + 1 < tokens.size() && lex.is_stem_auxiliary(tokens[i + 1].surface)) continue;
    std::optional<Gender> g = lex.listed_verb(t.surface);
    if (!g) {
      // Suffix fallback only in predicate position: clause-final or before an auxiliary.
      const bool predicate = i + 1 == tokens.size() || tokens[i + 1].script == Script::punct ||
                             lex.is_auxiliary(tokens[i + 1].surface);
      if (predicate) g = lex.suffix_verb(t.surface);
    }
    if (g) out.push_back({*g == Gender::female ? SignalKind::fem_verb : SignalKind::masc_verb, *g, i});
  }
  return out;
}

std::vector<MorphSignal> detect_lexical_gender(Tokens tokens, const Lexicons& lex) {
  std::vector<MorphSignal> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (auto term = lex.gendered_term(tokens[i].surface))
      out.push_back({SignalKind::lexical_gender, term->gender, i});
  return out;
}

std::optional<Gender> lookup_name_gender(const Token& token, const Lexicons& lex) {
  return lex.name_gender(token.surface);
}

std::vector<MorphSignal> detect_gendered_names(Tokens tokens, const Lexicons& lex) {
  std::vector<MorphSignal> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (auto g = lookup_name_gender(tokens[i], lex))
      out.push_back({SignalKind::gendered_name, *g, i});
  return out;
}

}  // namespace fidelity::hindi
