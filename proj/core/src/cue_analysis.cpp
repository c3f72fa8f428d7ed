#include "fidelity/cue_analysis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "fidelity/error.hpp"
#include "json.hpp"

namespace fidelity::cue {
namespace {

constexpr std::array<std::string_view, 5> kClauseConjunctions = {"because", "so", "that", "when",
                                                                 "while"};

struct Word {
  std::string lower;
  std::string surface;
  std::size_t sentence;
  std::size_t clause;
  std::size_t clause_in_sentence;
};

struct Segmented {
  std::vector<Word> words;
  std::size_t sentences = 0;
  std::size_t clauses = 0;
};

Segmented segment_english(std::string_view s) {
  Segmented out;
  std::size_t sentence = 0, clause = 0, local_clause = 0;
  bool sentence_has_words = false;
  auto close_sentence = [&] {
    if (!sentence_has_words) return;
    ++sentence;
    ++clause;
    local_clause = 0;
    sentence_has_words = false;
  };
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isalpha(c)) {
      std::size_t j = i;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      std::string surface(s.substr(i, j - i));
      std::string lower = text::to_lower_ascii(surface);
      const bool conj = std::find(kClauseConjunctions.begin(), kClauseConjunctions.end(), lower) !=
                        kClauseConjunctions.end();
      if (conj && sentence_has_words) {
        ++clause;
        ++local_clause;
      }
      out.words.push_back({std::move(lower), std::move(surface), sentence, clause, local_clause});
      sentence_has_words = true;
      i = j;
    } else if (c == '.' || c == '?' || c == '!') {
      close_sentence();
      ++i;
    } else if (s.substr(i).starts_with("।")) {
      close_sentence();
      i += std::string_view("।").size();
    } else {
      ++i;
    }
  }
  if (sentence_has_words) {
    ++sentence;
    ++clause;
  }
  out.sentences = sentence;
  out.clauses = clause;
  return out;
}

bool has_signal(const std::vector<hindi::MorphSignal>& sigs, Gender g) {
  return std::any_of(sigs.begin(), sigs.end(), [g](const auto& s) { return s.gender == g; });
}

}  // namespace

EnglishLexicon::EnglishLexicon(const ResourceBundle& bundle) {
  for (const auto& w : bundle.cue_words) words_[w.word] = {w.gender, w.type};
  for (const auto& n : bundle.names) words_[text::to_lower_ascii(n.name)] = {n.gender, CueType::name};
  for (const auto& p : bundle.professions) {
    std::vector<std::string> parts;
    for (auto& w : text::split(p.term, ' '))
      if (!w.empty()) parts.push_back(w);
    professions_.push_back(std::move(parts));
  }
  std::stable_sort(professions_.begin(), professions_.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

std::optional<EnglishLexicon::Entry> EnglishLexicon::lookup(std::string_view lower_word) const {
  if (auto it = words_.find(std::string(lower_word)); it != words_.end()) return it->second;
  return std::nullopt;
}

SourceCue extract_source_cue(std::string_view english, const EnglishLexicon& lex) {
  SourceCue cue;
  cue.text = std::string(english);
  const Segmented seg = segment_english(english);
  cue.sentence_count = seg.sentences;
  cue.clause_count = seg.clauses;
  cue.multi_clause = seg.clauses > 1;
  bool male = false, female = false;
  for (const Word& w : seg.words) {
    auto entry = lex.lookup(w.lower);
    if (!entry) continue;
    // Names must be capitalized in running text to avoid common-word clashes.
    if (entry->type == CueType::name && !std::isupper(static_cast<unsigned char>(w.surface[0]))) continue;
    if (cue.evidence.empty()) {
      cue.clause_index = w.clause;
      cue.sentence_index = w.sentence;
    }
    cue.evidence.push_back({w.lower, entry->type, entry->gender, w.sentence, w.clause, w.clause_in_sentence});
    (entry->gender == Gender::male ? male : female) = true;
  }
  cue.gender = male && female ? Gender::ambiguous : male ? Gender::male : female ? Gender::female : Gender::neutral;
  return cue;
}

std::string_view to_string(Phenomenon p) {
  switch (p) {
    case Phenomenon::explicit_gender: return "explicit_gender";
    case Phenomenon::late_binding: return "late_binding";
    case Phenomenon::winograd_coref: return "winograd_coref";
    case Phenomenon::other: return "other";
  }
  return "other";
}

std::optional<Phenomenon> parse_phenomenon(std::string_view s) {
  for (auto p : {Phenomenon::explicit_gender, Phenomenon::late_binding, Phenomenon::winograd_coref,
                 Phenomenon::other})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::size_t count_professions(std::string_view english, const EnglishLexicon& lex) {
  const Segmented seg = segment_english(english);
  std::set<std::size_t> found;
  std::vector<bool> used(seg.words.size(), false);
  const auto& profs = lex.professions();
  for (std::size_t p = 0; p < profs.size(); ++p) {
    const auto& term = profs[p];
    for (std::size_t i = 0; i + term.size() <= seg.words.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < term.size() && match; ++k)
        match = !used[i + k] && seg.words[i + k].lower == term[k];
      if (!match) continue;
      for (std::size_t k = 0; k < term.size(); ++k) used[i + k] = true;
      found.insert(p);
    }
  }
  return found.size();
}

Phenomenon detect_phenomenon(std::string_view english, const SourceCue& cue, const EnglishLexicon& lex) {
  const bool dependent_pronoun = std::any_of(cue.evidence.begin(), cue.evidence.end(), [](const Evidence& e) {
    return e.type == CueType::pronoun && is_binary(e.gender) && e.clause_in_sentence > 0;
  });
  if (dependent_pronoun && count_professions(english, lex) >= 2) return Phenomenon::winograd_coref;
  if (cue.sentence_count > 1 && !cue.evidence.empty() && cue.sentence_index > 0)
    return Phenomenon::late_binding;
  if (is_binary(cue.gender)) return Phenomenon::explicit_gender;
  return Phenomenon::other;
}

std::string_view to_string(PreservationState s) {
  switch (s) {
    case PreservationState::preserved: return "preserved";
    case PreservationState::neutralized: return "neutralized";
    case PreservationState::wrong_gender: return "wrong_gender";
  }
  return "neutralized";
}

std::optional<PreservationState> parse_state(std::string_view s) {
  if (s == "preserved") return PreservationState::preserved;
  if (s == "neutralized") return PreservationState::neutralized;
  if (s == "wrong_gender" || s == "wrong-gender") return PreservationState::wrong_gender;
  return std::nullopt;
}

std::string_view to_string(RulePath r) {
  switch (r) {
    case RulePath::lexical_marker: return "lexical_marker";
    case RulePath::gendered_name: return "gendered_name";
    case RulePath::gendered_term: return "gendered_term";
    case RulePath::morphology: return "morphology";
    case RulePath::honorific: return "honorific";
    case RulePath::ergative: return "ergative";
    case RulePath::fallback: return "fallback";
    case RulePath::default_path: return "default";
    case RulePath::source_unmarked: return "source_unmarked";
    case RulePath::unlicensed_marker: return "unlicensed_marker";
  }
  return "default";
}

std::string PreservationVerdict::rule_path_label() const {
  std::string s(to_string(rule_path));
  if (conflict_resolved) s += "+conflict_resolved";
  return s;
}

std::optional<PreservationState> FallbackOracle::call(std::string_view source, std::string_view hindi,
                                                      Gender expected) {
  if (single_flight()) {
    std::lock_guard lock(mutex_);
    return judge(source, hindi, expected);
  }
  return judge(source, hindi, expected);
}

PreservationVerdict classify_unmarked_source(std::string_view hindi_text, const hindi::Lexicons& lex) {
  const auto tokens = hindi::tokenize(hindi_text);
  PreservationVerdict v{PreservationState::neutralized, RulePath::source_unmarked};
  for (const auto& s : hindi::detect_lexical_gender(tokens, lex)) {
    if (lex.gendered_term(tokens[s.token_index].surface)->term_class == hindi::TermClass::marker) {
      v = {PreservationState::wrong_gender, RulePath::unlicensed_marker};
      return v;
    }
  }
  if (!hindi::detect_gendered_names(tokens, lex).empty())
    v = {PreservationState::wrong_gender, RulePath::unlicensed_marker};
  return v;
}

PreservationVerdict classify_preservation(const SourceCue& cue, std::string_view hindi_text,
                                          const hindi::Lexicons& lex, FallbackOracle* oracle) {
  const Gender g = cue.gender;
  if (!is_binary(g)) return classify_unmarked_source(hindi_text, lex);

  const auto tokens = hindi::tokenize(hindi_text);
  const auto clauses = hindi::clause_ids(tokens, lex);
  const auto ergative = hindi::detect_ergative(tokens, lex);
  const auto honorific = hindi::detect_honorific(tokens, lex);

  // Clauses whose verb agreement says nothing about the person: ergative
  // (object agreement), honorific forms other than a bare आप (plural
  // agreement), and dative experiencers with no nominative pronoun.
  std::set<std::size_t> neutralized_clauses;
  for (const auto& s : ergative) neutralized_clauses.insert(clauses[s.token_index]);
  for (const auto& s : honorific)
    if (!lex.is_honorific_pronoun(tokens[s.token_index].surface))
      neutralized_clauses.insert(clauses[s.token_index]);
  std::set<std::size_t> dative_clauses, subject_clauses;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (lex.is_dative(tokens[i].surface)) dative_clauses.insert(clauses[i]);
    if (lex.is_subject_pronoun(tokens[i].surface)) subject_clauses.insert(clauses[i]);
  }
  for (auto c : dative_clauses)
    if (!subject_clauses.contains(c)) neutralized_clauses.insert(c);

  std::vector<hindi::MorphSignal> markers, terms;
  for (const auto& s : hindi::detect_lexical_gender(tokens, lex)) {
    const auto cls = lex.gendered_term(tokens[s.token_index].surface)->term_class;
    (cls == hindi::TermClass::marker ? markers : terms).push_back(s);
  }
  const auto names = hindi::detect_gendered_names(tokens, lex);
  std::vector<hindi::MorphSignal> morphology;
  for (const auto& s : hindi::detect_gendered_morphology(tokens, lex))
    if (!neutralized_clauses.contains(clauses[s.token_index])) morphology.push_back(s);

  const std::array<std::pair<RulePath, const std::vector<hindi::MorphSignal>*>, 4> tiers = {{
      {RulePath::lexical_marker, &markers},
      {RulePath::gendered_name, &names},
      {RulePath::gendered_term, &terms},
      {RulePath::morphology, &morphology},
  }};

  for (std::size_t t = 0; t < tiers.size(); ++t) {
    const auto& sigs = *tiers[t].second;
    if (sigs.empty()) continue;
    PreservationVerdict v;
    v.rule_path = tiers[t].first;
    // A tier containing the opposite gender at all is a conflict with g.
    const bool conflicting = has_signal(sigs, fidelity::opposite(g));
    v.state = conflicting ? PreservationState::wrong_gender : PreservationState::preserved;
    const Gender decided = conflicting ? fidelity::opposite(g) : g;
    for (std::size_t u = t + 1; u < tiers.size(); ++u)
      if (has_signal(*tiers[u].second, fidelity::opposite(decided))) v.conflict_resolved = true;
    return v;
  }

  if (!honorific.empty()) return {PreservationState::neutralized, RulePath::honorific};
  if (!ergative.empty()) return {PreservationState::neutralized, RulePath::ergative};

  PreservationVerdict v{PreservationState::neutralized, RulePath::default_path};
  if (oracle) {
    try {
      if (auto judged = oracle->call(cue.text, hindi_text, g)) {
        v.state = *judged;
        v.rule_path = RulePath::fallback;
        v.used_fallback = true;
        return v;
      }
    } catch (const std::exception&) {
    }
    v.oracle_failed = true;
  }
  return v;
}

std::vector<LabeledExample> read_labeled_jsonl(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ValidationError("labeled file line " + std::to_string(lineno) + ": not a JSON object");
    for (const char* f : {"source_en", "hindi", "label"})
      if (!j.contains(f) || !j[f].is_string())
        throw ValidationError("labeled file line " + std::to_string(lineno) + ": missing '" + f + "'");
    auto label = parse_state(j["label"].get<std::string>());
    if (!label) throw ValidationError("labeled file line " + std::to_string(lineno) + ": bad label");
    out.push_back({j.value("id", "row" + std::to_string(lineno)), j["source_en"], j["hindi"], *label,
                   j.value("note", "")});
  }
  return out;
}

AgreementReport agreement(std::span<const LabeledExample> examples, const EnglishLexicon& english,
                          const hindi::Lexicons& lex, FallbackOracle* oracle) {
  AgreementReport r;
  for (const auto& ex : examples) {
    const SourceCue cue = extract_source_cue(ex.source_en, english);
    const PreservationVerdict v = classify_preservation(cue, ex.hindi, lex, oracle);
    const bool ok = v.state == ex.label;
    const bool rule = v.rule_path != RulePath::default_path && v.rule_path != RulePath::fallback;
    ++r.total;
    r.agree += ok;
    r.rule_determined += rule;
    r.rule_determined_agree += rule && ok;
    auto& [agree, total] = r.per_label[ex.label];
    ++total;
    agree += ok;
    if (!ok) r.disagreements.push_back({ex.id, ex.label, v});
  }
  return r;
}

}  // namespace fidelity::cue
