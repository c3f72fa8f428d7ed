#include "fidelity/resources.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "fidelity/error.hpp"

namespace fidelity {
namespace {

struct Row {
  std::size_t line;
  std::vector<std::string> cols;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing resource file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Splits a TSV resource into rows, skipping blank and `#` lines. Every row
/// must have between min_cols and max_cols columns.
std::vector<Row> read_rows(const std::filesystem::path& path, const std::string& content,
                           std::size_t min_cols, std::size_t max_cols) {
  std::vector<Row> rows;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto cols = text::split(line, '\t');
    for (auto& c : cols) c = text::trim(c);
    if (cols.size() < min_cols || cols.size() > max_cols || cols[0].empty())
      throw ValidationError("malformed row in " + path.string() + " at line " +
                            std::to_string(lineno) + ": expected " + std::to_string(min_cols) +
                            (min_cols == max_cols ? "" : "-" + std::to_string(max_cols)) +
                            " tab-separated columns");
    rows.push_back({lineno, std::move(cols)});
  }
  if (rows.empty()) throw ValidationError("malformed resource " + path.string() + ": no records");
  return rows;
}

[[noreturn]] void bad_value(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  throw ValidationError("malformed row in " + path.string() + " at line " + std::to_string(line) +
                        ": " + what);
}

void expect_count(const std::string& what, std::size_t expected, std::size_t found) {
  if (expected != found)
    throw ValidationError("count mismatch for " + what + ": expected " + std::to_string(expected) +
                          ", found " + std::to_string(found));
}

Gender binary_gender(const std::filesystem::path& path, const Row& row, const std::string& s) {
  auto g = parse_gender(s);
  if (!g || !is_binary(*g)) bad_value(path, row.line, "gender must be male or female, got '" + s + "'");
  return *g;
}

const std::set<std::string> kBuiltinSlots = {"SUBJ", "OBJ",    "POSS",   "NOUN", "PROF",
                                             "PROF_COUNTER", "PAIR_A", "PAIR_B", "NAME", "ROLE"};

}  // namespace

std::string_view to_string(StereotypeClass c) {
  switch (c) {
    case StereotypeClass::male_stereotyped: return "male-stereotyped";
    case StereotypeClass::female_stereotyped: return "female-stereotyped";
    case StereotypeClass::neutral: return "neutral";
    case StereotypeClass::mixed: return "mixed";
  }
  return "neutral";
}

std::string_view to_string(GoldRule r) {
  switch (r) {
    case GoldRule::pronoun: return "pronoun";
    case GoldRule::name: return "name";
    case GoldRule::role: return "role";
    case GoldRule::neutral: return "neutral";
  }
  return "neutral";
}

std::string_view to_string(CueType t) {
  switch (t) {
    case CueType::pronoun: return "pronoun";
    case CueType::gender_word: return "gender_word";
    case CueType::name: return "name";
  }
  return "pronoun";
}

ResourcePaths ResourcePaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "professions.tsv", dir / "names.tsv",        dir / "cross_pairs.tsv",
          dir / "templates.tsv",   dir / "slots.tsv",        dir / "english_cues.tsv",
          dir / "hindi_lexicon.tsv"};
}

ResourceBundle load_resources(const ResourcePaths& paths) {
  ResourceBundle b;
  auto load = [&](const std::filesystem::path& p, std::size_t min_cols, std::size_t max_cols) {
    std::string content = read_file(p);
    b.versions[p.filename().string()] = text::digest(content);
    return read_rows(p, content, min_cols, max_cols);
  };

  for (const Row& r : load(paths.professions, 3, 3)) {
    static const std::map<std::string, StereotypeClass> classes = {
        {"male-stereotyped", StereotypeClass::male_stereotyped},
        {"female-stereotyped", StereotypeClass::female_stereotyped},
        {"neutral", StereotypeClass::neutral},
        {"mixed", StereotypeClass::mixed}};
    auto it = classes.find(r.cols[1]);
    if (it == classes.end()) bad_value(paths.professions, r.line, "unknown stereotype class '" + r.cols[1] + "'");
    b.professions.push_back({text::to_lower_ascii(r.cols[0]), it->second, r.cols[2]});
  }
  expect_count("professions", ResourceBundle::kProfessions, b.professions.size());

  for (const Row& r : load(paths.names, 3, 3))
    b.names.push_back({r.cols[0], binary_gender(paths.names, r, r.cols[1]), r.cols[2]});
  expect_count("names", ResourceBundle::kNames, b.names.size());

  std::set<std::string> known_professions;
  for (const auto& p : b.professions) known_professions.insert(p.term);
  for (const Row& r : load(paths.cross_pairs, 2, 2)) {
    CrossPair pair{text::to_lower_ascii(r.cols[0]), text::to_lower_ascii(r.cols[1])};
    if (!known_professions.contains(pair.first) || !known_professions.contains(pair.second))
      bad_value(paths.cross_pairs, r.line, "pair references an unknown profession");
    b.cross_pairs.push_back(std::move(pair));
  }
  expect_count("cross-stereotype pairs", ResourceBundle::kCrossPairs, b.cross_pairs.size());

  for (const Row& r : load(paths.slots, 2, 3)) {
    SlotValue v{r.cols[1], Gender::none};
    if (r.cols.size() == 3) {
      auto g = parse_gender(r.cols[2]);
      if (!g) bad_value(paths.slots, r.line, "unknown gender '" + r.cols[2] + "'");
      v.gender = *g;
    }
    b.slots[r.cols[0]].push_back(std::move(v));
  }

  static const std::regex placeholder(R"(\{(?:A:)?([A-Z_]+)\})");
  for (const Row& r : load(paths.templates, 4, 4)) {
    static const std::map<std::string, GoldRule> rules = {{"pronoun", GoldRule::pronoun},
                                                          {"name", GoldRule::name},
                                                          {"role", GoldRule::role},
                                                          {"neutral", GoldRule::neutral}};
    auto it = rules.find(r.cols[2]);
    if (it == rules.end()) bad_value(paths.templates, r.line, "unknown gold rule '" + r.cols[2] + "'");
    Template t{r.cols[0], r.cols[1], it->second, r.cols[3]};
    std::set<std::string> used;
    for (std::sregex_iterator m(t.pattern.begin(), t.pattern.end(), placeholder), end; m != end; ++m) {
      const std::string slot = (*m)[1];
      if (!kBuiltinSlots.contains(slot) && !b.slots.contains(slot))
        bad_value(paths.templates, r.line, "unresolvable slot {" + slot + "}");
      used.insert(slot);
    }
    const bool gendered = used.contains("SUBJ") || used.contains("OBJ") || used.contains("POSS") ||
                          used.contains("NOUN");
    if ((t.rule == GoldRule::pronoun) != gendered)
      bad_value(paths.templates, r.line, "pronoun rule requires a gendered pronoun slot and vice versa");
    if (t.rule == GoldRule::name && !used.contains("NAME"))
      bad_value(paths.templates, r.line, "name rule without {NAME}");
    if (t.rule == GoldRule::role && !used.contains("ROLE"))
      bad_value(paths.templates, r.line, "role rule without {ROLE}");
    if (used.contains("ROLE") && !b.slots.contains("ROLE"))
      bad_value(paths.templates, r.line, "no ROLE values in slots file");
    if (used.contains("PROF_COUNTER") && t.rule != GoldRule::pronoun)
      bad_value(paths.templates, r.line, "{PROF_COUNTER} needs the pronoun rule");
    b.templates.push_back(std::move(t));
  }

  for (const Row& r : load(paths.english_cues, 3, 3)) {
    CueType type;
    if (r.cols[2] == "pronoun") type = CueType::pronoun;
    else if (r.cols[2] == "gender_word") type = CueType::gender_word;
    else bad_value(paths.english_cues, r.line, "unknown cue type '" + r.cols[2] + "'");
    b.cue_words.push_back({text::to_lower_ascii(r.cols[0]), binary_gender(paths.english_cues, r, r.cols[1]), type});
  }
  return b;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("FIDELITY_DATA_DIR"); env && *env) return env;
#ifdef FIDELITY_BUILD_DATA_DIR
  if (std::filesystem::exists(FIDELITY_BUILD_DATA_DIR)) return FIDELITY_BUILD_DATA_DIR;
#endif
#ifdef FIDELITY_INSTALL_DATA_DIR
  return FIDELITY_INSTALL_DATA_DIR;
#else
  return "data";
#endif
}

LinguisticResources LinguisticResources::load(const std::filesystem::path& data_dir) {
  return load(ResourcePaths::in_directory(data_dir));
}

LinguisticResources LinguisticResources::load(const ResourcePaths& paths) {
  ResourceBundle bundle = load_resources(paths);
  hindi::Lexicons lex = hindi::Lexicons::load(paths.hindi_lexicon);
  for (const auto& n : bundle.names) lex.add_name(n.devanagari, n.gender);
  bundle.versions[paths.hindi_lexicon.filename().string()] = lex.version();
  return {std::move(bundle), std::move(lex)};
}

}  // namespace fidelity
