#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fidelity/hindi_text.hpp"
#include "fidelity/text.hpp"

namespace fidelity {

enum class StereotypeClass { male_stereotyped, female_stereotyped, neutral, mixed };
std::string_view to_string(StereotypeClass c);

struct Profession {
  std::string term;
  StereotypeClass stereotype;
  std::string hindi;
};

struct PersonName {
  std::string name;
  Gender gender;
  std::string devanagari;
};

struct CrossPair {
  std::string first;
  std::string second;
};

/// How a template's gold label is derived from the slots it was filled with.
enum class GoldRule { pronoun, name, role, neutral };
std::string_view to_string(GoldRule r);

struct Template {
  std::string id;
  std::string category;
  GoldRule rule;
  std::string pattern;
};

struct SlotValue {
  std::string value;
  Gender gender = Gender::none;
};

enum class CueType { pronoun, gender_word, name };
std::string_view to_string(CueType t);

struct CueWord {
  std::string word;  // lower case
  Gender gender;
  CueType type;
};

struct ResourceBundle {
  static constexpr std::size_t kProfessions = 45;
  static constexpr std::size_t kNames = 30;
  static constexpr std::size_t kCrossPairs = 50;

  std::vector<Profession> professions;
  std::vector<PersonName> names;
  std::vector<CrossPair> cross_pairs;
  std::vector<Template> templates;
  std::map<std::string, std::vector<SlotValue>> slots;
  std::vector<CueWord> cue_words;
  /// Per-file content digests, keyed by file name.
  std::map<std::string, std::string> versions;
};

struct ResourcePaths {
  std::filesystem::path professions;
  std::filesystem::path names;
  std::filesystem::path cross_pairs;
  std::filesystem::path templates;
  std::filesystem::path slots;
  std::filesystem::path english_cues;
  std::filesystem::path hindi_lexicon;

  static ResourcePaths in_directory(const std::filesystem::path& dir);
};

/// Loads and validates the English-side resources. Throws ValidationError on a
/// missing file, a malformed row (with its line number), or a count mismatch.
ResourceBundle load_resources(const ResourcePaths& paths);

/// `$FIDELITY_DATA_DIR`, else the source-tree data directory, else the
/// installed one.
std::filesystem::path default_data_dir();

/// Everything the analyzers need: the bundle plus the Hindi lexicons with the
/// bundle's Devanagari names registered.
struct LinguisticResources {
  ResourceBundle bundle;
  hindi::Lexicons lexicons;

  static LinguisticResources load(const std::filesystem::path& data_dir);
  static LinguisticResources load(const ResourcePaths& paths);
};

}  // namespace fidelity
