#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fidelity/resources.hpp"
#include "fidelity/text.hpp"

namespace fidelity::bench {

/// The twelve benchmark categories, in reporting order.
inline constexpr std::array<std::string_view, 12> kCategories = {
    "explicit_gender",  "late_binding",   "winograd_coref", "name_profession",
    "neutral_profession", "counter_stereotype", "coreference", "multi_sentence",
    "social_role",      "temporal_aspect", "minimal_context", "name_only"};

/// Categories whose gendered rows form the mitigation target subset.
inline constexpr std::array<std::string_view, 3> kTargetCategories = {
    "explicit_gender", "late_binding", "winograd_coref"};

bool is_category(std::string_view name);
bool is_target_category(std::string_view name);

/// Slot name/value pairs in the order they occur in the template.
using SlotAssignment = std::vector<std::pair<std::string, std::string>>;

struct BenchmarkInstance {
  std::string id;  // <category>:<template-id>:<slot-hash>
  std::string category;
  std::string source_en;
  Gender gold = Gender::neutral;
  std::string template_id;
  SlotAssignment slots;

  bool is_target() const { return is_target_category(category) && is_binary(gold); }
};

struct GenerationConfig {
  /// Ordered (category, count) pairs; output follows this order.
  std::vector<std::pair<std::string, std::size_t>> counts;

  /// The standard per-category totals (37,345 rows).
  static GenerationConfig defaults();
  std::size_t total() const;
};

struct BenchmarkSet {
  std::vector<BenchmarkInstance> instances;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> counts;

  void recount();
};

/// Fills `pattern` with `slots` (`{X}` or `{A:X}` for an indefinite article).
/// The first letter of every sentence is capitalized.
std::string render_template(std::string_view pattern, const SlotAssignment& slots);

/// Deterministic synthesis: identical (config, resources, seed) produce
/// identical sets. Target categories are split exactly 50/50 male/female.
/// Throws ValidationError when a count exceeds what the templates can
/// produce without repeating a sentence within the category.
BenchmarkSet generate_benchmark(const GenerationConfig& config, const ResourceBundle& resources,
                                std::uint64_t seed);

/// Rows of the target categories with a male or female gold label, in order.
BenchmarkSet select_target_subset(const BenchmarkSet& set);

std::string to_json_line(const BenchmarkInstance& instance);
BenchmarkInstance instance_from_json_line(std::string_view line);
void write_jsonl(std::ostream& out, const BenchmarkSet& set);
BenchmarkSet read_jsonl(std::istream& in);

}  // namespace fidelity::bench
