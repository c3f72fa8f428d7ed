#include "fidelity/benchgen.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include "fidelity/error.hpp"
#include "json.hpp"

namespace fidelity::bench {
namespace {

using json = nlohmann::ordered_json;

struct Choice {
  SlotAssignment fills;
  Gender gender = Gender::none;
};

struct Dim {
  std::string slot;
  std::vector<Choice> choices;
};

/// One template restricted to one pronoun gender (or none): a mixed-radix
/// space of slot choices.
struct Segment {
  const Template* tpl = nullptr;
  Gender gender = Gender::none;
  std::vector<Dim> dims;
  std::uint64_t size = 1;
};

struct Pool {
  std::vector<Segment> segments;
  std::uint64_t total = 0;
};

std::vector<std::string> pattern_slots(std::string_view pattern) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = pattern.find('{', pos)) != std::string_view::npos) {
    auto close = pattern.find('}', pos);
    if (close == std::string_view::npos) break;
    std::string name(pattern.substr(pos + 1, close - pos - 1));
    if (name.starts_with("A:")) name = name.substr(2);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    pos = close + 1;
  }
  return out;
}

std::string pronoun_for(const std::string& slot, Gender g) {
  const bool m = g == Gender::male;
  if (slot == "SUBJ") return m ? "he" : "she";
  if (slot == "OBJ") return m ? "him" : "her";
  if (slot == "POSS") return m ? "his" : "her";
  return m ? "man" : "woman";  // NOUN
}

Dim make_dim(const std::string& slot, Gender gender, const ResourceBundle& res) {
  Dim dim{slot, {}};
  if (slot == "PROF") {
    for (const auto& p : res.professions) dim.choices.push_back({{{"PROF", p.term}}, Gender::none});
  } else if (slot == "PROF_COUNTER") {
    const StereotypeClass against = gender == Gender::male ? StereotypeClass::female_stereotyped
                                                           : StereotypeClass::male_stereotyped;
    for (const auto& p : res.professions)
      if (p.stereotype == against) dim.choices.push_back({{{"PROF_COUNTER", p.term}}, Gender::none});
  } else if (slot == "PAIR_A") {
    for (const auto& pr : res.cross_pairs) {
      dim.choices.push_back({{{"PAIR_A", pr.first}, {"PAIR_B", pr.second}}, Gender::none});
      dim.choices.push_back({{{"PAIR_A", pr.second}, {"PAIR_B", pr.first}}, Gender::none});
    }
  } else if (slot == "NAME") {
    for (const auto& n : res.names) dim.choices.push_back({{{"NAME", n.name}}, n.gender});
  } else {
    auto it = res.slots.find(slot);
    if (it == res.slots.end()) throw ValidationError("unresolvable slot {" + slot + "}");
    for (const auto& v : it->second) dim.choices.push_back({{{slot, v.value}}, v.gender});
  }
  return dim;
}

Segment make_segment(const Template& tpl, Gender gender, const ResourceBundle& res) {
  Segment seg{&tpl, gender, {}, 1};
  for (const std::string& slot : pattern_slots(tpl.pattern)) {
    if (slot == "PAIR_B") continue;  // filled together with PAIR_A
    if (slot == "SUBJ" || slot == "OBJ" || slot == "POSS" || slot == "NOUN") {
      seg.dims.push_back({slot, {{{{slot, pronoun_for(slot, gender)}}, gender}}});
    } else {
      seg.dims.push_back(make_dim(slot, gender, res));
    }
    seg.size *= seg.dims.back().choices.size();
  }
  return seg;
}

void add_segment(Pool& pool, Segment seg) {
  pool.total += seg.size;
  if (seg.size > 0) pool.segments.push_back(std::move(seg));
}

Gender gold_for(const Segment& seg, const SlotAssignment&, const std::vector<const Choice*>& picked) {
  switch (seg.tpl->rule) {
    case GoldRule::pronoun: return seg.gender;
    case GoldRule::name:
    case GoldRule::role:
      for (std::size_t d = 0; d < seg.dims.size(); ++d) {
        const std::string& slot = seg.dims[d].slot;
        if ((seg.tpl->rule == GoldRule::name && slot == "NAME") ||
            (seg.tpl->rule == GoldRule::role && slot == "ROLE"))
          return is_binary(picked[d]->gender) ? picked[d]->gender : Gender::neutral;
      }
      return Gender::neutral;
    case GoldRule::neutral: return Gender::neutral;
  }
  return Gender::neutral;
}

BenchmarkInstance decode(const Pool& pool, std::uint64_t index, std::string_view category) {
  for (const Segment& seg : pool.segments) {
    if (index >= seg.size) {
      index -= seg.size;
      continue;
    }
    std::vector<const Choice*> picked(seg.dims.size());
    for (std::size_t d = seg.dims.size(); d-- > 0;) {
      const auto n = seg.dims[d].choices.size();
      picked[d] = &seg.dims[d].choices[index % n];
      index /= n;
    }
    SlotAssignment slots;
    for (const Choice* c : picked) slots.insert(slots.end(), c->fills.begin(), c->fills.end());

    BenchmarkInstance inst;
    inst.category = std::string(category);
    inst.template_id = seg.tpl->id;
    inst.source_en = render_template(seg.tpl->pattern, slots);
    inst.gold = gold_for(seg, slots, picked);
    std::string key = seg.tpl->id;
    for (const auto& [k, v] : slots) key += "|" + k + "=" + v;
    inst.id = inst.category + ":" + seg.tpl->id + ":" + text::digest(key);
    inst.slots = std::move(slots);
    return inst;
  }
  throw std::out_of_range("benchmark pool index out of range");
}

/// Draws `n` distinct indices from [0, total) as an affine walk with a
/// stride coprime to `total`.
std::vector<std::uint64_t> draw_indices(std::uint64_t total, std::size_t n, std::uint64_t stream_seed) {
  std::vector<std::uint64_t> out;
  if (n == 0 || total == 0) return out;
  std::mt19937_64 rng(stream_seed);
  const std::uint64_t start = rng() % total;
  std::uint64_t stride = total == 1 ? 1 : 1 + rng() % (total - 1);
  while (std::gcd(stride, total) != 1) stride = stride % total + 1;
  out.reserve(n);
  std::uint64_t cur = start;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(cur);
    cur = (cur + stride) % total;  // totals stay far below 2^63
  }
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view category, Gender g) {
  return text::mix64(seed ^ text::fnv1a64(category) ^ (static_cast<std::uint64_t>(g) << 56));
}

}  // namespace

bool is_category(std::string_view name) {
  return std::find(kCategories.begin(), kCategories.end(), name) != kCategories.end();
}

bool is_target_category(std::string_view name) {
  return std::find(kTargetCategories.begin(), kTargetCategories.end(), name) !=
         kTargetCategories.end();
}

GenerationConfig GenerationConfig::defaults() {
  return {{{"explicit_gender", 7500},
           {"late_binding", 2250},
           {"winograd_coref", 6000},
           {"name_profession", 6750},
           {"neutral_profession", 7500},
           {"counter_stereotype", 960},
           {"coreference", 550},
           {"multi_sentence", 2340},
           {"social_role", 1350},
           {"temporal_aspect", 945},
           {"minimal_context", 540},
           {"name_only", 660}}};
}

std::size_t GenerationConfig::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

void BenchmarkSet::recount() {
  counts.clear();
  for (const auto& inst : instances) ++counts[inst.category];
}

std::string render_template(std::string_view pattern, const SlotAssignment& slots) {
  auto lookup = [&](std::string_view name) -> const std::string& {
    for (const auto& [k, v] : slots)
      if (k == name) return v;
    throw ValidationError("no value for slot {" + std::string(name) + "}");
  };
  std::string out;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    auto open = pattern.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(pattern.substr(pos));
      break;
    }
    out.append(pattern.substr(pos, open - pos));
    auto close = pattern.find('}', open);
    if (close == std::string_view::npos) throw ValidationError("unterminated slot in pattern");
    std::string_view name = pattern.substr(open + 1, close - open - 1);
    if (name.starts_with("A:")) {
      const std::string& value = lookup(name.substr(2));
      const char first = value.empty() ? 'x' : static_cast<char>(std::tolower(value[0]));
      out += (std::string_view("aeiou").find(first) != std::string_view::npos) ? "an " : "a ";
      out += value;
    } else {
      out += lookup(name);
    }
    pos = close + 1;
  }
  bool sentence_start = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char c = out[i];
    if (sentence_start && std::isalpha(static_cast<unsigned char>(c))) {
      out[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      sentence_start = false;
    } else if (c == '.' || c == '?' || c == '!') {
      sentence_start = true;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      sentence_start = false;
    }
  }
  return out;
}

BenchmarkSet generate_benchmark(const GenerationConfig& config, const ResourceBundle& resources,
                                std::uint64_t seed) {
  BenchmarkSet set;
  set.seed = seed;
  std::set<std::string> seen_categories;
  for (const auto& [category, count] : config.counts) {
    if (!is_category(category)) throw ValidationError("unknown category '" + category + "'");
    if (!seen_categories.insert(category).second)
      throw ValidationError("category '" + category + "' listed twice in config");
    set.counts[category] = 0;
    if (count == 0) continue;

    Pool male, female, all;
    for (const Template& tpl : resources.templates) {
      if (tpl.category != category) continue;
      if (tpl.rule == GoldRule::pronoun) {
        add_segment(male, make_segment(tpl, Gender::male, resources));
        add_segment(female, make_segment(tpl, Gender::female, resources));
      } else {
        add_segment(all, make_segment(tpl, Gender::none, resources));
      }
    }

    std::vector<BenchmarkInstance> rows;
    if (is_target_category(category)) {
      if (!all.segments.empty())
        throw ValidationError("target category '" + category + "' has non-pronoun templates");
      const std::uint64_t max = 2 * std::min(male.total, female.total);
      if (count % 2 != 0)
        throw ValidationError("unsatisfiable count for category '" + category + "': requested " +
                              std::to_string(count) + ", but target categories need an even count for a 50/50 split");
      if (count > max)
        throw ValidationError("unsatisfiable count for category '" + category + "': requested " +
                              std::to_string(count) + ", maximum achievable balanced count is " +
                              std::to_string(max));
      auto mi = draw_indices(male.total, count / 2, stream_seed(seed, category, Gender::male));
      auto fi = draw_indices(female.total, count / 2, stream_seed(seed, category, Gender::female));
      for (std::size_t i = 0; i < count / 2; ++i) {
        rows.push_back(decode(male, mi[i], category));
        rows.push_back(decode(female, fi[i], category));
      }
    } else {
      for (Pool* p : {&male, &female})
        for (auto& seg : p->segments) add_segment(all, std::move(seg));
      if (count > all.total)
        throw ValidationError("unsatisfiable count for category '" + category + "': requested " +
                              std::to_string(count) + ", maximum achievable is " +
                              std::to_string(all.total));
      for (std::uint64_t idx : draw_indices(all.total, count, stream_seed(seed, category, Gender::none)))
        rows.push_back(decode(all, idx, category));
    }

    std::unordered_set<std::string> sentences;
    for (auto& r : rows) {
      if (!sentences.insert(r.source_en).second)
        throw ValidationError("duplicate sentence in category '" + category + "': " + r.source_en);
      set.instances.push_back(std::move(r));
    }
    set.counts[category] = count;
  }
  std::unordered_set<std::string> ids;
  for (const auto& inst : set.instances)
    if (!ids.insert(inst.id).second) throw ValidationError("id collision: " + inst.id);
  return set;
}

BenchmarkSet select_target_subset(const BenchmarkSet& set) {
  BenchmarkSet out;
  out.seed = set.seed;
  for (const auto& inst : set.instances)
    if (inst.is_target()) out.instances.push_back(inst);
  out.recount();
  return out;
}

std::string to_json_line(const BenchmarkInstance& inst) {
  json slots = json::object();
  for (const auto& [k, v] : inst.slots) slots[k] = v;
  json j = {{"id", inst.id},
            {"category", inst.category},
            {"source_en", inst.source_en},
            {"gold", to_string(inst.gold)},
            {"meta", {{"template", inst.template_id}, {"slots", slots}}}};
  return j.dump();
}

BenchmarkInstance instance_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("benchmark row is not valid JSON: ") + e.what());
  }
  for (const char* field : {"id", "category", "source_en", "gold"})
    if (!j.contains(field) || !j[field].is_string())
      throw ValidationError(std::string("benchmark row missing string field '") + field + "'");
  BenchmarkInstance inst;
  inst.id = j["id"];
  inst.category = j["category"];
  inst.source_en = j["source_en"];
  auto g = parse_gender(j["gold"].get<std::string>());
  if (!g || *g == Gender::none) throw ValidationError("bad gold label in row " + inst.id);
  inst.gold = *g;
  if (!is_category(inst.category)) throw ValidationError("unknown category in row " + inst.id);
  if (j.contains("meta")) {
    const json& meta = j["meta"];
    if (meta.contains("template")) inst.template_id = meta["template"].get<std::string>();
    if (meta.contains("slots"))
      for (const auto& [k, v] : meta["slots"].items()) inst.slots.emplace_back(k, v.get<std::string>());
  }
  return inst;
}

void write_jsonl(std::ostream& out, const BenchmarkSet& set) {
  for (const auto& inst : set.instances) out << to_json_line(inst) << '\n';
}

BenchmarkSet read_jsonl(std::istream& in) {
  BenchmarkSet set;
  std::string line;
  std::size_t lineno = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      set.instances.push_back(instance_from_json_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(set.instances.back().id).second)
      throw ValidationError("duplicate id at line " + std::to_string(lineno) + ": " +
                            set.instances.back().id);
  }
  set.recount();
  return set;
}

}  // namespace fidelity::bench
