#include "fidelity/humaneval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fidelity/error.hpp"
#include "fidelity/text.hpp"
#include "json.hpp"

namespace fidelity::humaneval {

using nlohmann::ordered_json;

std::vector<std::string> stratified_sample(const bench::BenchmarkSet& target, std::size_t per_category,
                                           std::uint64_t seed) {
  std::vector<std::string> out;
  for (const auto cat : bench::kTargetCategories) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < target.instances.size(); ++i)
      if (target.instances[i].category == cat) rows.push_back(i);
    if (per_category > rows.size())
      throw ValidationError(fmt::format("cannot sample {} items from category {}: only {} available", per_category,
                                        cat, rows.size()));
    std::mt19937_64 rng(text::mix64(seed ^ text::fnv1a64(cat)));
    // Partial Fisher-Yates: the first per_category slots become the sample.
    for (std::size_t i = 0; i < per_category; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (rows.size() - i));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(per_category);
    std::sort(rows.begin(), rows.end());
    for (auto r : rows) out.push_back(target.instances[r].id);
  }
  return out;
}

bool a_is_baseline(std::string_view item_id, std::string_view annotator_id, std::uint64_t seed, std::uint64_t salt) {
  const std::uint64_t h =
      text::fnv1a64(item_id) ^ text::mix64(text::fnv1a64(annotator_id)) ^ text::mix64(seed + salt);
  return (text::mix64(h) & 1) == 1;
}

const EvalItem* Study::find(std::string_view item_id) const {
  for (const auto& it : items)
    if (it.item_id == item_id) return &it;
  return nullptr;
}

bool Study::has_annotator(std::string_view id) const {
  return std::find(annotators.begin(), annotators.end(), id) != annotators.end();
}

bool Study::a_is_baseline(std::string_view item_id, std::string_view annotator_id) const {
  return humaneval::a_is_baseline(item_id, annotator_id, seed, salt);
}

double Study::baseline_first_fraction(std::string_view annotator_id) const {
  if (items.empty()) return 0.5;
  std::size_t n = 0;
  for (const auto& it : items) n += a_is_baseline(it.item_id, annotator_id) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(items.size());
}

void Study::balance(double lo, double hi) {
  const std::uint64_t start = salt;
  for (std::uint64_t s = start; s < start + 10000; ++s) {
    salt = s;
    bool ok = true;
    for (const auto& a : annotators) {
      const double f = baseline_first_fraction(a);
      if (f < lo || f > hi) {
        ok = false;
        break;
      }
    }
    if (ok) {
      if (s != start) spdlog::info("A/B assignment re-salted to {} to keep baseline-first within [{}, {}]", s, lo, hi);
      return;
    }
  }
  throw ValidationError("could not balance the A/B assignment");
}

std::string Study::to_json() const {
  ordered_json j;
  j["system"] = system;
  j["seed"] = seed;
  j["salt"] = salt;
  j["annotators"] = annotators;
  auto arr = ordered_json::array();
  for (const auto& it : items)
    arr.push_back({{"item_id", it.item_id},
                   {"instance_id", it.instance_id},
                   {"category", it.category},
                   {"source_en", it.source_en},
                   {"baseline_text", it.baseline_text},
                   {"system_text", it.system_text}});
  j["items"] = std::move(arr);
  return j.dump(2) + "\n";
}

Study Study::from_json(std::string_view data) {
  try {
    const auto j = ordered_json::parse(data);
    Study s;
    s.system = j.value("system", "par");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.salt = j.value("salt", std::uint64_t{0});
    s.annotators = j.at("annotators").get<std::vector<std::string>>();
    std::unordered_set<std::string> ids;
    for (const auto& e : j.at("items")) {
      EvalItem it{e.at("item_id").get<std::string>(),  e.value("instance_id", ""),
                  e.value("category", ""),             e.at("source_en").get<std::string>(),
                  e.at("baseline_text").get<std::string>(), e.at("system_text").get<std::string>()};
      if (!ids.insert(it.item_id).second) throw ValidationError("duplicate study item " + it.item_id);
      s.items.push_back(std::move(it));
    }
    if (s.annotators.empty()) throw ValidationError("study lists no annotators");
    return s;
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("malformed study file: {}", e.what()));
  }
}

void Study::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json();
}

Study Study::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open study file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Study build_study(const bench::BenchmarkSet& benchmark, std::span<const std::string> ids,
                  const std::unordered_map<std::string, std::string>& baseline_texts,
                  const std::unordered_map<std::string, std::string>& system_texts, const StudyInputs& inputs) {
  if (inputs.annotators.empty()) throw ValidationError("a study needs at least one annotator");
  if (inputs.system.empty() || inputs.system == "baseline")
    throw ValidationError("the compared system needs a name other than 'baseline'");
  std::unordered_map<std::string, const bench::BenchmarkInstance*> by_id;
  for (const auto& inst : benchmark.instances) by_id.emplace(inst.id, &inst);

  Study s;
  s.system = inputs.system;
  s.seed = inputs.seed;
  s.annotators = inputs.annotators;
  for (const auto& id : ids) {
    auto inst = by_id.find(id);
    if (inst == by_id.end()) throw ValidationError("sampled id not in benchmark: " + id);
    auto b = baseline_texts.find(id);
    auto p = system_texts.find(id);
    if (b == baseline_texts.end()) throw ValidationError("no baseline output for " + id);
    if (p == system_texts.end()) throw ValidationError(fmt::format("no {} output for {}", inputs.system, id));
    s.items.push_back({fmt::format("item-{:03}", s.items.size() + 1), id, inst->second->category,
                       inst->second->source_en, b->second, p->second});
  }
  s.balance();
  return s;
}

BlindView blind_pair(const Study& study, const EvalItem& item, std::string_view annotator_id) {
  const bool base_first = study.a_is_baseline(item.item_id, annotator_id);
  return {item.item_id, item.source_en, base_first ? item.baseline_text : item.system_text,
          base_first ? item.system_text : item.baseline_text};
}

// ---------------------------------------------------------------------------
// Judgments

std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::a: return "A";
    case Preference::b: return "B";
    case Preference::tie: return "tie";
  }
  return "?";
}

std::optional<Preference> parse_preference(std::string_view s) {
  if (s == "A" || s == "a") return Preference::a;
  if (s == "B" || s == "b") return Preference::b;
  if (s == "tie") return Preference::tie;
  return std::nullopt;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

void Judgment::validate() const {
  if (item_id.empty()) throw ValidationError("judgment: item_id is required");
  if (annotator_id.empty()) throw ValidationError("judgment: annotator_id is required");
  for (int f : {fluency_a, fluency_b})
    if (f < kFluencyMin || f > kFluencyMax)
      throw ValidationError(fmt::format("judgment: fluency {} outside {}..{}", f, kFluencyMin, kFluencyMax));
}

std::string Judgment::to_json() const {
  ordered_json j;
  j["item_id"] = item_id;
  j["annotator_id"] = annotator_id;
  j["preserved_a"] = preserved_a;
  j["preserved_b"] = preserved_b;
  j["fluency_a"] = fluency_a;
  j["fluency_b"] = fluency_b;
  j["preference"] = to_string(preference);
  j["timestamp"] = timestamp;
  return j.dump();
}

Judgment Judgment::from_json(std::string_view data) {
  ordered_json j;
  try {
    j = ordered_json::parse(data);
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("judgment is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ValidationError("judgment must be a JSON object");
  auto need = [&](const char* key) -> const ordered_json& {
    if (!j.contains(key)) throw ValidationError(fmt::format("judgment: missing field {}", key));
    return j[key];
  };
  Judgment out;
  try {
    out.item_id = need("item_id").get<std::string>();
    out.annotator_id = need("annotator_id").get<std::string>();
    out.preserved_a = need("preserved_a").get<bool>();
    out.preserved_b = need("preserved_b").get<bool>();
    const auto& fa = need("fluency_a");
    const auto& fb = need("fluency_b");
    if (!fa.is_number_integer() || !fb.is_number_integer())
      throw ValidationError("judgment: fluency must be an integer");
    out.fluency_a = fa.get<int>();
    out.fluency_b = fb.get<int>();
    const auto pref = need("preference").get<std::string>();
    auto p = parse_preference(pref);
    if (!p) throw ValidationError(fmt::format("judgment: preference must be A, B or tie, got '{}'", pref));
    out.preference = *p;
    out.timestamp = j.value("timestamp", "");
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("judgment: mistyped field: {}", e.what()));
  }
  if (out.timestamp.empty()) out.timestamp = utc_timestamp();
  out.validate();
  return out;
}

std::string JudgmentStore::key(std::string_view item, std::string_view annotator) {
  std::string k{item};
  k += '\x1f';
  k += annotator;
  return k;
}

JudgmentStore::JudgmentStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  auto existing = std::make_shared<std::vector<Judgment>>();
  for (auto& j : read_judgments(*path_)) {
    if (!keys_.insert(key(j.item_id, j.annotator_id)).second) {
      spdlog::warn("{}: ignoring later duplicate judgment for {} / {}", path_->string(), j.item_id, j.annotator_id);
      continue;
    }
    existing->push_back(std::move(j));
  }
  data_ = std::move(existing);
}

void JudgmentStore::record(const Judgment& j) {
  j.validate();
  std::lock_guard lock(write_mutex_);
  const auto k = key(j.item_id, j.annotator_id);
  if (keys_.count(k))
    throw ConflictError(fmt::format("judgment for item {} by {} already recorded", j.item_id, j.annotator_id));
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw ValidationError("cannot append to " + path_->string());
    out << j.to_json() << '\n';
    out.flush();
    if (!out) throw ValidationError("write failed for " + path_->string());
  }
  keys_.insert(k);
  auto next = std::make_shared<std::vector<Judgment>>(*std::atomic_load(&data_));
  next->push_back(j);
  std::atomic_store(&data_, std::shared_ptr<const std::vector<Judgment>>(std::move(next)));
}

std::shared_ptr<const std::vector<Judgment>> JudgmentStore::snapshot() const { return std::atomic_load(&data_); }

bool JudgmentStore::has(std::string_view item_id, std::string_view annotator_id) const {
  const auto snap = snapshot();
  return std::any_of(snap->begin(), snap->end(),
                     [&](const Judgment& j) { return j.item_id == item_id && j.annotator_id == annotator_id; });
}

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open judgments file " + path.string());
  std::vector<Judgment> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Judgment::from_json(line));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

void add(SystemTotals& t, bool preserved, int fluency, bool preferred) {
  ++t.n;
  t.preserved += preserved ? 1 : 0;
  t.fluency_sum += static_cast<std::size_t>(fluency);
  t.preferred += preferred ? 1 : 0;
}

}  // namespace

bool study_complete(const Study& study, std::span<const Judgment> judgments) {
  std::unordered_set<std::string> seen;
  for (const auto& j : judgments) seen.insert(j.item_id + '\x1f' + j.annotator_id);
  for (const auto& it : study.items)
    for (const auto& a : study.annotators)
      if (!seen.count(it.item_id + '\x1f' + a)) return false;
  return true;
}

HumanEvalSummary aggregate(const Study& study, std::span<const Judgment> judgments, std::size_t resamples,
                           std::uint64_t seed) {
  HumanEvalSummary s;
  s.system = study.system;
  s.items = study.items.size();
  s.complete = study_complete(study, judgments);

  std::map<std::string, std::size_t> cat_slot;
  for (const auto cat : bench::kTargetCategories) {
    cat_slot.emplace(std::string(cat), s.per_category.size());
    s.per_category.push_back({std::string(cat), {}, {}});
  }
  std::map<std::string, std::size_t> ann_slot;
  for (const auto& a : study.annotators) {
    ann_slot.emplace(a, s.per_annotator.size());
    s.per_annotator.push_back({a, {}, {}});
  }

  std::vector<double> bp, sp, bf, sf;
  std::unordered_set<std::string> seen;
  for (const auto& j : judgments) {
    const auto* item = study.find(j.item_id);
    if (!item) throw ValidationError("judgment references unknown item " + j.item_id);
    if (!study.has_annotator(j.annotator_id)) throw ValidationError("judgment from unknown annotator " + j.annotator_id);
    if (!seen.insert(j.item_id + '\x1f' + j.annotator_id).second)
      throw ValidationError(fmt::format("duplicate judgment for {} by {}", j.item_id, j.annotator_id));
    j.validate();

    const bool base_first = study.a_is_baseline(j.item_id, j.annotator_id);
    const bool b_pres = base_first ? j.preserved_a : j.preserved_b;
    const bool s_pres = base_first ? j.preserved_b : j.preserved_a;
    const int b_flu = base_first ? j.fluency_a : j.fluency_b;
    const int s_flu = base_first ? j.fluency_b : j.fluency_a;
    const bool tie = j.preference == Preference::tie;
    const bool a_pref = j.preference == Preference::a;
    const bool b_wins = !tie && (a_pref == base_first);
    const bool s_wins = !tie && !b_wins;

    ++s.judgments;
    if (tie) ++s.ties;
    add(s.baseline, b_pres, b_flu, b_wins);
    add(s.sys, s_pres, s_flu, s_wins);
    auto cat = cat_slot.find(item->category);
    if (cat == cat_slot.end()) {
      cat = cat_slot.emplace(item->category, s.per_category.size()).first;
      s.per_category.push_back({item->category, {}, {}});
    }
    add(s.per_category[cat->second].baseline, b_pres, b_flu, b_wins);
    add(s.per_category[cat->second].system, s_pres, s_flu, s_wins);
    auto& ann = s.per_annotator[ann_slot.at(j.annotator_id)];
    add(ann.baseline, b_pres, b_flu, b_wins);
    add(ann.system, s_pres, s_flu, s_wins);

    bp.push_back(b_pres ? 1.0 : 0.0);
    sp.push_back(s_pres ? 1.0 : 0.0);
    bf.push_back(b_flu);
    sf.push_back(s_flu);
  }
  std::erase_if(s.per_category, [](const CategoryRow& r) { return r.baseline.n == 0; });

  const std::size_t decided = s.baseline.preferred + s.sys.preferred;
  if (decided > 0) s.non_tie_rate = 100.0 * static_cast<double>(s.sys.preferred) / static_cast<double>(decided);

  if (!bp.empty() && resamples > 0) {
    auto scaled = [](stats::Interval i) { return stats::Interval{i.estimate * 100, i.lo * 100, i.hi * 100}; };
    s.baseline_preservation_ci = scaled(stats::bootstrap_ci(bp, resamples, 0.95, seed));
    s.system_preservation_ci = scaled(stats::bootstrap_ci(sp, resamples, 0.95, seed + 1));
    s.baseline_fluency_ci = stats::bootstrap_ci(bf, resamples, 0.95, seed + 2);
    s.system_fluency_ci = stats::bootstrap_ci(sf, resamples, 0.95, seed + 3);
  }
  return s;
}

metrics::SystemHumanScores to_scores(const HumanEvalSummary& s) {
  return {s.system, s.baseline.preservation_pct(), s.sys.preservation_pct(), s.baseline.mean_fluency(),
          s.sys.mean_fluency()};
}

namespace {

ordered_json totals_json(const SystemTotals& t) {
  return {{"n", t.n},
          {"preserved", t.preserved},
          {"preservation_pct", t.preservation_pct()},
          {"fluency_sum", t.fluency_sum},
          {"mean_fluency", t.mean_fluency()},
          {"preferred", t.preferred},
          {"preference_pct", t.preference_pct()}};
}

ordered_json ci_json(const stats::Interval& i) { return {{"estimate", i.estimate}, {"lo", i.lo}, {"hi", i.hi}}; }

}  // namespace

std::string summary_json(const HumanEvalSummary& s) {
  ordered_json j;
  j["system"] = s.system;
  j["items"] = s.items;
  j["judgments"] = s.judgments;
  j["complete"] = s.complete;
  j["baseline"] = totals_json(s.baseline);
  j[s.system] = totals_json(s.sys);
  j["ties"] = s.ties;
  j["non_tie_rate"] = s.non_tie_rate ? ordered_json(*s.non_tie_rate) : ordered_json(nullptr);
  auto cats = ordered_json::array();
  for (const auto& c : s.per_category)
    cats.push_back({{"category", c.category}, {"baseline", totals_json(c.baseline)}, {s.system, totals_json(c.system)}});
  j["per_category"] = std::move(cats);
  auto anns = ordered_json::array();
  for (const auto& a : s.per_annotator)
    anns.push_back({{"annotator", a.annotator}, {"baseline", totals_json(a.baseline)}, {s.system, totals_json(a.system)}});
  j["per_annotator"] = std::move(anns);
  j["ci"] = {{"baseline_preservation_pct", ci_json(s.baseline_preservation_ci)},
             {"system_preservation_pct", ci_json(s.system_preservation_ci)},
             {"baseline_fluency", ci_json(s.baseline_fluency_ci)},
             {"system_fluency", ci_json(s.system_fluency_ci)}};
  return j.dump(2) + "\n";
}

std::string render(const HumanEvalSummary& s, metrics::Format f) {
  if (f == metrics::Format::json) return summary_json(s);
  std::string out = fmt::format("Human evaluation: baseline vs {} ({} judgments over {} items{})\n\n", s.system,
                                s.judgments, s.items, s.complete ? "" : ", incomplete");
  out += "| System | Preservation (%) | Mean fluency | Preferred |\n|---|---:|---:|---:|\n";
  out += fmt::format("| baseline | {} | {} | {} ({:.1f}%) |\n", stats::format_ci(s.baseline_preservation_ci),
                     stats::format_ci(s.baseline_fluency_ci, 1.0, 2), s.baseline.preferred,
                     s.baseline.preference_pct());
  out += fmt::format("| {} | {} | {} | {} ({:.1f}%) |\n", s.system, stats::format_ci(s.system_preservation_ci),
                     stats::format_ci(s.system_fluency_ci, 1.0, 2), s.sys.preferred, s.sys.preference_pct());
  out += fmt::format("\nTies: {}. Non-tie preference for {}: {}\n\n", s.ties, s.system,
                     s.non_tie_rate ? fmt::format("{:.1f}%", *s.non_tie_rate) : std::string("n/a"));
  out += fmt::format("| Category | Pres. {} | Pres. baseline | Flu. {} | Flu. baseline |\n|---|---:|---:|---:|---:|\n",
                     s.system, s.system);
  for (const auto& c : s.per_category)
    out += fmt::format("| {} | {:.1f} | {:.1f} | {:.2f} | {:.2f} |\n", c.category, c.system.preservation_pct(),
                       c.baseline.preservation_pct(), c.system.mean_fluency(), c.baseline.mean_fluency());
  return out;
}

}  // namespace fidelity::humaneval
