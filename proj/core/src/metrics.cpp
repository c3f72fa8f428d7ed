#include "fidelity/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "fidelity/error.hpp"
#include "json.hpp"

namespace fidelity::metrics {

using nlohmann::ordered_json;

bool is_correct(const bench::BenchmarkInstance& instance, cue::PreservationState state) {
  if (instance.is_target()) return state == cue::PreservationState::preserved;
  return state != cue::PreservationState::wrong_gender;
}

const Tally* CategoryAccuracy::category(std::string_view name) const {
  for (const auto& [cat, t] : per_category)
    if (cat == name) return &t;
  return nullptr;
}

namespace {

std::unordered_map<std::string, const pipeline::Record*> index_outputs(std::span<const pipeline::Record> outputs,
                                                                       const bench::BenchmarkSet& benchmark) {
  std::unordered_set<std::string> known;
  for (const auto& inst : benchmark.instances) known.insert(inst.id);
  std::unordered_map<std::string, const pipeline::Record*> by_id;
  for (const auto& r : outputs) {
    if (!known.count(r.id)) throw ValidationError(fmt::format("output id {} is not in the benchmark", r.id));
    if (!by_id.emplace(r.id, &r).second) throw ValidationError(fmt::format("duplicate output id {}", r.id));
  }
  return by_id;
}

}  // namespace

double ergative_rate(std::span<const std::string> texts, const hindi::Lexicons& lex) {
  if (texts.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : texts)
    if (!hindi::detect_ergative(hindi::tokenize(t), lex).empty()) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(texts.size());
}

CategoryAccuracy score_outputs(std::span<const pipeline::Record> outputs, const bench::BenchmarkSet& benchmark,
                               const hindi::Lexicons& lex) {
  if (outputs.empty()) throw ValidationError("no outputs to score");
  const auto by_id = index_outputs(outputs, benchmark);

  CategoryAccuracy acc;
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> target_texts;
  for (const auto& inst : benchmark.instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end()) {
      ++acc.missing;
      continue;
    }
    auto [pos, fresh] = slot.emplace(inst.category, acc.per_category.size());
    if (fresh) acc.per_category.emplace_back(inst.category, Tally{});
    const auto state = it->second->verdict.state;
    const bool ok = is_correct(inst, state);
    auto& t = acc.per_category[pos->second].second;
    ++t.total;
    ++acc.full.total;
    if (ok) {
      ++t.correct;
      ++acc.full.correct;
    }
    if (inst.is_target()) {
      ++acc.target.total;
      if (ok) ++acc.target.correct;
      ++acc.target_states[state];
      target_texts.push_back(it->second->chosen_text);
    }
  }
  acc.ergative_rate = ergative_rate(target_texts, lex);
  return acc;
}

PairedOutcome paired_outcome(std::span<const pipeline::Record> first, std::span<const pipeline::Record> second,
                             const bench::BenchmarkSet& benchmark) {
  const auto a = index_outputs(first, benchmark);
  const auto b = index_outputs(second, benchmark);
  PairedOutcome out;
  for (const auto& inst : benchmark.instances) {
    if (!inst.is_target()) continue;
    auto ia = a.find(inst.id);
    auto ib = b.find(inst.id);
    if (ia == a.end() || ib == b.end()) continue;
    const bool ok_a = is_correct(inst, ia->second->verdict.state);
    const bool ok_b = is_correct(inst, ib->second->verdict.state);
    ++out.n;
    if (ok_a && ok_b) ++out.both_correct;
    else if (!ok_a && !ok_b) ++out.both_wrong;
    else if (ok_a) ++out.b;
    else ++out.c;
    out.diffs.push_back(static_cast<double>(ok_a) - static_cast<double>(ok_b));
  }
  if (out.n == 0) throw ValidationError("the two systems share no target-subset ids");
  return out;
}

PairedReport paired_report(std::string first, std::string second, std::span<const pipeline::Record> a,
                           std::span<const pipeline::Record> b, const bench::BenchmarkSet& benchmark,
                           std::size_t resamples, std::uint64_t seed, std::size_t jobs) {
  PairedReport r;
  r.first = std::move(first);
  r.second = std::move(second);
  r.outcome = paired_outcome(a, b, benchmark);
  r.mcnemar = stats::mcnemar(r.outcome.b, r.outcome.c);
  auto ci = stats::bootstrap_ci(r.outcome.diffs, resamples, 0.95, seed, jobs);
  r.delta_ci = {ci.estimate * 100, ci.lo * 100, ci.hi * 100};
  return r;
}

std::vector<AblationRow> ablation_table(std::span<const std::pair<std::pair<bool, bool>, CategoryAccuracy>> runs) {
  std::vector<AblationRow> rows;
  for (const auto& [cfg, acc] : runs) {
    AblationRow row;
    row.lexicalize = cfg.first;
    row.phenomenon_prompts = cfg.second;
    auto pct = [&](std::string_view c) {
      const auto* t = acc.category(c);
      return t ? t->percent() : 0.0;
    };
    row.explicit_gender = pct("explicit_gender");
    row.late_binding = pct("late_binding");
    row.winograd_coref = pct("winograd_coref");
    row.target = acc.target.percent();
    rows.push_back(row);
  }
  auto rank = [](const AblationRow& r) { return (r.phenomenon_prompts ? 2 : 0) + (r.lexicalize ? 1 : 0); };
  std::sort(rows.begin(), rows.end(), [&](const auto& x, const auto& y) { return rank(x) < rank(y); });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rank(rows[i]) == rank(rows[i - 1])) throw ValidationError("ablation has a duplicate configuration");
  return rows;
}

AblationChecks check_ablation(std::span<const AblationRow> rows) {
  const AblationRow *none = nullptr, *lex = nullptr, *phen = nullptr, *both = nullptr;
  for (const auto& r : rows) {
    if (!r.lexicalize && !r.phenomenon_prompts) none = &r;
    if (r.lexicalize && !r.phenomenon_prompts) lex = &r;
    if (!r.lexicalize && r.phenomenon_prompts) phen = &r;
    if (r.lexicalize && r.phenomenon_prompts) both = &r;
  }
  if (!none || !lex || !phen || !both) throw ValidationError("ablation needs all four configurations");
  AblationChecks c;
  c.lexical_helps_explicit =
      lex->explicit_gender > phen->explicit_gender && lex->explicit_gender > none->explicit_gender;
  c.phenomenon_helps_late_binding = phen->late_binding > lex->late_binding;
  c.combined_best_target =
      both->target > none->target && both->target > lex->target && both->target > phen->target;
  return c;
}

std::vector<FrontierPoint> frontier_report(std::span<const SystemHumanScores> systems) {
  std::vector<FrontierPoint> out{{"baseline", 0.0, 0.0}};
  for (const auto& s : systems)
    out.push_back({s.system, s.system_preservation_pct - s.baseline_preservation_pct,
                   s.system_fluency - s.baseline_fluency});
  return out;
}

std::optional<Format> parse_format(std::string_view s) {
  if (s == "md" || s == "markdown") return Format::markdown;
  if (s == "json") return Format::json;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string yes_no(bool b) { return b ? "Yes" : "No"; }
double round_to(double v, int places) {
  const double f = std::pow(10.0, places);
  return std::round(v * f) / f;
}

}  // namespace

std::string render(const CategoryAccuracy& acc, Format f) {
  if (f == Format::json) {
    ordered_json j;
    auto cats = ordered_json::array();
    for (const auto& [cat, t] : acc.per_category)
      cats.push_back({{"category", cat}, {"correct", t.correct}, {"total", t.total}, {"accuracy", round_to(t.percent(), 4)}});
    j["categories"] = std::move(cats);
    j["target"] = {{"correct", acc.target.correct}, {"total", acc.target.total}, {"accuracy", round_to(acc.target.percent(), 4)}};
    j["full"] = {{"correct", acc.full.correct}, {"total", acc.full.total}, {"accuracy", round_to(acc.full.percent(), 4)}};
    ordered_json states;
    for (const auto& [s, n] : acc.target_states) states[std::string(cue::to_string(s))] = n;
    j["target_states"] = std::move(states);
    j["ergative_rate"] = round_to(acc.ergative_rate, 4);
    j["missing"] = acc.missing;
    return j.dump(2) + "\n";
  }
  std::string out = "| Category | Correct | Total | Accuracy (%) |\n|---|---:|---:|---:|\n";
  for (const auto& [cat, t] : acc.per_category)
    out += fmt::format("| {} | {} | {} | {:.1f} |\n", cat, t.correct, t.total, t.percent());
  out += fmt::format("| **target subset** | {} | {} | {:.1f} |\n", acc.target.correct, acc.target.total,
                     acc.target.percent());
  out += fmt::format("| **full benchmark** | {} | {} | {:.1f} |\n", acc.full.correct, acc.full.total,
                     acc.full.percent());
  out += fmt::format("\nErgative rate on target outputs: {:.1f}%\n", acc.ergative_rate);
  if (acc.missing) out += fmt::format("Benchmark rows without an output: {}\n", acc.missing);
  return out;
}

std::string render(const PairedReport& r, Format f) {
  const auto& o = r.outcome;
  const auto& m = r.mcnemar;
  if (f == Format::json) {
    ordered_json j;
    j["first"] = r.first;
    j["second"] = r.second;
    j["n"] = o.n;
    j["both_correct"] = o.both_correct;
    j["both_wrong"] = o.both_wrong;
    j["b"] = o.b;
    j["c"] = o.c;
    j["chi2_cc"] = m.chi2_cc;
    j["p_chi2"] = m.p_chi2;
    j["log10_p_chi2"] = m.log10_p_chi2;
    j["p_exact"] = m.p_exact;
    j["log10_p_exact"] = m.log10_p_exact;
    j["delta_pp"] = {{"estimate", r.delta_ci.estimate}, {"lo", r.delta_ci.lo}, {"hi", r.delta_ci.hi}};
    return j.dump(2) + "\n";
  }
  std::string out = fmt::format("Paired comparison: {} vs {} on {} target items\n\n", r.first, r.second, o.n);
  out += fmt::format("| | {} correct | {} wrong |\n|---|---:|---:|\n", r.second, r.second);
  out += fmt::format("| **{} correct** | {} | {} |\n", r.first, o.both_correct, o.b);
  out += fmt::format("| **{} wrong** | {} | {} |\n\n", r.first, o.c, o.both_wrong);
  out += fmt::format("McNemar chi2 (continuity-corrected) = {:.1f}, p = {:.3g} (log10 p = {:.1f})\n", m.chi2_cc,
                     m.p_chi2, m.log10_p_chi2);
  out += fmt::format("Exact binomial p = {:.3g} (log10 p = {:.1f})\n", m.p_exact, m.log10_p_exact);
  out += fmt::format("Accuracy difference (pp, 95% bootstrap CI): {}\n", stats::format_ci(r.delta_ci));
  return out;
}

std::string render(std::span<const AblationRow> rows, Format f) {
  if (f == Format::json) {
    auto j = ordered_json::array();
    for (const auto& r : rows)
      j.push_back({{"lexicalize", r.lexicalize},
                   {"phenomenon_prompts", r.phenomenon_prompts},
                   {"explicit_gender", round_to(r.explicit_gender, 4)},
                   {"late_binding", round_to(r.late_binding, 4)},
                   {"winograd_coref", round_to(r.winograd_coref, 4)},
                   {"target", round_to(r.target, 4)}});
    return j.dump(2) + "\n";
  }
  std::string out =
      "| Lexicalize | Phenomenon prompts | explicit_gender | late_binding | winograd_coref | Target |\n"
      "|---|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows)
    out += fmt::format("| {} | {} | {:.1f} | {:.1f} | {:.1f} | {:.1f} |\n", yes_no(r.lexicalize),
                       yes_no(r.phenomenon_prompts), r.explicit_gender, r.late_binding, r.winograd_coref, r.target);
  return out;
}

std::string render(std::span<const FrontierPoint> points, Format f) {
  if (f == Format::json) {
    auto j = ordered_json::array();
    for (const auto& p : points)
      j.push_back({{"system", p.system},
                   {"delta_preservation_pp", round_to(p.delta_preservation_pp, 1)},
                   {"delta_fluency", round_to(p.delta_fluency, 2)}});
    return j.dump(2) + "\n";
  }
  std::string out = "| System | Δ preservation (pp) | Δ fluency |\n|---|---:|---:|\n";
  for (const auto& p : points)
    out += fmt::format("| {} | {:+.1f} | {:+.2f} |\n", p.system, p.delta_preservation_pp, p.delta_fluency);
  return out;
}

}  // namespace fidelity::metrics
