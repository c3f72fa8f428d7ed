// One PASS/FAIL line per primary criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fidelity/benchgen.hpp"
#include "fidelity/cue_analysis.hpp"
#include "fidelity/humaneval.hpp"
#include "fidelity/metrics.hpp"
#include "fidelity/pipeline.hpp"
#include "fidelity/rerank.hpp"
#include "fidelity/stats.hpp"
#include "fidelity/text.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace fidelity;
namespace t = fidelity::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome benchmark_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto set = bench::generate_benchmark(bench::GenerationConfig::defaults(), t::resources().bundle, 0);
  const auto target = bench::select_target_subset(set);
  const double secs = seconds_since(t0);

  const std::map<std::string, std::size_t> table = {
      {"explicit_gender", 7500},  {"late_binding", 2250},    {"winograd_coref", 6000}, {"name_profession", 6750},
      {"neutral_profession", 7500}, {"counter_stereotype", 960}, {"coreference", 550},     {"multi_sentence", 2340},
      {"social_role", 1350},      {"temporal_aspect", 945},  {"minimal_context", 540},  {"name_only", 660}};
  std::map<std::string, std::size_t> seen;
  for (const auto& i : set.instances) ++seen[i.category];
  o.require(set.instances.size() == 37345, fmt::format("total {}", set.instances.size()));
  o.require(seen == table, "per-category counts differ from the default table");

  std::map<std::string, std::pair<std::size_t, std::size_t>> mf;
  for (const auto& i : target.instances) {
    auto& [m, f] = mf[i.category];
    if (i.gold == Gender::male) ++m;
    else if (i.gold == Gender::female) ++f;
  }
  o.require(target.instances.size() == 15750, fmt::format("target {}", target.instances.size()));
  for (const auto& [cat, mfc] : mf)
    o.require(mfc.first == mfc.second, fmt::format("{} split {}/{}", cat, mfc.first, mfc.second));
  o.require(mf.size() == 3, "target subset does not span three categories");
  o.require(secs < 60.0, fmt::format("took {:.1f}s", secs));
  if (o.ok) o.detail = fmt::format("37345 rows, target 15750 balanced, {:.1f}s", secs);
  return o;
}

// ---------------------------------------------------------------------------

Outcome classifier_fixtures() {
  Outcome o;
  std::ifstream in(t::fixtures_dir() / "classifier_fixtures.jsonl");
  const auto ex = cue::read_labeled_jsonl(in);
  const auto a = cue::agreement(ex, t::english(), t::lexicons());
  const auto b = cue::agreement(ex, t::english(), t::lexicons());
  std::size_t curated = 0;
  for (const auto& e : ex) curated += e.id.starts_with("c") ? 1 : 0;
  o.require(a.agree == a.total, fmt::format("{}/{} agree", a.agree, a.total));
  o.require(curated >= 40, fmt::format("only {} curated cases", curated));

  for (const char* must : {"करती थी", "उन्होंने", "वह पुरुष ने पुरस्कार प्राप्त किया", "बना।"}) {
    bool found = false;
    for (const auto& e : ex) found = found || e.hindi.find(must) != std::string::npos;
    o.require(found, fmt::format("missing worked example {}", must));
  }

  bool same = a.agree == b.agree && a.disagreements.size() == b.disagreements.size();
  for (const auto& e : ex) {
    const auto v1 = pipeline::classify_output(e.source_en, e.hindi, t::english(), t::lexicons());
    const auto v2 = pipeline::classify_output(e.source_en, e.hindi, t::english(), t::lexicons());
    same = same && v1.state == v2.state && v1.rule_path_label() == v2.rule_path_label() && !v1.used_fallback;
  }
  o.require(same, "classifier is not deterministic without an oracle");
  if (o.ok) o.detail = fmt::format("{}/{} correct, {} curated", a.agree, a.total, curated);
  return o;
}

// ---------------------------------------------------------------------------

struct PoolGen {
  std::mt19937_64 rng;
  explicit PoolGen(std::uint64_t seed) : rng(seed) {}
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[rng() % v.size()]; }

  std::string candidate() {
    static const std::vector<std::string> subj = {"वह", "उसने", "उन्होंने", "वह महिला", "वह पुरुष", "यह व्यक्ति", "आप", "डॉक्टर ने"};
    static const std::vector<std::string> mid = {"नर्स के रूप में", "प्रोजेक्ट", "दफ़्तर में", "रिपोर्ट", "कल"};
    static const std::vector<std::string> verb = {"काम करती थी।", "काम करता था।", "पूरा किया।", "है।", "बनी।", "बना।", "हैं।", "गई।"};
    std::string s = pick(subj) + " " + pick(mid) + " " + pick(verb);
    switch (rng() % 7) {
      case 0: s += " some latin words"; break;
      case 1: s += " " + s; break;
      case 2: s = s + " " + s + " " + s; break;
      case 3: s = pick(verb); break;
      default: break;
    }
    return s;
  }
  std::vector<rerank::Candidate> pool() {
    std::vector<rerank::Candidate> p;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) p.push_back({candidate(), i ? rerank::Origin::sampled : rerank::Origin::base_system, i});
    return p;
  }
  double weight() { return std::uniform_real_distribution<double>(0.01, 3.0)(rng); }
};

cue::SourceCue cue_for(Gender g) {
  cue::SourceCue c;
  c.gender = g;
  if (is_binary(g)) c.evidence.push_back({g == Gender::female ? "she" : "he", CueType::pronoun, g});
  return c;
}

Outcome sar_properties() {
  Outcome o;
  PoolGen gen(2024);
  const std::string x = "The engineer finished the report yesterday.";
  const std::vector<Gender> genders = {Gender::male, Gender::female, Gender::neutral};
  std::size_t scale_fail = 0, dom_fail = 0, q_fail = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    rerank::RerankConfig c;
    if (trial % 4) c.lambda_q = gen.weight(), c.lambda_g = gen.weight(), c.lambda_e = gen.weight();
    const auto cue = cue_for(gen.pick(genders));
    const auto pool = gen.pool();
    const auto r = rerank::sar_select(x, cue, pool, c, t::lexicons());

    auto scaled = c;
    const double k = std::exp(std::uniform_real_distribution<double>(-6, 6)(gen.rng));
    scaled.lambda_q *= k, scaled.lambda_g *= k, scaled.lambda_e *= k;
    if (rerank::sar_select(x, cue, pool, scaled, t::lexicons()).chosen.index != r.chosen.index) ++scale_fail;

    const auto& w = r.scores[r.chosen.index];
    for (const auto& a : r.scores)
      if (a.q >= w.q && a.g >= w.g && a.e <= w.e && (a.q > w.q || a.g > w.g || a.e < w.e)) ++dom_fail;

    auto qonly = c;
    qonly.lambda_g = qonly.lambda_e = 0;
    std::size_t best = 0;
    std::vector<double> q;
    for (const auto& cand : pool) q.push_back(rerank::quality_score(x, cand.text));
    for (std::size_t i = 1; i < q.size(); ++i)
      if (q[i] > q[best]) best = i;
    if (rerank::sar_select(x, cue, pool, qonly, t::lexicons()).chosen.index != best) ++q_fail;
  }
  o.require(scale_fail == 0, fmt::format("{} scale-invariance violations", scale_fail));
  o.require(dom_fail == 0, fmt::format("{} dominated selections", dom_fail));
  o.require(q_fail == 0, fmt::format("{} quality-only mismatches", q_fail));
  if (o.ok) o.detail = "10000 pools: scale-invariant, undominated, quality-only = argmax Q";
  return o;
}

// ---------------------------------------------------------------------------

// Distinct whitespace/punctuation-split tokens in the cue-gender set minus
// those in the opposite set.
int count_m(const std::string& hindi, Gender g) {
  std::set<std::string> toks;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) toks.insert(cur);
    cur.clear();
  };
  for (char32_t c : text::decode_utf8(hindi)) {
    if (c == U' ' || c == U'।' || c == U'.' || c == U',' || c == U'?' || c == U'!' || c == U'"') flush();
    else text::append_utf8(cur, c);
  }
  flush();
  const auto& same = t::lexicons().match_tokens(g);
  const auto& other = t::lexicons().match_tokens(opposite(g));
  int m = 0;
  for (const auto& tok : toks) m += (same.count(tok) ? 1 : 0) - (other.count(tok) ? 1 : 0);
  return m;
}

Outcome par_routing() {
  Outcome o;
  const auto set = bench::generate_benchmark(bench::GenerationConfig::defaults(), t::resources().bundle, 0);
  const auto target = bench::select_target_subset(set);
  std::size_t match = 0;
  for (const auto& i : target.instances) {
    const auto c = cue::extract_source_cue(i.source_en, t::english());
    match += cue::to_string(cue::detect_phenomenon(i.source_en, c, t::english())) == i.category ? 1 : 0;
  }
  const double pct = 100.0 * static_cast<double>(match) / static_cast<double>(target.instances.size());
  o.require(pct >= 99.0, fmt::format("phenomenon match {:.2f}%", pct));

  const auto rows = t::target_bench(200, 7);
  backends::MockBackend backend(backends::BackendSpec::parse("mock:seed=7"));
  pipeline::Context ctx{t::resources(), t::english(), backend, {}, nullptr};
  const auto run = pipeline::run_batch(rows.instances, pipeline::Mode::par, ctx, {}, 1);
  o.require(run.records.size() == 600, fmt::format("{} records", run.records.size()));
  std::size_t par = 0, bad = 0;
  for (const auto& r : run.records) {
    if (r.method != rerank::Method::par) continue;
    ++par;
    const int theta = r.phenomenon == cue::Phenomenon::late_binding || r.phenomenon == cue::Phenomenon::winograd_coref ? 2 : 1;
    if (count_m(r.chosen_text, r.gold) < theta) ++bad;
  }
  o.require(par > 0, "no row selected by PAR");
  o.require(bad == 0, fmt::format("{} PAR selections below threshold", bad));
  if (o.ok) o.detail = fmt::format("phenomenon match {:.2f}%; {} PAR selections all >= theta", pct, par);
  return o;
}

// ---------------------------------------------------------------------------

Outcome ablation_harness() {
  Outcome o;
  t::TempDir dir;
  const auto target = t::target_bench(200, 11);
  {
    std::ofstream out(dir.file("bench.jsonl"));
    bench::write_jsonl(out, target);
  }
  t::ablation_script(target, 5).save(dir.file("script.json"));
  const int code = t::run_cli({"--seed", "11", "--log-level", "warn", "ablate", "--bench", dir.file("bench.jsonl"),
                               "--backend", "mock:script=" + dir.file("script.json"), "--out", dir.file("ablation.json")});
  o.require(code == 0, fmt::format("ablate exited {}", code));
  if (!o.ok) return o;
  const auto j = nlohmann::json::parse(t::read_file(dir.file("ablation.json")));
  std::vector<metrics::AblationRow> rows;
  for (const auto& r : j)
    rows.push_back({r["lexicalize"], r["phenomenon_prompts"], r["explicit_gender"], r["late_binding"],
                    r["winograd_coref"], r["target"]});
  o.require(rows.size() == 4, "table does not have four rows");
  if (!o.ok) return o;
  // rows: No/No, Yes/No, No/Yes, Yes/Yes.
  o.require(rows[1].explicit_gender > rows[2].explicit_gender && rows[1].explicit_gender > rows[0].explicit_gender,
            "lexicalization-only is not best on explicit_gender among single factors");
  o.require(rows[2].late_binding > rows[1].late_binding && rows[2].late_binding > rows[0].late_binding,
            "phenomenon-only is not best on late_binding among single factors");
  o.require(rows[3].target > rows[0].target && rows[3].target > rows[1].target && rows[3].target > rows[2].target,
            "combined configuration is not best overall");
  if (o.ok)
    o.detail = fmt::format("target {:.1f}/{:.1f}/{:.1f}/{:.1f} (No/No, Lex, Phen, Both)", rows[0].target,
                           rows[1].target, rows[2].target, rows[3].target);
  return o;
}

// ---------------------------------------------------------------------------

Outcome statistics() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::int64_t b = 5356, c = 53;
  const std::int64_t d = (b > c ? b - c : c - b) - 1;
  const double brute = static_cast<double>(d * d) / static_cast<double>(b + c);
  const auto r = stats::mcnemar(b, c);
  o.require(std::abs(r.chi2_cc - brute) <= 1e-9 * brute, fmt::format("chi2 {} vs {}", r.chi2_cc, brute));
  o.require(r.p_exact > 0 && std::isfinite(r.p_exact) && r.p_exact <= 1e-300, "exact p not clamped to a positive tiny value");
  o.require(r.p_chi2 > 0 && std::isfinite(r.p_chi2), "chi-square p not positive and finite");
  o.require(std::isfinite(r.log10_p_exact) && r.log10_p_exact < -300, fmt::format("log10 p_exact {}", r.log10_p_exact));

  std::size_t covered = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    std::mt19937_64 rng(text::mix64(rep + 1));
    std::vector<double> v(300);
    for (auto& x : v) x = static_cast<double>(rng() & 1);
    const auto ci = stats::bootstrap_ci(v, 10000, 0.95, rep);
    covered += ci.lo <= 0.5 && 0.5 <= ci.hi ? 1 : 0;
  }
  const double coverage = static_cast<double>(covered) / 2.0;
  const double secs = seconds_since(t0);
  o.require(coverage >= 92.0 && coverage <= 98.0, fmt::format("coverage {:.1f}%", coverage));
  o.require(secs < 30.0, fmt::format("took {:.1f}s", secs));
  if (o.ok)
    o.detail = fmt::format("chi2 {:.6f}, log10 p_exact {:.1f}, coverage {:.1f}%, {:.1f}s", r.chi2_cc, r.log10_p_exact,
                           coverage, secs);
  return o;
}

// ---------------------------------------------------------------------------

Outcome human_eval() {
  Outcome o;
  const auto dir = t::fixtures_dir() / "humaneval";
  const auto s = humaneval::aggregate(humaneval::Study::load(dir / "par_study.json"),
                                      humaneval::read_judgments(dir / "par_judgments.jsonl"), 0);
  const auto r1 = [](double v) { return fmt::format("{:.1f}", v); };
  const auto r2 = [](double v) { return fmt::format("{:.2f}", v); };
  o.require(r1(s.baseline.preservation_pct()) == "10.3", "baseline preservation " + r1(s.baseline.preservation_pct()));
  o.require(r1(s.sys.preservation_pct()) == "81.3", "PAR preservation " + r1(s.sys.preservation_pct()));
  o.require(r2(s.baseline.mean_fluency()) == "4.36", "baseline fluency " + r2(s.baseline.mean_fluency()));
  o.require(r2(s.sys.mean_fluency()) == "3.37", "PAR fluency " + r2(s.sys.mean_fluency()));
  o.require(r1(s.baseline.preference_pct()) == "42.3", "baseline preference " + r1(s.baseline.preference_pct()));
  o.require(r1(s.sys.preference_pct()) == "39.3", "PAR preference " + r1(s.sys.preference_pct()));
  if (o.ok)
    o.detail = fmt::format("preservation {}% vs {}%, fluency {} vs {}, preference {}%/{}%",
                           r1(s.baseline.preservation_pct()), r1(s.sys.preservation_pct()), r2(s.baseline.mean_fluency()),
                           r2(s.sys.mean_fluency()), r1(s.baseline.preference_pct()), r1(s.sys.preference_pct()));
  return o;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> e2e_run(const t::TempDir& dir) {
  const auto p = [&](const char* f) { return dir.file(f); };
  const std::vector<std::string> g = {"--seed", "5", "--log-level", "warn"};
  auto cli = [&](std::vector<std::string> rest) {
    std::vector<std::string> a = g;
    a.insert(a.end(), rest.begin(), rest.end());
    if (const int code = t::run_cli(a); code != 0) throw std::runtime_error(fmt::format("{} exited {}", rest[0], code));
  };
  cli({"benchgen", "--counts",
       "explicit_gender=500,late_binding=300,winograd_coref=500,neutral_profession=200,name_only=100,minimal_context=100",
       "--out", p("bench.jsonl")});
  cli({"translate", "--bench", p("bench.jsonl"), "--backend", "mock", "--out", p("base.jsonl")});
  for (const char* mode : {"baseline", "sar", "par"}) {
    const auto out = dir.file(fmt::format("{}.jsonl", mode));
    cli({"rerank", "--bench", p("bench.jsonl"), "--mode", mode, "--base", p("base.jsonl"), "--backend", "mock", "--out", out});
    cli({"classify", "--bench", p("bench.jsonl"), "--outputs", out, "--out", dir.file(fmt::format("{}.verdicts.jsonl", mode))});
  }
  cli({"metrics", "--bench", p("bench.jsonl"), "--verdicts", p("par.verdicts.jsonl"), "--paired",
       p("baseline.verdicts.jsonl"), "--names", "par,baseline", "--format", "json", "--out", p("metrics.json")});
  std::map<std::string, std::string> files;
  for (const char* f : {"bench.jsonl", "base.jsonl", "baseline.jsonl", "sar.jsonl", "par.jsonl",
                        "baseline.verdicts.jsonl", "sar.verdicts.jsonl", "par.verdicts.jsonl", "metrics.json"})
    files[f] = t::read_file(dir.file(f));
  return files;
}

Outcome determinism() {
  Outcome o;
  t::TempDir a, b;
  const auto x = e2e_run(a);
  const auto y = e2e_run(b);
  std::size_t bytes = 0;
  for (const auto& [name, content] : x) {
    o.require(y.at(name) == content, name + " differs");
    bytes += content.size();
  }
  if (o.ok) o.detail = fmt::format("{} artifacts, {} bytes identical", x.size(), bytes);
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"benchmark fidelity", benchmark_fidelity}, {"classifier fixtures", classifier_fixtures},
      {"SAR properties", sar_properties},         {"PAR routing", par_routing},
      {"ablation harness", ablation_harness},     {"statistics", statistics},
      {"human-eval arithmetic", human_eval},      {"end-to-end determinism", determinism}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.ok ? 0 : 1;
    std::printf("%s %s: %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
