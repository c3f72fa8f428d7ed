#include "cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "fidelity/backends.hpp"
#include "fidelity/benchgen.hpp"
#include "fidelity/error.hpp"
#include "fidelity/humaneval.hpp"
#include "fidelity/humaneval_service.hpp"
#include "fidelity/metrics.hpp"
#include "fidelity/parallel.hpp"
#include "fidelity/pipeline.hpp"
#include "fidelity/resources.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fidelity::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string data_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = default_jobs();
  std::string log_level = "info";
  bool trace = false;
  std::string manifest;
};

// ---------------------------------------------------------------------------
// Shared helpers

std::ifstream open_input(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {} '{}'", what, path));
  return in;
}

std::ofstream open_output(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path));
  return out;
}

bench::BenchmarkSet load_bench(const std::string& path, RunManifest& m) {
  auto in = open_input(path, "benchmark");
  m.add_input(path);
  try {
    return bench::read_jsonl(in);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

std::vector<pipeline::Record> load_records(const std::string& path, RunManifest& m) {
  auto in = open_input(path, "outputs");
  m.add_input(path);
  try {
    return pipeline::read_records(in);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

std::unordered_map<std::string, std::string> load_texts(const std::string& path, RunManifest& m) {
  auto in = open_input(path, "outputs");
  m.add_input(path);
  try {
    return pipeline::read_texts(in);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

struct Loaded {
  LinguisticResources res;
  cue::EnglishLexicon english;
};

std::unique_ptr<Loaded> load_resources(const Globals& g, RunManifest& m) {
  const fs::path dir = g.data_dir.empty() ? default_data_dir() : fs::path(g.data_dir);
  auto res = LinguisticResources::load(dir);
  for (const auto& [name, v] : res.bundle.versions) m.add_resource_version(name, v);
  m.add_resource_version("hindi_lexicon.tsv", res.lexicons.version());
  cue::EnglishLexicon english(res.bundle);
  return std::make_unique<Loaded>(Loaded{std::move(res), std::move(english)});
}

backends::BackendSpec backend_spec(const std::string& text, const Globals& g, std::optional<double> temperature) {
  auto spec = backends::BackendSpec::parse(text);
  // All randomness flows from --seed unless the spec pins its own.
  if (text.find("seed=") == std::string::npos) spec.seed = g.seed;
  if (temperature) spec.temperature = *temperature;
  spec.trace = spec.trace || g.trace;
  spec.validate();
  return spec;
}

metrics::Format format_of(const std::string& f) {
  auto p = metrics::parse_format(f);
  if (!p) throw ValidationError(fmt::format("unknown format '{}' (expected md or json)", f));
  return *p;
}

void emit(const std::string& text, const std::string& out, RunManifest& m) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  open_output(out) << text;
  m.add_output(out);
}

// ---------------------------------------------------------------------------
// Commands

struct BenchgenOpts {
  std::vector<std::string> counts;
  bool target_only = false;
  std::string out;
};

int cmd_benchgen(const Globals& g, const BenchgenOpts& o, RunManifest& m) {
  auto loaded = load_resources(g, m);
  bench::GenerationConfig config = bench::GenerationConfig::defaults();
  if (!o.counts.empty()) {
    config.counts.clear();
    for (const auto& item : o.counts) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError(fmt::format("--counts entry '{}' is not category=N", item));
      const auto cat = text::trim(item.substr(0, eq));
      const auto num = text::trim(item.substr(eq + 1));
      if (!bench::is_category(cat)) throw ValidationError(fmt::format("unknown category '{}'", cat));
      if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError(fmt::format("count for {} is not a non-negative integer: '{}'", cat, num));
      config.counts.emplace_back(cat, std::stoull(num));
    }
  }
  bench::BenchmarkSet set;
  {
    RunManifest::Stage s(m, "generate");
    set = bench::generate_benchmark(config, loaded->res.bundle, g.seed);
    if (o.target_only) set = bench::select_target_subset(set);
  }
  {
    RunManifest::Stage s(m, "write");
    auto out = open_output(o.out);
    bench::write_jsonl(out, set);
  }
  m.add_output(o.out);
  m.note("instances", std::to_string(set.instances.size()));
  spdlog::info("wrote {} instances to {}", set.instances.size(), o.out);
  return kOk;
}

struct TranslateOpts {
  std::string bench;
  std::string backend = "mock";
  std::optional<double> temperature;
  std::string out;
};

int cmd_translate(const Globals& g, const TranslateOpts& o, RunManifest& m) {
  const auto set = load_bench(o.bench, m);
  const auto spec = backend_spec(o.backend, g, o.temperature);
  m.set_backend(spec.describe());
  auto backend = backends::make_backend(spec);
  const auto prompt = rerank::generic_prompt();

  std::vector<std::optional<std::string>> texts(set.instances.size());
  std::size_t failures = 0;
  std::mutex fail_mutex;
  {
    RunManifest::Stage s(m, "translate");
    parallel_for(set.instances.size(), g.jobs, [&](std::size_t i) {
      try {
        texts[i] = backend->translate(prompt.instruction, set.instances[i].source_en);
      } catch (const BackendError& e) {
        std::lock_guard lock(fail_mutex);
        ++failures;
        spdlog::warn("{}: {}", set.instances[i].id, e.what());
      }
    });
  }
  auto out = open_output(o.out);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!texts[i]) continue;
    nlohmann::ordered_json j;
    j["id"] = set.instances[i].id;
    j["text"] = *texts[i];
    out << j.dump() << '\n';
  }
  out.close();
  m.add_output(o.out);
  if (failures == set.instances.size() && failures > 0) throw BackendError("every translation failed", false);
  return failures ? kPartial : kOk;
}

struct RerankOpts {
  std::string bench;
  std::string mode = "par";
  std::string base;
  std::string backend = "mock";
  std::string oracle;
  std::optional<double> temperature;
  rerank::RerankConfig config;
  std::string out;
};

int run_rerank(const Globals& g, const RerankOpts& o, const bench::BenchmarkSet& set, const Loaded& loaded,
               backends::Backend& backend, cue::FallbackOracle* oracle, RunManifest& m,
               std::vector<pipeline::Record>* keep) {
  const auto mode = pipeline::parse_mode(o.mode);
  if (!mode) throw ValidationError(fmt::format("unknown mode '{}' (expected baseline, sar or par)", o.mode));
  o.config.validate();
  std::unordered_map<std::string, std::string> base;
  if (!o.base.empty()) base = load_texts(o.base, m);

  pipeline::Context ctx{loaded.res, loaded.english, backend, o.config, oracle};
  pipeline::BatchResult result;
  {
    RunManifest::Stage s(m, std::string("rerank:") + o.mode);
    result = pipeline::run_batch(set.instances, *mode, ctx, base, g.jobs);
  }
  if (!o.out.empty()) {
    auto out = open_output(o.out);
    pipeline::write_records(out, result.records);
    out.close();
    m.add_output(o.out);
  }
  for (const auto& [id, err] : result.failures) spdlog::error("{} failed: {}", id, err);
  if (result.records.empty() && !set.instances.empty()) throw BackendError("every instance failed", false);
  if (keep) *keep = std::move(result.records);
  return result.partial() ? kPartial : kOk;
}

std::unique_ptr<backends::Backend> make_oracle_backend(const std::string& spec, const Globals& g,
                                                       RunManifest& m) {
  if (spec.empty()) return nullptr;
  const auto s = backend_spec(spec, g, std::nullopt);
  m.note("oracle", s.describe());
  return backends::make_backend(s);
}

int cmd_rerank(const Globals& g, RerankOpts o, RunManifest& m) {
  const auto set = load_bench(o.bench, m);
  auto loaded = load_resources(g, m);
  const auto spec = backend_spec(o.backend, g, o.temperature);
  o.config.temperature = spec.temperature;
  m.set_backend(spec.describe());
  m.note("rerank_config", o.config.canonical());
  m.note("rerank_config_digest", o.config.digest());
  auto backend = backends::make_backend(spec);
  auto oracle_backend = make_oracle_backend(o.oracle, g, m);
  std::optional<backends::BackendOracle> oracle;
  if (oracle_backend) oracle.emplace(*oracle_backend, false);
  return run_rerank(g, o, set, *loaded, *backend, oracle ? &*oracle : nullptr, m, nullptr);
}

struct ClassifyOpts {
  std::string bench;
  std::string outputs;
  std::string oracle;
  std::string out;
};

int cmd_classify(const Globals& g, const ClassifyOpts& o, RunManifest& m) {
  const auto set = load_bench(o.bench, m);
  const auto texts = load_texts(o.outputs, m);
  auto loaded = load_resources(g, m);
  auto oracle_backend = make_oracle_backend(o.oracle, g, m);
  std::optional<backends::BackendOracle> oracle;
  if (oracle_backend) oracle.emplace(*oracle_backend, false);

  std::unordered_map<std::string, const bench::BenchmarkInstance*> by_id;
  for (const auto& inst : set.instances) by_id.emplace(inst.id, &inst);
  for (const auto& [id, _] : texts)
    if (!by_id.count(id)) throw ValidationError(fmt::format("{}: id {} is not in the benchmark", o.outputs, id));

  std::vector<const bench::BenchmarkInstance*> rows;
  for (const auto& inst : set.instances)
    if (texts.count(inst.id)) rows.push_back(&inst);
  std::vector<pipeline::Record> records(rows.size());
  {
    RunManifest::Stage s(m, "classify");
    parallel_for(rows.size(), g.jobs, [&](std::size_t i) {
      const auto& inst = *rows[i];
      auto& r = records[i];
      r.id = inst.id;
      r.category = inst.category;
      r.gold = inst.gold;
      r.chosen_text = texts.at(inst.id);
      r.method = rerank::Method::passthrough;
      const auto c = cue::extract_source_cue(inst.source_en, loaded->english);
      r.phenomenon = cue::detect_phenomenon(inst.source_en, c, loaded->english);
      r.verdict = cue::classify_preservation(c, r.chosen_text, loaded->res.lexicons, oracle ? &*oracle : nullptr);
    });
  }
  auto out = open_output(o.out);
  pipeline::write_records(out, records);
  out.close();
  m.add_output(o.out);
  return kOk;
}

struct MetricsOpts {
  std::string bench;
  std::string verdicts;
  std::string paired;
  std::vector<std::string> names = {"system", "other"};
  std::string format = "md";
  std::size_t resamples = 10000;
  std::string out;
};

int cmd_metrics(const Globals& g, const MetricsOpts& o, RunManifest& m) {
  const auto set = load_bench(o.bench, m);
  const auto records = load_records(o.verdicts, m);
  auto loaded = load_resources(g, m);
  const auto fmt_kind = format_of(o.format);
  std::string report;
  if (o.paired.empty()) {
    report = metrics::render(metrics::score_outputs(records, set, loaded->res.lexicons), fmt_kind);
  } else {
    if (o.names.size() != 2) throw ValidationError("--names takes exactly two names");
    const auto other = load_records(o.paired, m);
    const auto r = metrics::paired_report(o.names[0], o.names[1], records, other, set, o.resamples, g.seed, g.jobs);
    report = metrics::render(r, fmt_kind);
  }
  emit(report, o.out, m);
  return kOk;
}

struct AblateOpts {
  std::string bench;
  std::string backend = "mock";
  std::string base;
  std::vector<std::string> grid = {"lex", "phen"};
  std::optional<double> temperature;
  rerank::RerankConfig config;
  std::string format;
  std::string out;
};

int cmd_ablate(const Globals& g, AblateOpts o, RunManifest& m) {
  if (o.grid != std::vector<std::string>{"lex", "phen"} && o.grid != std::vector<std::string>{"phen", "lex"})
    throw ValidationError("--grid supports exactly lex,phen");
  const auto full = load_bench(o.bench, m);
  const auto set = bench::select_target_subset(full);
  if (set.instances.empty()) throw ValidationError("benchmark has no target-subset rows to ablate");
  auto loaded = load_resources(g, m);
  const auto spec = backend_spec(o.backend, g, o.temperature);
  o.config.temperature = spec.temperature;
  m.set_backend(spec.describe());
  auto backend = backends::make_backend(spec);

  std::vector<std::pair<std::pair<bool, bool>, metrics::CategoryAccuracy>> runs;
  int code = kOk;
  for (bool phen : {false, true}) {
    for (bool lex : {false, true}) {
      RerankOpts ro;
      ro.mode = "par";
      ro.base = o.base;
      ro.config = o.config;
      ro.config.lexicalize = lex;
      ro.config.phenomenon_prompts = phen;
      m.note(fmt::format("config_lex{}_phen{}", lex, phen), ro.config.canonical());
      std::vector<pipeline::Record> records;
      code = std::max(code, run_rerank(g, ro, set, *loaded, *backend, nullptr, m, &records));
      runs.emplace_back(std::pair{lex, phen}, metrics::score_outputs(records, set, loaded->res.lexicons));
    }
  }
  const auto rows = metrics::ablation_table(runs);
  const auto checks = metrics::check_ablation(rows);
  m.note("ablation_checks", fmt::format("lexical_helps_explicit={} phenomenon_helps_late_binding={} "
                                        "combined_best_target={}",
                                        checks.lexical_helps_explicit, checks.phenomenon_helps_late_binding,
                                        checks.combined_best_target));
  std::string f = o.format;
  if (f.empty()) f = o.out.size() >= 5 && o.out.ends_with(".json") ? "json" : "md";
  emit(metrics::render(rows, format_of(f)), o.out, m);
  return code;
}

struct HeSampleOpts {
  std::string bench;
  std::string baseline;
  std::string system;
  std::string system_name = "par";
  std::size_t per_category = 50;
  std::vector<std::string> annotators = {"annotator-1", "annotator-2"};
  std::string out;
};

int cmd_he_sample(const Globals& g, const HeSampleOpts& o, RunManifest& m) {
  if (o.system_name == "baseline") throw ValidationError("--system-name must differ from 'baseline'");
  const auto full = load_bench(o.bench, m);
  const auto target = bench::select_target_subset(full);
  const auto ids = humaneval::stratified_sample(target, o.per_category, g.seed);
  const auto base = load_texts(o.baseline, m);
  const auto sys = load_texts(o.system, m);
  humaneval::StudyInputs in{o.system_name, o.annotators, g.seed};
  const auto study = humaneval::build_study(full, ids, base, sys, in);
  m.note("salt", std::to_string(study.salt));
  for (const auto& a : study.annotators)
    m.note("baseline_first_fraction:" + a, fmt::format("{:.3f}", study.baseline_first_fraction(a)));
  study.save(o.out);
  m.add_output(o.out);
  return kOk;
}

struct HeServeOpts {
  std::string study;
  std::string judgments;
  humaneval::ServiceConfig service;
  std::string static_dir;
};

int cmd_he_serve(const Globals&, HeServeOpts o, RunManifest& m) {
  auto study = humaneval::Study::load(o.study);
  m.add_input(o.study);
  humaneval::JudgmentStore store{fs::path(o.judgments)};
  if (!o.static_dir.empty()) o.service.static_dir = o.static_dir;
  humaneval::Service service(std::move(study), store, o.service);
  service.bind();
  service.serve();
  return kOk;
}

struct HeReportOpts {
  std::vector<std::string> studies;
  std::vector<std::string> judgments;
  bool frontier = false;
  bool allow_partial = false;
  std::size_t resamples = 10000;
  std::string format = "md";
  std::string out;
};

int cmd_he_report(const Globals& g, const HeReportOpts& o, RunManifest& m) {
  if (o.studies.size() != o.judgments.size())
    throw ValidationError("give one --judgments file per --study, in the same order");
  const auto f = format_of(o.format);
  std::vector<humaneval::HumanEvalSummary> summaries;
  for (std::size_t i = 0; i < o.studies.size(); ++i) {
    const auto study = humaneval::Study::load(o.studies[i]);
    m.add_input(o.studies[i]);
    const auto judgments = humaneval::read_judgments(o.judgments[i]);
    m.add_input(o.judgments[i]);
    if (!o.allow_partial && !humaneval::study_complete(study, judgments))
      throw ValidationError(fmt::format("{} is incomplete; pass --allow-partial to report anyway", o.judgments[i]));
    summaries.push_back(humaneval::aggregate(study, judgments, o.resamples, g.seed));
  }
  std::string report;
  if (o.frontier) {
    std::vector<metrics::SystemHumanScores> scores;
    for (const auto& s : summaries) scores.push_back(humaneval::to_scores(s));
    report = metrics::render(metrics::frontier_report(scores), f);
  } else if (f == metrics::Format::json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : summaries) arr.push_back(nlohmann::ordered_json::parse(humaneval::summary_json(s)));
    report = (summaries.size() == 1 ? arr[0] : arr).dump(2) + "\n";
  } else {
    for (const auto& s : summaries) report += humaneval::render(s, f) + "\n";
  }
  emit(report, o.out, m);
  return kOk;
}

struct AgreementOpts {
  std::string labels;
  std::string oracle;
  std::string format = "md";
  std::string out;
};

int cmd_agreement(const Globals& g, const AgreementOpts& o, RunManifest& m) {
  auto in = open_input(o.labels, "labels");
  m.add_input(o.labels);
  const auto examples = cue::read_labeled_jsonl(in);
  auto loaded = load_resources(g, m);
  auto oracle_backend = make_oracle_backend(o.oracle, g, m);
  std::optional<backends::BackendOracle> oracle;
  if (oracle_backend) oracle.emplace(*oracle_backend, false);
  const auto rep = cue::agreement(examples, loaded->english, loaded->res.lexicons, oracle ? &*oracle : nullptr);

  std::string text;
  if (format_of(o.format) == metrics::Format::json) {
    nlohmann::ordered_json j;
    j["total"] = rep.total;
    j["agree"] = rep.agree;
    j["percent"] = rep.percent();
    j["rule_determined"] = rep.rule_determined;
    j["rule_determined_agree"] = rep.rule_determined_agree;
    auto dis = nlohmann::ordered_json::array();
    for (const auto& d : rep.disagreements)
      dis.push_back({{"id", d.id},
                     {"label", cue::to_string(d.label)},
                     {"predicted", cue::to_string(d.verdict.state)},
                     {"rule_path", d.verdict.rule_path_label()}});
    j["disagreements"] = std::move(dis);
    text = j.dump(2) + "\n";
  } else {
    text = fmt::format("Agreement: {}/{} ({:.1f}%); rule-determined {}/{}\n", rep.agree, rep.total, rep.percent(),
                       rep.rule_determined_agree, rep.rule_determined);
    for (const auto& d : rep.disagreements)
      text += fmt::format("- {}: label {}, predicted {} via {}\n", d.id, cue::to_string(d.label),
                          cue::to_string(d.verdict.state), d.verdict.rule_path_label());
  }
  emit(text, o.out, m);
  return kOk;
}

// ---------------------------------------------------------------------------

void add_rerank_options(CLI::App* sub, rerank::RerankConfig& c, std::optional<double>& temperature) {
  sub->add_option("--k", c.k, "Samples per instance")->capture_default_str();
  sub->add_option("--lambda-q", c.lambda_q, "Quality weight")->capture_default_str();
  sub->add_option("--lambda-g", c.lambda_g, "Gender weight")->capture_default_str();
  sub->add_option("--lambda-e", c.lambda_e, "Ergative/honorific penalty weight")->capture_default_str();
  sub->add_option("--theta-explicit", c.theta_explicit, "Token-match threshold, single-clause routes")
      ->capture_default_str();
  sub->add_option("--theta-multiclause", c.theta_multiclause, "Token-match threshold, late-binding/coreference")
      ->capture_default_str();
  sub->add_flag("--lexicalize,!--no-lexicalize", c.lexicalize, "Allow a lexical gender marker in PAR prompts");
  sub->add_flag("--phenomenon-prompts,!--no-phenomenon-prompts", c.phenomenon_prompts,
                "Route PAR prompts by phenomenon");
  sub->add_option("--temperature", temperature, "Sampling temperature (default 0.7)");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Gender-fidelity evaluation and reranking for English-Hindi translation", "fidelity"};
  app.set_config("--config", "", "TOML configuration; flags override file values");
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--data-dir", g.data_dir, "Linguistic resource directory");
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")->capture_default_str();
  app.add_flag("--trace", g.trace, "Log backend requests and responses (credentials are never logged)");
  app.add_option("--manifest", g.manifest, "Manifest path (default: <out>.manifest.json)");

  std::string command;
  std::string out_path;
  std::function<int(RunManifest&)> handler;

  BenchgenOpts bg;
  auto* s_bg = app.add_subcommand("benchgen", "Generate the synthetic benchmark");
  s_bg->add_option("--counts", bg.counts, "category=N entries (default: full benchmark)")->delimiter(',');
  s_bg->add_flag("--target-only", bg.target_only, "Keep only the target subset");
  s_bg->add_option("--out", bg.out, "Output JSONL")->required();
  s_bg->callback([&] { command = "benchgen"; out_path = bg.out; handler = [&](RunManifest& m) { return cmd_benchgen(g, bg, m); }; });

  TranslateOpts tr;
  auto* s_tr = app.add_subcommand("translate", "Base-system translations");
  s_tr->add_option("--bench", tr.bench, "Benchmark JSONL")->required();
  s_tr->add_option("--backend", tr.backend, "Backend spec")->capture_default_str();
  s_tr->add_option("--temperature", tr.temperature, "Sampling temperature");
  s_tr->add_option("--out", tr.out, "Output JSONL")->required();
  s_tr->callback([&] { command = "translate"; out_path = tr.out; handler = [&](RunManifest& m) { return cmd_translate(g, tr, m); }; });

  RerankOpts rr;
  auto* s_rr = app.add_subcommand("rerank", "Select a translation per instance");
  s_rr->add_option("--bench", rr.bench, "Benchmark JSONL")->required();
  s_rr->add_option("--mode", rr.mode, "baseline, sar or par")->capture_default_str()
      ->check(CLI::IsMember({"baseline", "sar", "par"}));
  s_rr->add_option("--base", rr.base, "Base-system outputs (JSONL of id/text)");
  s_rr->add_option("--backend", rr.backend, "Backend spec")->capture_default_str();
  s_rr->add_option("--oracle", rr.oracle, "Backend spec for the classifier fallback");
  add_rerank_options(s_rr, rr.config, rr.temperature);
  s_rr->add_option("--out", rr.out, "Output JSONL")->required();
  s_rr->callback([&] { command = "rerank"; out_path = rr.out; handler = [&](RunManifest& m) { return cmd_rerank(g, rr, m); }; });

  ClassifyOpts cl;
  auto* s_cl = app.add_subcommand("classify", "Classify outputs for gender preservation");
  s_cl->add_option("--bench", cl.bench, "Benchmark JSONL")->required();
  s_cl->add_option("--outputs", cl.outputs, "Outputs JSONL (records or id/text)")->required();
  s_cl->add_option("--oracle", cl.oracle, "Backend spec for the fallback");
  s_cl->add_option("--out", cl.out, "Verdicts JSONL")->required();
  s_cl->callback([&] { command = "classify"; out_path = cl.out; handler = [&](RunManifest& m) { return cmd_classify(g, cl, m); }; });

  MetricsOpts mt;
  auto* s_mt = app.add_subcommand("metrics", "Accuracy tables and paired significance tests");
  s_mt->add_option("--bench", mt.bench, "Benchmark JSONL")->required();
  s_mt->add_option("--verdicts", mt.verdicts, "Verdicts JSONL")->required();
  s_mt->add_option("--paired", mt.paired, "Second system's verdicts for a paired test");
  s_mt->add_option("--names", mt.names, "Names of the two systems")->delimiter(',');
  s_mt->add_option("--resamples", mt.resamples, "Bootstrap resamples")->capture_default_str();
  s_mt->add_option("--format", mt.format, "md or json")->capture_default_str();
  s_mt->add_option("--out", mt.out, "Report path (default: stdout)");
  s_mt->callback([&] { command = "metrics"; out_path = mt.out; handler = [&](RunManifest& m) { return cmd_metrics(g, mt, m); }; });

  AblateOpts ab;
  auto* s_ab = app.add_subcommand("ablate", "Lexicalization x phenomenon-prompt ablation");
  s_ab->add_option("--bench", ab.bench, "Benchmark JSONL")->required();
  s_ab->add_option("--backend", ab.backend, "Backend spec")->capture_default_str();
  s_ab->add_option("--base", ab.base, "Base-system outputs");
  s_ab->add_option("--grid", ab.grid, "Factors (lex,phen)")->delimiter(',');
  add_rerank_options(s_ab, ab.config, ab.temperature);
  s_ab->add_option("--format", ab.format, "md or json (default from --out extension)");
  s_ab->add_option("--out", ab.out, "Table path (default: stdout)");
  s_ab->callback([&] { command = "ablate"; out_path = ab.out; handler = [&](RunManifest& m) { return cmd_ablate(g, ab, m); }; });

  auto* s_he = app.add_subcommand("humaneval", "Blinded human evaluation");
  s_he->require_subcommand(1);
  HeSampleOpts hs;
  auto* s_hs = s_he->add_subcommand("sample", "Draw a stratified sample and write a study file");
  s_hs->add_option("--bench", hs.bench, "Benchmark JSONL")->required();
  s_hs->add_option("--baseline", hs.baseline, "Baseline outputs")->required();
  s_hs->add_option("--system", hs.system, "Reranked outputs")->required();
  s_hs->add_option("--system-name", hs.system_name, "Name of the reranked system")->capture_default_str();
  s_hs->add_option("--per-category", hs.per_category, "Items per target category")->capture_default_str();
  s_hs->add_option("--annotators", hs.annotators, "Annotator ids")->delimiter(',');
  s_hs->add_option("--out", hs.out, "Study JSON")->required();
  s_hs->callback([&] { command = "humaneval sample"; out_path = hs.out; handler = [&](RunManifest& m) { return cmd_he_sample(g, hs, m); }; });

  HeServeOpts hv;
  auto* s_hv = s_he->add_subcommand("serve", "Serve the annotation API");
  s_hv->add_option("--study", hv.study, "Study JSON")->required();
  s_hv->add_option("--judgments", hv.judgments, "Append-only judgments JSONL")->required();
  s_hv->add_option("--host", hv.service.host, "Bind address")->capture_default_str();
  s_hv->add_option("--port", hv.service.port, "Port (0 = any free port)")->capture_default_str();
  s_hv->add_option("--static", hv.static_dir, "Annotation UI bundle served at /");
  s_hv->add_flag("--allow-partial", hv.service.allow_partial, "Serve results before the study is complete");
  s_hv->callback([&] { command = "humaneval serve"; out_path = hv.judgments; handler = [&](RunManifest& m) { return cmd_he_serve(g, hv, m); }; });

  HeReportOpts hr;
  auto* s_hr = s_he->add_subcommand("report", "Aggregate judgments");
  s_hr->add_option("--study", hr.studies, "Study JSON (repeatable)")->required();
  s_hr->add_option("--judgments", hr.judgments, "Judgments JSONL, one per study")->required();
  s_hr->add_flag("--frontier", hr.frontier, "Report preservation/fluency deltas against the baseline");
  s_hr->add_flag("--allow-partial", hr.allow_partial, "Aggregate incomplete studies");
  s_hr->add_option("--resamples", hr.resamples, "Bootstrap resamples")->capture_default_str();
  s_hr->add_option("--format", hr.format, "md or json")->capture_default_str();
  s_hr->add_option("--out", hr.out, "Report path (default: stdout)");
  s_hr->callback([&] { command = "humaneval report"; out_path = hr.out; handler = [&](RunManifest& m) { return cmd_he_report(g, hr, m); }; });

  AgreementOpts ag;
  auto* s_ag = app.add_subcommand("agreement", "Classifier agreement with a labeled file");
  s_ag->add_option("--labels", ag.labels, "Labeled JSONL (id, source_en, hindi, label)")->required();
  s_ag->add_option("--oracle", ag.oracle, "Backend spec for the fallback");
  s_ag->add_option("--format", ag.format, "md or json")->capture_default_str();
  s_ag->add_option("--out", ag.out, "Report path (default: stdout)");
  s_ag->callback([&] { command = "agreement"; out_path = ag.out; handler = [&](RunManifest& m) { return cmd_agreement(g, ag, m); }; });

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  auto logger = spdlog::get("fidelity");
  if (!logger) logger = spdlog::stderr_color_mt("fidelity");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.trace ? "debug" : g.log_level));

  RunManifest manifest(command);
  manifest.set_argv(args);
  manifest.set_seed(g.seed);
  manifest.set_config(app.config_to_str(true, false));

  int code = kOk;
  try {
    code = handler(manifest);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    code = kValidation;
  } catch (const ConflictError& e) {
    spdlog::error("{}", e.what());
    code = kValidation;
  } catch (const BackendError& e) {
    spdlog::error("backend failure: {}", e.what());
    code = kBackend;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    code = kValidation;
  }

  std::string mpath = g.manifest;
  if (mpath.empty()) mpath = out_path.empty() ? fmt::format("fidelity-{}.manifest.json", command) : out_path + ".manifest.json";
  for (auto& c : mpath)
    if (c == ' ') c = '-';
  manifest.write(mpath, code);
  return code;
}

}  // namespace fidelity::cli
