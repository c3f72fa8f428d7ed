#include "fidelity/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fidelity/error.hpp"
#include "fidelity/parallel.hpp"
#include "json.hpp"

namespace fidelity::pipeline {

using nlohmann::ordered_json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::sar: return "sar";
    case Mode::par: return "par";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "sar") return Mode::sar;
  if (s == "par") return Mode::par;
  return std::nullopt;
}

cue::PreservationVerdict classify_output(std::string_view source, std::string_view hindi,
                                         const cue::EnglishLexicon& english, const hindi::Lexicons& lex,
                                         cue::FallbackOracle* oracle) {
  const auto c = cue::extract_source_cue(source, english);
  return cue::classify_preservation(c, hindi, lex, oracle);
}

Record run_instance(const bench::BenchmarkInstance& instance, Mode mode, const Context& ctx,
                    const std::optional<std::string>& base) {
  const auto& lex = ctx.resources.lexicons;
  const std::string& x = instance.source_en;
  const auto source_cue = cue::extract_source_cue(x, ctx.english);

  Record r;
  r.id = instance.id;
  r.category = instance.category;
  r.gold = instance.gold;
  r.mode = mode;
  r.phenomenon = cue::detect_phenomenon(x, source_cue, ctx.english);
  r.config_digest = ctx.config.digest();

  const auto generic = rerank::generic_prompt();
  auto base_text = base;
  if (!base_text) base_text = ctx.backend.translate(generic.instruction, x);

  rerank::SelectionResult sel;
  std::vector<rerank::Candidate> pool;
  if (mode == Mode::baseline) {
    r.prompt_template = generic.template_name;
    pool = backends::build_pool(base_text, {});
    sel.chosen = pool.front();
    sel.scores = {rerank::score_candidate(x, source_cue, sel.chosen.text, ctx.config, lex)};
    sel.method = rerank::Method::baseline;
  } else {
    const auto prompt = mode == Mode::par ? rerank::build_prompt(r.phenomenon, source_cue, x, ctx.config) : generic;
    r.prompt_template = prompt.template_name;
    auto drawn = ctx.backend.sample(prompt.instruction, x, ctx.config.k);
    if (drawn.partial())
      r.warnings.push_back(fmt::format("partial sample: {} of {} draws failed", drawn.failures, drawn.requested));
    if (drawn.texts.size() < ctx.config.k)
      r.warnings.push_back(fmt::format("pool has {} distinct samples, wanted {}", drawn.texts.size(), ctx.config.k));
    pool = backends::build_pool(base_text, drawn.texts);
    sel = mode == Mode::par ? rerank::par_select(x, source_cue, r.phenomenon, pool, ctx.config, lex)
                            : rerank::sar_select(x, source_cue, pool, ctx.config, lex);
  }

  r.chosen_text = sel.chosen.text;
  r.chosen_index = sel.chosen.index;
  r.method = sel.method;
  for (std::size_t i = 0; i < sel.scores.size(); ++i)
    r.scores.push_back({pool[i].index, pool[i].origin, pool[i].text, sel.scores[i]});
  r.verdict = cue::classify_preservation(source_cue, r.chosen_text, lex, ctx.oracle);
  if (r.verdict.oracle_failed) r.warnings.push_back("fallback oracle failed; default verdict used");
  return r;
}

BatchResult run_batch(std::span<const bench::BenchmarkInstance> instances, Mode mode, const Context& ctx,
                      const std::unordered_map<std::string, std::string>& base_texts, std::size_t jobs) {
  std::vector<std::optional<Record>> slots(instances.size());
  std::vector<std::string> errors(instances.size());
  parallel_for(instances.size(), jobs, [&](std::size_t i) {
    const auto& inst = instances[i];
    std::optional<std::string> base;
    if (auto it = base_texts.find(inst.id); it != base_texts.end()) base = it->second;
    try {
      slots[i] = run_instance(inst, mode, ctx, base);
    } catch (const BackendError& e) {
      errors[i] = e.what();
      spdlog::warn("{}: {}", inst.id, e.what());
    }
  });
  BatchResult out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (slots[i]) out.records.push_back(std::move(*slots[i]));
    else out.failures.emplace_back(instances[i].id, errors[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::optional<rerank::Method> parse_method(std::string_view s) {
  for (auto m : {rerank::Method::baseline, rerank::Method::passthrough, rerank::Method::sar, rerank::Method::par,
                 rerank::Method::par_fallback_sar})
    if (rerank::to_string(m) == s) return m;
  return std::nullopt;
}

std::optional<cue::RulePath> parse_rule(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(cue::RulePath::unlicensed_marker); ++i) {
    const auto r = static_cast<cue::RulePath>(i);
    if (cue::to_string(r) == s) return r;
  }
  return std::nullopt;
}

template <class T>
T require(std::optional<T> v, std::string_view what, std::string_view value) {
  if (!v) throw ValidationError(fmt::format("record: invalid {} '{}'", what, value));
  return *v;
}

}  // namespace

std::string to_json_line(const Record& r) {
  ordered_json j;
  j["id"] = r.id;
  j["category"] = r.category;
  j["gold"] = to_string(r.gold);
  j["mode"] = to_string(r.mode);
  j["phenomenon"] = to_string(r.phenomenon);
  j["prompt"] = r.prompt_template;
  j["chosen_text"] = r.chosen_text;
  j["chosen_index"] = r.chosen_index;
  j["method"] = rerank::to_string(r.method);
  j["state"] = cue::to_string(r.verdict.state);
  j["rule_path"] = r.verdict.rule_path_label();
  j["used_fallback"] = r.verdict.used_fallback;
  auto scores = ordered_json::array();
  for (const auto& s : r.scores) {
    ordered_json e;
    e["index"] = s.index;
    e["origin"] = rerank::to_string(s.origin);
    e["text"] = s.text;
    e["q"] = s.score.q;
    e["g"] = s.score.g;
    e["e"] = s.score.e;
    e["s"] = s.score.s;
    e["m"] = s.score.m;
    scores.push_back(std::move(e));
  }
  j["scores"] = std::move(scores);
  j["config_digest"] = r.config_digest;
  j["warnings"] = r.warnings;
  return j.dump();
}

Record record_from_json_line(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("record is not valid JSON: {}", e.what()));
  }
  try {
    Record r;
    r.id = j.at("id").get<std::string>();
    r.category = j.value("category", "");
    r.gold = require(parse_gender(j.value("gold", "neutral")), "gold", j.value("gold", ""));
    r.mode = require(parse_mode(j.value("mode", "baseline")), "mode", j.value("mode", ""));
    r.phenomenon = require(cue::parse_phenomenon(j.value("phenomenon", "other")), "phenomenon",
                           j.value("phenomenon", ""));
    r.prompt_template = j.value("prompt", "");
    r.chosen_text = j.value("chosen_text", "");
    r.chosen_index = j.value("chosen_index", std::size_t{0});
    r.method = require(parse_method(j.value("method", "baseline")), "method", j.value("method", ""));
    const auto state = j.at("state").get<std::string>();
    r.verdict.state = require(cue::parse_state(state), "state", state);
    auto rule = j.value("rule_path", "default");
    constexpr std::string_view kSuffix = "+conflict_resolved";
    if (rule.size() > kSuffix.size() && rule.compare(rule.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
      r.verdict.conflict_resolved = true;
      rule.resize(rule.size() - kSuffix.size());
    }
    r.verdict.rule_path = require(parse_rule(rule), "rule_path", rule);
    r.verdict.used_fallback = j.value("used_fallback", false);
    if (j.contains("scores")) {
      for (const auto& e : j["scores"]) {
        ScoredCandidate s;
        s.index = e.at("index").get<std::size_t>();
        s.origin = e.value("origin", "sampled") == "base_system" ? rerank::Origin::base_system : rerank::Origin::sampled;
        s.text = e.value("text", "");
        s.score = {e.at("q").get<double>(), e.at("g").get<double>(), e.at("e").get<double>(), e.at("s").get<double>(),
                   e.at("m").get<int>()};
        r.scores.push_back(std::move(s));
      }
    }
    r.config_digest = j.value("config_digest", "");
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("record has a missing or mistyped field: {}", e.what()));
  }
}

void write_records(std::ostream& out, std::span<const Record> records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<Record> read_records(std::istream& in) {
  std::vector<Record> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", n, e.what()));
    }
  }
  return out;
}

std::unordered_map<std::string, std::string> read_texts(std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = ordered_json::parse(line);
      const auto id = j.at("id").get<std::string>();
      const auto text = j.contains("chosen_text") ? j["chosen_text"].get<std::string>() : j.at("text").get<std::string>();
      if (!out.emplace(id, text).second) throw ValidationError(fmt::format("duplicate id {}", id));
    } catch (const ordered_json::exception& e) {
      throw ValidationError(fmt::format("line {}: expected {{\"id\", \"text\"}}: {}", n, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", n, e.what()));
    }
  }
  return out;
}

}  // namespace fidelity::pipeline
