#pragma once

// Per-instance translate -> pool -> select -> classify, and batch runs.

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fidelity/backends.hpp"
#include "fidelity/benchgen.hpp"
#include "fidelity/cue_analysis.hpp"
#include "fidelity/rerank.hpp"
#include "fidelity/resources.hpp"

namespace fidelity::pipeline {

enum class Mode { baseline, sar, par };
std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct Context {
  const LinguisticResources& resources;
  const cue::EnglishLexicon& english;
  backends::Backend& backend;
  rerank::RerankConfig config;
  cue::FallbackOracle* oracle = nullptr;
};

struct ScoredCandidate {
  std::size_t index = 0;
  rerank::Origin origin = rerank::Origin::sampled;
  std::string text;
  rerank::ScoreBreakdown score;
};

struct Record {
  std::string id;
  std::string category;
  Gender gold = Gender::neutral;
  Mode mode = Mode::baseline;
  cue::Phenomenon phenomenon = cue::Phenomenon::other;
  std::string prompt_template;
  std::string chosen_text;
  std::size_t chosen_index = 0;
  rerank::Method method = rerank::Method::baseline;
  cue::PreservationVerdict verdict;
  std::vector<ScoredCandidate> scores;
  std::string config_digest;
  std::vector<std::string> warnings;
};

/// Classifies one output against its source, routing unmarked sources to the
/// unlicensed-marker rule.
cue::PreservationVerdict classify_output(std::string_view source, std::string_view hindi,
                                         const cue::EnglishLexicon& english, const hindi::Lexicons& lex,
                                         cue::FallbackOracle* oracle = nullptr);

/// `base` is the base-system translation, used as the baseline output and as
/// pool index 0 for the reranking modes. Without it the backend translates
/// with the generic prompt.
Record run_instance(const bench::BenchmarkInstance& instance, Mode mode, const Context& ctx,
                    const std::optional<std::string>& base = std::nullopt);

struct BatchResult {
  std::vector<Record> records;  // benchmark order; failed rows omitted
  std::vector<std::pair<std::string, std::string>> failures;  // (id, error)
  bool partial() const { return !failures.empty(); }
};

BatchResult run_batch(std::span<const bench::BenchmarkInstance> instances, Mode mode, const Context& ctx,
                      const std::unordered_map<std::string, std::string>& base_texts, std::size_t jobs);

std::string to_json_line(const Record& r);
Record record_from_json_line(std::string_view line);
void write_records(std::ostream& out, std::span<const Record> records);
std::vector<Record> read_records(std::istream& in);

/// id -> output text from a JSONL file of records or {"id","text"} rows.
std::unordered_map<std::string, std::string> read_texts(std::istream& in);

}  // namespace fidelity::pipeline
