#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fidelity/backends.hpp"
#include "fidelity/benchgen.hpp"
#include "fidelity/cue_analysis.hpp"
#include "fidelity/resources.hpp"

namespace fidelity::testing {

namespace fs = std::filesystem;

/// Shipped resources, loaded once per process.
const LinguisticResources& resources();
const cue::EnglishLexicon& english();
const hindi::Lexicons& lexicons();

fs::path fixtures_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  std::string file(std::string_view name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p);
void write_file(const fs::path& p, std::string_view content);

/// Runs the command line in-process; "fidelity" is prepended as argv[0].
int run_cli(std::vector<std::string> args);

/// Only the three target categories, `per_category` rows each.
bench::BenchmarkSet target_bench(std::size_t per_category, std::uint64_t seed);

/// Preservation rate (percent) the ablation script embeds for one
/// (category, lexicalize, phenomenon_prompts) cell.
double embedded_rate(std::string_view category, bool lexicalize, bool phenomenon_prompts);

/// Scripts k candidates per row and per ablation configuration. In each
/// cell, embedded_rate() percent of rows get one candidate that carries the
/// cue gender (lexical marker plus agreeing verb); all others are ergative
/// renderings that erase it.
backends::MockScript ablation_script(const bench::BenchmarkSet& target, std::size_t k);

}  // namespace fidelity::testing
