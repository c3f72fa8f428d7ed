#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fidelity::cli {

/// Provenance record written next to every command's output.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_argv(std::vector<std::string> argv) { argv_ = std::move(argv); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  /// Digest of the effective option set; identical runs give identical digests.
  void set_config(std::string canonical);
  void set_backend(std::string description) { backend_ = std::move(description); }
  void add_resource_version(std::string name, std::string version) { resources_[std::move(name)] = std::move(version); }
  void add_output(const std::filesystem::path& path);
  void add_input(const std::filesystem::path& path);
  void note(std::string key, std::string value) { notes_[std::move(key)] = std::move(value); }

  /// Times the enclosing scope as a named stage.
  class Stage {
   public:
    Stage(RunManifest& m, std::string name);
    ~Stage();
    Stage(const Stage&) = delete;
    Stage& operator=(const Stage&) = delete;

   private:
    RunManifest& m_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
  };

  const std::string& config_digest() const { return config_digest_; }
  std::string to_json(int exit_code) const;
  void write(const std::filesystem::path& path, int exit_code) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::uint64_t seed_ = 0;
  std::string config_;
  std::string config_digest_;
  std::string backend_;
  std::string started_;
  std::map<std::string, std::string> resources_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  std::map<std::string, std::string> notes_;
};

/// Content digest of a file, or "missing".
std::string file_digest(const std::filesystem::path& path);

}  // namespace fidelity::cli
