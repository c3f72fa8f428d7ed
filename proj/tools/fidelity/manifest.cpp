#include "manifest.hpp"

#include <fstream>
#include <sstream>

#include "fidelity/humaneval.hpp"
#include "fidelity/text.hpp"
#include "json.hpp"

namespace fidelity::cli {

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream ss;
  ss << in.rdbuf();
  return text::digest(ss.str());
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)), started_(humaneval::utc_timestamp()) {}

void RunManifest::set_config(std::string canonical) {
  config_digest_ = text::digest(canonical);
  config_ = std::move(canonical);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs_.emplace_back(path.string(), file_digest(path));
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), file_digest(path));
}

RunManifest::Stage::Stage(RunManifest& m, std::string name)
    : m_(m), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

RunManifest::Stage::~Stage() {
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  m_.stages_.emplace_back(name_, ms);
}

std::string RunManifest::to_json(int exit_code) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["seed"] = seed_;
  j["config_digest"] = config_digest_;
  j["config"] = config_;
  if (!backend_.empty()) j["backend"] = nlohmann::ordered_json::parse(backend_);
  j["resources"] = resources_;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& [name, ms] : stages_) stages.push_back({{"stage", name}, {"ms", ms}});
  j["stages"] = std::move(stages);
  auto files = [](const auto& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [p, d] : v) arr.push_back({{"path", p}, {"digest", d}});
    return arr;
  };
  j["inputs"] = files(inputs_);
  j["outputs"] = files(outputs_);
  if (!notes_.empty()) j["notes"] = notes_;
  j["started_at"] = started_;
  j["exit_code"] = exit_code;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path, int exit_code) const {
  std::ofstream out(path);
  if (out) out << to_json(exit_code);
}

}  // namespace fidelity::cli
