#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "fidelity/humaneval.hpp"

namespace fidelity::humaneval {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
  bool allow_partial = false;
};

/// JSON API over a study and its judgment store:
///   GET  /api/session?annotator=ID
///   GET  /api/item/{item_id}?annotator=ID
///   POST /api/judgment
///   GET  /api/results
/// Annotator-facing responses never carry system identity, scores, or
/// verdicts.
class Service {
 public:
  Service(Study study, JudgmentStore& store, ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; returns the bound port.
  int bind();
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fidelity::humaneval
