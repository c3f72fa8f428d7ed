#pragma once

// Translation backends: live chat-LLM and MT-API adapters over HTTP, and a
// deterministic mock for tests and offline runs.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fidelity/cue_analysis.hpp"
#include "fidelity/rerank.hpp"

namespace fidelity::backends {

enum class BackendKind { chat_llm, mt_api, mock };
std::string_view to_string(BackendKind k);

struct BackendSpec {
  BackendKind kind = BackendKind::mock;
  std::string name = "mock";
  std::string endpoint;  // scheme://host[:port]/path
  std::string model;
  double temperature = 0.7;
  std::size_t max_in_flight = 4;
  std::size_t retries = 3;
  double timeout_s = 60.0;
  double rate_per_s = 0.0;  // 0 = unlimited
  double burst = 4.0;
  std::string script;  // mock only: path of a MockScript JSON file
  std::uint64_t seed = 0;
  bool trace = false;

  /// "kind[:key=value,...]", e.g. "mock:seed=3" or
  /// "chat_llm:name=gpt,endpoint=https://host/v1/chat/completions,model=m".
  static BackendSpec parse(std::string_view spec);
  void validate() const;
  /// Environment variable holding the credential: FIDELITY_<NAME>_API_KEY.
  std::string auth_env() const;
  /// Canonical description without secrets, for manifests.
  std::string describe() const;
};

struct SampleResult {
  std::vector<std::string> texts;  // distinct, in arrival order
  std::size_t requested = 0;
  std::size_t failures = 0;
  std::size_t duplicates = 0;
  bool partial() const { return failures > 0; }
};

class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  /// One translation of `source` under `prompt` (the instruction text).
  virtual std::string translate(std::string_view prompt, std::string_view source) = 0;
  /// k independent draws. Exact duplicates are collapsed, keeping the first.
  /// Throws BackendError only when every draw failed.
  virtual SampleResult sample(std::string_view prompt, std::string_view source, std::size_t k) = 0;

  const BackendSpec& spec() const { return spec_; }

 protected:
  BackendSpec spec_;
};

/// Pre-recorded candidate lists keyed by (source, prompt) digests.
class MockScript {
 public:
  static std::string key(std::string_view source, std::string_view prompt);
  static MockScript load(const std::string& path);
  static MockScript parse(std::string_view json);

  void add(std::string_view source, std::string_view prompt, std::vector<std::string> candidates);
  const std::vector<std::string>* find(std::string_view source, std::string_view prompt) const;
  std::size_t size() const { return entries_.size(); }
  std::string dump() const;
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

/// Deterministic backend. Scripted entries are served verbatim (padded with
/// generated variants when short); otherwise pseudo-Hindi variants are
/// generated from (seed, source, prompt, draw index). sample(k=1) returns
/// exactly translate().
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendSpec spec, MockScript script = {});
  std::string translate(std::string_view prompt, std::string_view source) override;
  SampleResult sample(std::string_view prompt, std::string_view source, std::size_t k) override;

  std::string generate(std::string_view prompt, std::string_view source, std::size_t draw) const;

 private:
  MockScript script_;
};

/// Counting semaphore with occupancy instrumentation.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit);
  void acquire();
  void release();
  std::size_t limit() const { return limit_; }
  std::size_t peak() const { return peak_.load(); }
  std::size_t current() const { return current_.load(); }

  class Guard {
   public:
    explicit Guard(InFlightLimiter& l) : l_(l) { l_.acquire(); }
    ~Guard() { l_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimiter& l_;
  };

 private:
  std::size_t limit_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Token bucket; rate <= 0 disables limiting.
class TokenBucket {
 public:
  TokenBucket(double rate_per_s, double burst);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct HttpStats {
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> retries{0};
  std::atomic<std::size_t> failures{0};
};

/// Shared HTTP machinery for chat_llm and mt_api.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendSpec spec);
  std::string translate(std::string_view prompt, std::string_view source) override;
  SampleResult sample(std::string_view prompt, std::string_view source, std::size_t k) override;

  const InFlightLimiter& limiter() const { return limiter_; }
  const HttpStats& stats() const { return stats_; }

 protected:
  virtual std::string request_body(std::string_view prompt, std::string_view source) const = 0;
  virtual std::string parse_response(std::string_view body) const = 0;

 private:
  /// Trace output with any occurrence of the credential masked.
  std::string redact(std::string text) const;
  std::string post_once(const std::string& body);
  std::string post_with_retries(const std::string& body);

  std::string base_;
  std::string path_;
  std::optional<std::string> api_key_;
  InFlightLimiter limiter_;
  TokenBucket bucket_;
  HttpStats stats_;
};

/// OpenAI-compatible chat completions; one completion per request.
class ChatLlmBackend final : public HttpBackend {
 public:
  using HttpBackend::HttpBackend;

 protected:
  std::string request_body(std::string_view prompt, std::string_view source) const override;
  std::string parse_response(std::string_view body) const override;
};

/// Generic MT endpoint: POST {"text","source_lang","target_lang","instruction"}
/// returning {"translation"}.
class MtApiBackend final : public HttpBackend {
 public:
  using HttpBackend::HttpBackend;

 protected:
  std::string request_body(std::string_view prompt, std::string_view source) const override;
  std::string parse_response(std::string_view body) const override;
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

/// Optional base-system translation at index 0, sampled texts after it.
/// Exact duplicates are dropped, keeping the lowest index.
std::vector<rerank::Candidate> build_pool(const std::optional<std::string>& base,
                                          std::span<const std::string> sampled);

/// Fallback oracle that asks a backend for a one-word label.
class BackendOracle final : public cue::FallbackOracle {
 public:
  BackendOracle(Backend& backend, bool single_flight) : backend_(backend), single_flight_(single_flight) {}
  std::optional<cue::PreservationState> judge(std::string_view source, std::string_view hindi,
                                              Gender expected) override;
  bool single_flight() const override { return single_flight_; }

  static std::string prompt(Gender expected);

 private:
  Backend& backend_;
  bool single_flight_;
};

}  // namespace fidelity::backends
