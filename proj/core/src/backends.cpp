#include "fidelity/backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

#include "fidelity/error.hpp"
#include "fidelity/text.hpp"

namespace fidelity::backends {

using nlohmann::json;

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::chat_llm: return "chat_llm";
    case BackendKind::mt_api: return "mt_api";
    case BackendKind::mock: return "mock";
  }
  return "?";
}

namespace {

template <class T>
T parse_number(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) out = static_cast<T>(std::stod(v, &used));
    else out = static_cast<T>(std::stoull(v, &used));
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("backend option {}: not a number: '{}'", key, v));
  }
}

}  // namespace

BackendSpec BackendSpec::parse(std::string_view spec) {
  BackendSpec out;
  const auto colon = spec.find(':');
  const std::string kind{text::trim(spec.substr(0, colon))};
  if (kind == "mock") out.kind = BackendKind::mock;
  else if (kind == "chat_llm") out.kind = BackendKind::chat_llm;
  else if (kind == "mt_api") out.kind = BackendKind::mt_api;
  else throw ValidationError(fmt::format("unknown backend kind '{}' (expected chat_llm, mt_api, mock)", kind));
  out.name = kind;

  if (colon != std::string_view::npos) {
    for (const auto& part : text::split(spec.substr(colon + 1), ',')) {
      const auto item = text::trim(part);
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError(fmt::format("backend option without '=': '{}'", item));
      const std::string key = text::trim(item.substr(0, eq));
      const std::string val = text::trim(item.substr(eq + 1));
      if (key == "name") out.name = val;
      else if (key == "endpoint") out.endpoint = val;
      else if (key == "model") out.model = val;
      else if (key == "temperature") out.temperature = parse_number<double>(key, val);
      else if (key == "max_in_flight") out.max_in_flight = parse_number<std::size_t>(key, val);
      else if (key == "retries") out.retries = parse_number<std::size_t>(key, val);
      else if (key == "timeout") out.timeout_s = parse_number<double>(key, val);
      else if (key == "rate") out.rate_per_s = parse_number<double>(key, val);
      else if (key == "burst") out.burst = parse_number<double>(key, val);
      else if (key == "script") out.script = val;
      else if (key == "seed") out.seed = parse_number<std::uint64_t>(key, val);
      else if (key == "trace") out.trace = val == "1" || val == "true";
      else throw ValidationError(fmt::format("unknown backend option '{}'", key));
    }
  }
  out.validate();
  return out;
}

void BackendSpec::validate() const {
  if (name.empty()) throw ValidationError("backend name must not be empty");
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      throw ValidationError(fmt::format("backend name '{}' may only contain [A-Za-z0-9_-]", name));
  if (kind != BackendKind::mock) {
    if (endpoint.empty()) throw ValidationError(fmt::format("backend {} needs endpoint=", to_string(kind)));
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
      throw ValidationError(fmt::format("endpoint must start with http:// or https://: {}", endpoint));
  }
  if (kind == BackendKind::chat_llm && model.empty()) throw ValidationError("chat_llm backend needs model=");
  if (max_in_flight == 0) throw ValidationError("max_in_flight must be at least 1");
  if (timeout_s <= 0) throw ValidationError("timeout must be positive");
  if (temperature < 0) throw ValidationError("temperature must be non-negative");
  if (rate_per_s < 0 || burst < 1) throw ValidationError("rate must be >= 0 and burst >= 1");
}

std::string BackendSpec::auth_env() const {
  std::string upper;
  for (char c : name) upper += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return "FIDELITY_" + upper + "_API_KEY";
}

std::string BackendSpec::describe() const {
  json j = json::object();
  j["kind"] = to_string(kind);
  j["name"] = name;
  if (!endpoint.empty()) j["endpoint"] = endpoint;
  if (!model.empty()) j["model"] = model;
  j["temperature"] = temperature;
  if (kind == BackendKind::mock) {
    j["seed"] = seed;
    if (!script.empty()) j["script"] = script;
  } else {
    j["max_in_flight"] = max_in_flight;
    j["retries"] = retries;
    j["timeout_s"] = timeout_s;
    j["rate_per_s"] = rate_per_s;
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Mock script

std::string MockScript::key(std::string_view source, std::string_view prompt) {
  return text::digest(source) + "/" + text::digest(prompt);
}

MockScript MockScript::parse(std::string_view data) {
  MockScript s;
  json j;
  try {
    j = json::parse(data);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("mock script is not valid JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_object())
    throw ValidationError("mock script must be an object with an 'entries' map");
  for (const auto& [k, v] : j["entries"].items()) {
    if (!v.is_array() || v.empty()) throw ValidationError(fmt::format("mock script entry {} must be a non-empty array", k));
    std::vector<std::string> texts;
    for (const auto& t : v) {
      if (!t.is_string()) throw ValidationError(fmt::format("mock script entry {} holds a non-string", k));
      texts.push_back(t.get<std::string>());
    }
    s.entries_[k] = std::move(texts);
  }
  return s;
}

MockScript MockScript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open mock script {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void MockScript::add(std::string_view source, std::string_view prompt, std::vector<std::string> candidates) {
  if (candidates.empty()) throw ValidationError("mock script entries must be non-empty");
  entries_[key(source, prompt)] = std::move(candidates);
}

const std::vector<std::string>* MockScript::find(std::string_view source, std::string_view prompt) const {
  auto it = entries_.find(key(source, prompt));
  return it == entries_.end() ? nullptr : &it->second;
}

std::string MockScript::dump() const {
  json j;
  j["entries"] = entries_;
  return j.dump();
}

void MockScript::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write mock script {}", path));
  out << dump() << '\n';
}

// ---------------------------------------------------------------------------
// Mock generation

namespace {

constexpr std::array<std::string_view, 24> kFiller = {
    "नई",     "परियोजना", "पर",    "दफ़्तर", "में",    "समय",   "योजना", "रिपोर्ट",
    "बैठक",   "शहर",     "सुबह",  "टीम",    "बजट",   "सलाह",  "फ़ाइल", "कार्यालय",
    "सप्ताह", "प्रस्ताव", "विभाग", "सूची",   "बाज़ार", "सेवा",  "जाँच",  "अभियान",
};

enum class Form { ergative, honorific, agree_ok, agree_wrong, lexical_ergative, lexical_agree };

Gender scan_source_gender(std::string_view source) {
  static const std::unordered_set<std::string> male = {"he", "him", "his", "himself", "man", "boy", "father",
                                                       "son", "brother", "husband", "mr"};
  static const std::unordered_set<std::string> female = {"she", "her", "hers", "herself", "woman", "girl",
                                                         "mother", "daughter", "sister", "wife", "mrs", "ms"};
  std::string word;
  auto flush = [&]() -> std::optional<Gender> {
    if (word.empty()) return std::nullopt;
    const auto w = text::to_lower_ascii(word);
    word.clear();
    if (male.count(w)) return Gender::male;
    if (female.count(w)) return Gender::female;
    return std::nullopt;
  };
  for (char c : source) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += c;
    } else if (auto g = flush()) {
      return *g;
    }
  }
  if (auto g = flush()) return *g;
  return Gender::neutral;
}

std::size_t sentence_count(std::string_view source) {
  std::size_t n = 0;
  for (char c : source)
    if (c == '.' || c == '?' || c == '!') ++n;
  return std::max<std::size_t>(n, 1);
}

}  // namespace

MockBackend::MockBackend(BackendSpec spec, MockScript script) : Backend(std::move(spec)), script_(std::move(script)) {}

std::string MockBackend::generate(std::string_view prompt, std::string_view source, std::size_t draw) const {
  std::uint64_t state = text::mix64(spec_.seed ^ text::fnv1a64(source) ^ (text::fnv1a64(prompt) << 1) ^
                                    (static_cast<std::uint64_t>(draw) * 0x9e3779b97f4a7c15ULL));
  std::mt19937_64 rng(state);

  const bool instructed = prompt.find("explicitly marks the relevant person as") != std::string_view::npos ||
                          prompt.find("Resolve the pronoun") != std::string_view::npos;
  const bool lexical = prompt.find("lexical gender marker") != std::string_view::npos;

  // Unprompted systems lean heavily on ergative and honorific constructions.
  std::array<double, 6> w = {50, 15, 15, 12, 4, 4};
  if (instructed) {
    w[2] += 25;
    w[3] -= 6;
  }
  if (lexical) {
    w[4] += 15;
    w[5] += 15;
  }
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const auto form = static_cast<Form>(pick(rng));

  Gender g = scan_source_gender(source);
  if (!is_binary(g)) g = (rng() & 1) ? Gender::female : Gender::male;
  const Gender shown = form == Form::agree_wrong ? fidelity::opposite(g) : g;
  const bool fem = shown == Gender::female;

  // Filler sized so the output length tracks the source length.
  const std::size_t target = std::max<std::size_t>(4, text::count_nonspace(source) * 9 / 10);
  std::string filler;
  std::size_t have = 0;
  while (have < target) {
    const auto word = kFiller[rng() % kFiller.size()];
    if (!filler.empty()) filler += ' ';
    filler += word;
    have += text::count_nonspace(word);
  }

  std::string prefix;
  if (sentence_count(source) > 1) prefix = fmt::format("{} के बाद, ", kFiller[rng() % kFiller.size()]);

  const char* verb_fem = "करती थी";
  const char* verb_masc = "करता था";
  std::string body;
  switch (form) {
    case Form::ergative: body = fmt::format("उसने {} किया।", filler); break;
    case Form::honorific: body = fmt::format("उन्होंने {} किया।", filler); break;
    case Form::agree_ok:
    case Form::agree_wrong: body = fmt::format("वह {} {}।", filler, fem ? verb_fem : verb_masc); break;
    case Form::lexical_ergative:
      body = fmt::format("उस {} ने {} किया।", fem ? "महिला" : "पुरुष", filler);
      break;
    case Form::lexical_agree:
      body = fmt::format("वह {} {} {}।", fem ? "महिला" : "पुरुष", filler, fem ? verb_fem : verb_masc);
      break;
  }
  return prefix + body;
}

std::string MockBackend::translate(std::string_view prompt, std::string_view source) {
  if (source.empty()) throw ValidationError("cannot translate an empty source");
  if (const auto* s = script_.find(source, prompt)) return s->front();
  return generate(prompt, source, 0);
}

SampleResult MockBackend::sample(std::string_view prompt, std::string_view source, std::size_t k) {
  if (source.empty()) throw ValidationError("cannot translate an empty source");
  SampleResult r;
  r.requested = k;
  std::unordered_set<std::string> seen;
  auto push = [&](std::string t) {
    if (seen.insert(t).second) r.texts.push_back(std::move(t));
    else ++r.duplicates;
  };
  if (const auto* s = script_.find(source, prompt))
    for (std::size_t i = 0; i < s->size() && r.texts.size() < k; ++i) push((*s)[i]);
  // Draw beyond k when collisions occur so the pool still has k distinct texts.
  for (std::size_t draw = 0; r.texts.size() < k && draw < 64 * k + 64; ++draw) {
    if (draw == 0 && script_.find(source, prompt)) continue;
    push(generate(prompt, source, draw));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Concurrency limits

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(limit) {
  if (limit == 0) throw ValidationError("in-flight limit must be at least 1");
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return current_.load() < limit_; });
  const auto now = ++current_;
  std::size_t prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --current_;
  }
  cv_.notify_one();
}

TokenBucket::TokenBucket(double rate_per_s, double burst)
    : rate_(rate_per_s), burst_(burst), tokens_(burst), last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// HTTP backends

HttpBackend::HttpBackend(BackendSpec spec)
    : Backend(std::move(spec)), limiter_(spec_.max_in_flight), bucket_(spec_.rate_per_s, spec_.burst) {
  spec_.validate();
  const auto scheme_end = spec_.endpoint.find("://");
  const auto path_start = spec_.endpoint.find('/', scheme_end + 3);
  base_ = spec_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : spec_.endpoint.substr(path_start);
  if (const char* key = std::getenv(spec_.auth_env().c_str()); key && *key) api_key_ = key;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base_.rfind("https://", 0) == 0) throw ValidationError("https endpoints need a build with OpenSSL");
#endif
}

std::string HttpBackend::redact(std::string text) const {
  if (!api_key_) return text;
  for (auto pos = text.find(*api_key_); pos != std::string::npos; pos = text.find(*api_key_, pos))
    text.replace(pos, api_key_->size(), "[REDACTED]");
  return text;
}

std::string HttpBackend::post_once(const std::string& body) {
  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(spec_.timeout_s);
  const auto usecs = static_cast<time_t>((spec_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  if (spec_.trace) spdlog::debug("[{}] POST {}{} body={}", spec_.name, base_, path_, redact(body));
  bucket_.acquire();
  InFlightLimiter::Guard guard(limiter_);
  ++stats_.requests;
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) throw BackendError(fmt::format("{}: {}", spec_.name, httplib::to_string(res.error())), true);
  if (spec_.trace) spdlog::debug("[{}] status={} body={}", spec_.name, res->status, redact(res->body));
  if (res->status == 429 || res->status >= 500)
    throw BackendError(fmt::format("{}: HTTP {}", spec_.name, res->status), true);
  if (res->status < 200 || res->status >= 300)
    throw BackendError(fmt::format("{}: HTTP {}", spec_.name, res->status), false);
  return res->body;
}

std::string HttpBackend::post_with_retries(const std::string& body) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return parse_response(post_once(body));
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= spec_.retries) {
        ++stats_.failures;
        throw;
      }
      ++stats_.retries;
      const auto backoff = std::chrono::milliseconds(std::min<long>(100L << std::min<std::size_t>(attempt, 6), 5000));
      spdlog::warn("{}: {} (retry {}/{} in {} ms)", spec_.name, e.what(), attempt + 1, spec_.retries,
                   backoff.count());
      std::this_thread::sleep_for(backoff);
    }
  }
}

std::string HttpBackend::translate(std::string_view prompt, std::string_view source) {
  if (source.empty()) throw ValidationError("cannot translate an empty source");
  return post_with_retries(request_body(prompt, source));
}

SampleResult HttpBackend::sample(std::string_view prompt, std::string_view source, std::size_t k) {
  SampleResult r;
  r.requested = k;
  std::unordered_set<std::string> seen;
  std::string last_error;
  const auto body = request_body(prompt, source);
  for (std::size_t i = 0; i < k; ++i) {
    try {
      auto t = post_with_retries(body);
      if (seen.insert(t).second) r.texts.push_back(std::move(t));
      else ++r.duplicates;
    } catch (const BackendError& e) {
      ++r.failures;
      last_error = e.what();
    }
  }
  if (r.texts.empty()) throw BackendError(fmt::format("all {} draws failed: {}", k, last_error), false);
  return r;
}

std::string ChatLlmBackend::request_body(std::string_view prompt, std::string_view source) const {
  std::string content{prompt};
  content += "\n\n";
  content += source;
  json j;
  j["model"] = spec_.model;
  j["messages"] = json::array({json{{"role", "user"}, {"content", content}}});
  j["temperature"] = spec_.temperature;
  j["n"] = 1;
  return j.dump();
}

std::string ChatLlmBackend::parse_response(std::string_view body) const {
  try {
    const auto j = json::parse(body);
    const auto& msg = j.at("choices").at(0).at("message").at("content");
    auto out = text::trim(msg.get<std::string>());
    if (out.empty()) throw BackendError(spec_.name + ": empty completion", true);
    return out;
  } catch (const json::exception& e) {
    throw BackendError(fmt::format("{}: malformed response: {}", spec_.name, e.what()), false);
  }
}

std::string MtApiBackend::request_body(std::string_view prompt, std::string_view source) const {
  json j;
  j["text"] = source;
  j["source_lang"] = "en";
  j["target_lang"] = "hi";
  j["instruction"] = prompt;
  if (!spec_.model.empty()) j["model"] = spec_.model;
  j["temperature"] = spec_.temperature;
  return j.dump();
}

std::string MtApiBackend::parse_response(std::string_view body) const {
  try {
    auto out = text::trim(json::parse(body).at("translation").get<std::string>());
    if (out.empty()) throw BackendError(spec_.name + ": empty translation", true);
    return out;
  } catch (const json::exception& e) {
    throw BackendError(fmt::format("{}: malformed response: {}", spec_.name, e.what()), false);
  }
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case BackendKind::mock:
      return std::make_unique<MockBackend>(spec, spec.script.empty() ? MockScript{} : MockScript::load(spec.script));
    case BackendKind::chat_llm: return std::make_unique<ChatLlmBackend>(spec);
    case BackendKind::mt_api: return std::make_unique<MtApiBackend>(spec);
  }
  throw ValidationError("unknown backend kind");
}

std::vector<rerank::Candidate> build_pool(const std::optional<std::string>& base,
                                          std::span<const std::string> sampled) {
  std::vector<rerank::Candidate> pool;
  std::unordered_set<std::string> seen;
  auto push = [&](const std::string& t, rerank::Origin o) {
    if (t.empty() || !seen.insert(t).second) return;
    pool.push_back({t, o, pool.size()});
  };
  if (base) push(*base, rerank::Origin::base_system);
  for (const auto& t : sampled) push(t, rerank::Origin::sampled);
  return pool;
}

// ---------------------------------------------------------------------------

std::string BackendOracle::prompt(Gender expected) {
  return fmt::format(
      "You are checking a Hindi translation. The English source refers to a {} person. Answer with exactly one "
      "word: preserved if a Hindi reader can recover that gender, wrong_gender if the Hindi implies the other "
      "gender, neutralized otherwise.",
      to_string(expected));
}

std::optional<cue::PreservationState> BackendOracle::judge(std::string_view source, std::string_view hindi,
                                                           Gender expected) {
  std::string payload{source};
  payload += "\n";
  payload += hindi;
  auto answer = text::to_lower_ascii(text::trim(backend_.translate(prompt(expected), payload)));
  while (!answer.empty() && !std::isalpha(static_cast<unsigned char>(answer.back()))) answer.pop_back();
  return cue::parse_state(answer);
}

}  // namespace fidelity::backends
