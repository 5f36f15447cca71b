#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/util/digest.hpp"
#include "logic_orm/util/io.hpp"
#include "logic_orm/util/url.hpp"

namespace logic_orm {

inline constexpr double kGenerationTemperature = 0.7;
inline constexpr double kJudgeTemperature = 0.0;

struct GenRequest {
  std::vector<Message> messages;
  int n_samples = 1;
  double temperature = kGenerationTemperature;
  int max_tokens = 1024;
  std::uint64_t seed = 0;
  // Routing metadata; neither is part of the request digest.
  std::string tag;
  std::string problem_id;
};

inline void validate(const GenRequest& request) {
  require(!request.messages.empty(), "GenRequest: no messages");
  for (const auto& m : request.messages) {
    require(!m.content.empty(), "GenRequest: empty message content");
  }
  require(request.n_samples >= 1, "GenRequest: n_samples must be >= 1");
  require(request.temperature >= 0.0, "GenRequest: temperature must be >= 0");
  require(request.max_tokens >= 16, "GenRequest: max_tokens must be >= 16");
}

inline json canonical_json(const GenRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return json{{"messages", messages},
              {"n", request.n_samples},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"seed", request.seed}};
}

inline std::string request_digest(const GenRequest& request) {
  return digest::sha256_hex(canonical_json(request).dump());
}

struct GenResponse {
  std::vector<std::string> texts;
  std::string backend_id;
  bool cached = false;
};

enum class BackendKind { Http, Mock };

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string base_url;       // http only
  std::string model_name = "mock";
  int max_in_flight = 4;
  int retry_limit = 3;
  std::optional<std::filesystem::path> cache_dir;
  std::string api_key_env;    // http only; name of the variable, not the key
  std::string script_path;    // mock only
  int backoff_initial_ms = 500;
  int backoff_max_ms = 30'000;
  int timeout_s = 600;
};

inline void validate(const BackendConfig& config) {
  require(config.max_in_flight >= 1, "BackendConfig: max_in_flight must be >= 1");
  require(config.retry_limit >= 0, "BackendConfig: retry_limit must be >= 0");
  if (config.kind == BackendKind::Http) {
    require(!config.base_url.empty(), "BackendConfig: http backend needs base_url");
  }
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  // Returns exactly request.n_samples texts. Retryable failures are raised as
  // ErrorKind::BackendTransient.
  virtual std::vector<std::string> complete(const GenRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock backend.
//
// Script document:
//   {
//     "default": ["text", ...],          // optional; served on a miss
//     "rules": [
//       {"tag": "cot", "problem_id": "p1", "contains": "...", "digest": "...",
//        "texts": ["...", ...]}
//     ]
//   }
// A rule matches when every selector it sets matches the request (`contains`
// is a substring test on the last message). The first matching rule in file
// order wins. Texts are served in order and cycle when n_samples exceeds the
// list. Placeholders: ${sample}, ${problem_id}, ${echo_key}, ${echo_label}
// (the last two come from the echo prefix of the prompt, if any).
// ---------------------------------------------------------------------------

struct MockRule {
  std::optional<std::string> tag;
  std::optional<std::string> problem_id;
  std::optional<std::string> contains;
  std::optional<std::string> digest;
  std::vector<std::string> texts;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::optional<std::vector<std::string>> default_texts;

  static MockScript from_json(const json& j) {
    MockScript script;
    try {
      if (j.contains("default") && !j.at("default").is_null()) {
        script.default_texts = j.at("default").get<std::vector<std::string>>();
      }
      for (const auto& r : j.value("rules", json::array())) {
        MockRule rule;
        auto opt = [&r](const char* name) -> std::optional<std::string> {
          if (r.contains(name) && !r.at(name).is_null()) {
            return r.at(name).get<std::string>();
          }
          return std::nullopt;
        };
        rule.tag = opt("tag");
        rule.problem_id = opt("problem_id");
        rule.contains = opt("contains");
        rule.digest = opt("digest");
        rule.texts = r.at("texts").get<std::vector<std::string>>();
        require(!rule.texts.empty(), "mock rule with no texts");
        script.rules.push_back(std::move(rule));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord,
                  std::string("mock script: ") + e.what());
    }
    return script;
  }

  json to_json() const {
    json rules = json::array();
    for (const auto& rule : this->rules) {
      json r{{"texts", rule.texts}};
      if (rule.tag) r["tag"] = *rule.tag;
      if (rule.problem_id) r["problem_id"] = *rule.problem_id;
      if (rule.contains) r["contains"] = *rule.contains;
      if (rule.digest) r["digest"] = *rule.digest;
      rules.push_back(std::move(r));
    }
    json j{{"rules", rules}};
    if (default_texts) j["default"] = *default_texts;
    return j;
  }
};

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockScript script)
      : script_(std::move(script)),
        id_("mock:" + digest::sha256_hex(script_.to_json().dump()).substr(0, 16)) {}

  std::string id() const override { return id_; }

  std::vector<std::string> complete(const GenRequest& request) override {
    const std::string digest = request_digest(request);
    const std::string& last = request.messages.back().content;
    const std::vector<std::string>* texts = nullptr;
    for (const auto& rule : script_.rules) {
      if (rule.tag && *rule.tag != request.tag) continue;
      if (rule.problem_id && *rule.problem_id != request.problem_id) continue;
      if (rule.digest && *rule.digest != digest) continue;
      if (rule.contains && last.find(*rule.contains) == std::string::npos) continue;
      texts = &rule.texts;
      break;
    }
    if (!texts && script_.default_texts) texts = &*script_.default_texts;
    if (!texts) {
      throw Error(ErrorKind::ScriptMiss, "tag='" + request.tag + "' problem_id='" +
                                             request.problem_id + "' digest=" + digest);
    }
    const auto [echo_label, echo_key] = echo_target(last);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(request.n_samples));
    for (int i = 0; i < request.n_samples; ++i) {
      std::string t = (*texts)[static_cast<std::size_t>(i) % texts->size()];
      t = text::replace_all(std::move(t), "${sample}", std::to_string(i));
      t = text::replace_all(std::move(t), "${problem_id}", request.problem_id);
      t = text::replace_all(std::move(t), "${echo_key}", echo_key);
      t = text::replace_all(std::move(t), "${echo_label}", echo_label);
      out.push_back(std::move(t));
    }
    return out;
  }

  const MockScript& script() const { return script_; }

 private:
  static std::pair<std::string, std::string> echo_target(std::string_view prompt) {
    static constexpr std::string_view kLead = "Given the answer is ";
    const auto pos = prompt.rfind(kLead);
    if (pos == std::string_view::npos) return {};
    const auto rest = prompt.substr(pos + kLead.size());
    const auto open = rest.find(" (");
    const auto close = rest.find(')', open == std::string_view::npos ? 0 : open);
    if (open == std::string_view::npos || close == std::string_view::npos) return {};
    return {std::string(rest.substr(0, open)),
            std::string(rest.substr(open + 2, close - open - 2))};
  }

  MockScript script_;
  std::string id_;
};

inline std::shared_ptr<MockBackend> load_mock_script(
    const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord,
                "mock script " + path.string() + ": " + e.what());
  }
  return std::make_shared<MockBackend>(MockScript::from_json(j));
}

// ---------------------------------------------------------------------------
// Chat-completions HTTP backend.
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace detail

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
  }

  std::string id() const override {
    return "http:" + config_.base_url + "#" + config_.model_name;
  }

  std::vector<std::string> complete(const GenRequest& request) override {
    std::vector<std::string> texts;
    // Some servers ignore `n`; keep asking for the remainder.
    while (static_cast<int>(texts.size()) < request.n_samples) {
      auto batch = post(request, request.n_samples - static_cast<int>(texts.size()));
      for (auto& t : batch) {
        if (static_cast<int>(texts.size()) < request.n_samples) {
          texts.push_back(std::move(t));
        }
      }
    }
    return texts;
  }

 private:
  std::vector<std::string> post(const GenRequest& request, int n) const {
    const auto url = detail::split_url(config_.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    json body = canonical_json(request);
    body.erase("seed");
    body["n"] = n;
    body["model"] = config_.model_name;

    auto res = client.Post(url.path + "/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      throw Error(ErrorKind::BackendTransient,
                  "connection to " + config_.base_url + " failed: " +
                      httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(detail::is_retryable_status(res->status)
                      ? ErrorKind::BackendTransient
                      : ErrorKind::BackendUnavailable,
                  "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    std::vector<std::string> texts;
    try {
      const json reply = json::parse(res->body);
      const json& choices = reply.at("choices");
      if (!choices.is_array() || choices.empty()) {
        throw Error(ErrorKind::MalformedBackendReply, "no choices in reply");
      }
      for (const auto& choice : choices) {
        const json& content = choice.at("message").at("content");
        texts.push_back(content.is_null() ? std::string{} : content.get<std::string>());
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedBackendReply, e.what());
    }
    return texts;
  }

  BackendConfig config_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Content-addressed response cache: one JSON file per response.
// ---------------------------------------------------------------------------

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string key(std::string_view backend_id, std::string_view model_name,
                         const GenRequest& request) {
    return digest::sha256_hex(std::string(backend_id) + "\n" +
                              std::string(model_name) + "\n" +
                              canonical_json(request).dump());
  }

  // Unreadable or inconsistent entries count as misses.
  std::optional<std::vector<std::string>> get(const std::string& key,
                                              int n_samples) const {
    const auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      const json j = json::parse(io::read_file(path));
      auto texts = j.at("texts").get<std::vector<std::string>>();
      if (static_cast<int>(texts.size()) != n_samples) return std::nullopt;
      return texts;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  void put(const std::string& key, const std::vector<std::string>& texts,
           const std::string& backend_id) const {
    json j{{"backend_id", backend_id}, {"texts", texts}};
    io::write_file_atomic(path_for(key), j.dump());
  }

  std::filesystem::path path_for(const std::string& key) const {
    return dir_ / (key + ".json");
  }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Gateway: cache, bounded concurrency, retry with exponential backoff.
// ---------------------------------------------------------------------------

class Gateway {
 public:
  struct Stats {
    long requests = 0;
    long cache_hits = 0;
    long backend_calls = 0;
    long retries = 0;
  };

  Gateway(BackendConfig config, std::shared_ptr<Backend> backend)
      : config_(std::move(config)), backend_(std::move(backend)) {
    validate(config_);
    if (config_.cache_dir) cache_.emplace(*config_.cache_dir);
  }

  // Called with the number of outstanding backend calls each time one starts.
  void set_dispatch_hook(std::function<void(int)> hook) { hook_ = std::move(hook); }

  GenResponse generate(const GenRequest& request) {
    validate(request);
    ++requests_;
    GenResponse response;
    response.backend_id = backend_->id();
    std::string key;
    if (cache_) {
      key = ResponseCache::key(response.backend_id, config_.model_name, request);
      if (auto hit = cache_->get(key, request.n_samples)) {
        ++cache_hits_;
        response.texts = std::move(*hit);
        response.cached = true;
        return response;
      }
    }
    response.texts = call_with_retry(request);
    if (static_cast<int>(response.texts.size()) != request.n_samples) {
      throw Error(ErrorKind::MalformedBackendReply,
                  "expected " + std::to_string(request.n_samples) + " texts, got " +
                      std::to_string(response.texts.size()));
    }
    if (cache_) cache_->put(key, response.texts, response.backend_id);
    return response;
  }

  Stats stats() const {
    return {requests_.load(), cache_hits_.load(), backend_calls_.load(),
            retries_.load()};
  }
  const BackendConfig& config() const { return config_; }
  std::string backend_id() const { return backend_->id(); }

 private:
  class Slot {
   public:
    explicit Slot(Gateway& g) : g_(g) {
      std::unique_lock lock(g_.mu_);
      g_.cv_.wait(lock, [this] { return g_.in_flight_ < g_.config_.max_in_flight; });
      const int now = ++g_.in_flight_;
      lock.unlock();
      if (g_.hook_) g_.hook_(now);
    }
    ~Slot() {
      {
        std::lock_guard lock(g_.mu_);
        --g_.in_flight_;
      }
      g_.cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    Gateway& g_;
  };

  std::vector<std::string> call_with_retry(const GenRequest& request) {
    int delay_ms = config_.backoff_initial_ms;
    for (int attempt = 0;; ++attempt) {
      try {
        Slot slot(*this);
        ++backend_calls_;
        return backend_->complete(request);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::BackendTransient) throw;
        if (attempt >= config_.retry_limit) {
          throw Error(ErrorKind::BackendUnavailable,
                      "gave up after " + std::to_string(attempt + 1) +
                          " attempts: " + e.what());
        }
      }
      ++retries_;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(config_.backoff_max_ms, delay_ms * 2);
    }
  }

  BackendConfig config_;
  std::shared_ptr<Backend> backend_;
  std::optional<ResponseCache> cache_;
  std::function<void(int)> hook_;

  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;

  std::atomic<long> requests_{0};
  std::atomic<long> cache_hits_{0};
  std::atomic<long> backend_calls_{0};
  std::atomic<long> retries_{0};
};

inline std::shared_ptr<Gateway> make_gateway(const BackendConfig& config) {
  validate(config);
  std::shared_ptr<Backend> backend;
  if (config.kind == BackendKind::Mock) {
    require(!config.script_path.empty(), "BackendConfig: mock backend needs script_path");
    backend = load_mock_script(config.script_path);
  } else {
    backend = std::make_shared<HttpBackend>(config);
  }
  return std::make_shared<Gateway>(config, std::move(backend));
}

}  // namespace logic_orm
