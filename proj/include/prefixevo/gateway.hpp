#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefixevo/genome.hpp"

namespace prefixevo {

struct DecodingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 32768;
  std::vector<std::string> stop;

  void validate() const;
};

enum class InjectionMode { RawCompletionTemplate, AssistantPrefill };

inline constexpr std::string_view kDefaultRawTemplate =
    "<|begin_of_sentence|><|User|>{query}<|Assistant|>{prefix}";

struct PrefixInjection {
  InjectionMode mode = InjectionMode::RawCompletionTemplate;
  std::string tmpl = std::string(kDefaultRawTemplate);
  bool close_think = false;
  /// Merged into every request body, e.g. `{"continue_final_message": true}` for vLLM prefill.
  nlohmann::json extra_body = nlohmann::json::object();

  void validate() const;
};

/// `<think>\n` + text, plus `</think>` when the block is closed.
std::string render_prefix_block(std::string_view text, bool close_think);

enum class Split { None, Validation, Test };
std::string_view to_string(Split s);

/// Who issued a request and on what data. Travels with the request for auditing,
/// never in the wire body.
struct Provenance {
  std::string role;  ///< "target", "operator" or "judge"
  Split split = Split::None;
  std::string item_id;
  std::string prefix_id;
};

struct WireRequest {
  std::string path;  ///< "/v1/completions" or "/v1/chat/completions"
  nlohmann::json body;
  /// The request opened a think block that the reply continues.
  bool prefill_open = false;
  Provenance provenance;

  std::string bytes() const { return body.dump(); }
};

WireRequest render_request(std::string_view query, std::string_view prefix_text,
                           const PrefixInjection& injection, const DecodingParams& params,
                           std::string_view model, std::optional<std::int64_t> seed = std::nullopt);

inline WireRequest render_request(std::string_view query, const ThinkPrefix& prefix,
                                  const PrefixInjection& injection, const DecodingParams& params,
                                  std::string_view model,
                                  std::optional<std::int64_t> seed = std::nullopt) {
  return render_request(query, prefix.text, injection, params, model, seed);
}

/// Plain single-turn chat request, used for operator and judge prompts.
WireRequest render_chat_request(std::string_view prompt, const DecodingParams& params,
                                std::string_view model,
                                std::optional<std::int64_t> seed = std::nullopt);

enum class TokenSource { ApiUsage, Approximated };

struct ModelReply {
  std::string raw_text;
  /// Message body as sent by the server, without a separately returned reasoning field.
  /// Operator and judge output is read from here.
  std::string content;
  std::optional<std::string> thinking;
  std::string answer;
  std::int64_t completion_tokens = 0;
  TokenSource token_source = TokenSource::Approximated;
};

/// Splits a completion into thinking and answer. With `prefill_open` the think block was
/// opened by the request, so thinking runs from the start of `raw` to the first `</think>`.
ModelReply parse_reply(std::string_view raw, std::optional<std::int64_t> usage_tokens,
                       bool prefill_open = false);

struct WireResponse {
  int status = 200;
  std::string body;
};

/// Connection-level failure (refused, reset, timeout). Always retryable.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual WireResponse send(const WireRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

struct RetryPolicy {
  int retries = 3;
  double base_seconds = 1.0;
  double factor = 2.0;
  double jitter = 0.2;
  double cap_seconds = 30.0;

  /// Delay before retry number `retry` (1-based): base * factor^(retry-1), jittered, capped.
  double delay_seconds(int retry, std::mt19937_64& rng) const;
};

using Sleeper = std::function<void(double seconds)>;

struct GenerateResult {
  ModelReply reply;
  int attempts = 0;
};

/// Shared entry point for all model I/O. Bounds in-flight requests, retries transport
/// and 5xx failures with exponential backoff, and parses OpenAI-compatible bodies.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy = {}, int concurrency = 4,
          Sleeper sleeper = {});

  GenerateResult generate(const WireRequest& request);

  std::string model_id() const { return backend_->model_id(); }
  Backend& backend() { return *backend_; }
  /// Total send() attempts so far, including retries.
  std::uint64_t attempts() const { return attempts_.load(); }
  const RetryPolicy& policy() const { return policy_; }

  /// Called once per generate() before the first attempt.
  void set_observer(std::function<void(const WireRequest&)> observer);

  static constexpr int kMaxConcurrency = 256;

 private:
  ModelReply parse_body(const WireRequest& request, const std::string& body) const;

  std::shared_ptr<Backend> backend_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  std::counting_semaphore<kMaxConcurrency> slots_;
  std::atomic<std::uint64_t> attempts_{0};
  std::mutex rng_mutex_;
  std::mt19937_64 jitter_rng_{0x5eed};
  std::mutex observer_mutex_;
  std::function<void(const WireRequest&)> observer_;
};

struct HttpBackendConfig {
  std::string base_url;
  std::string api_key;
  std::string model;
  double timeout_seconds = 600.0;

  /// Fills base URL, key and timeout from PREFIXEVO_BASE_URL, PREFIXEVO_API_KEY and
  /// PREFIXEVO_TIMEOUT; explicit non-empty fields win.
  static HttpBackendConfig from_env(HttpBackendConfig overrides);
};

/// OpenAI-compatible HTTP(S) endpoint.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  WireResponse send(const WireRequest& request) override;
  std::string model_id() const override { return config_.model; }

 private:
  HttpBackendConfig config_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // any path below the origin, without a trailing /v1
};

}  // namespace prefixevo
