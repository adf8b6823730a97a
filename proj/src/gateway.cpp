#include "prefixevo/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

void DecodingParams::validate() const {
  if (!(temperature >= 0.0)) fail(ErrorCode::ConfigError, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) fail(ErrorCode::ConfigError, "top_p must be in (0, 1]");
  if (max_tokens <= 0) fail(ErrorCode::ConfigError, "max_tokens must be positive");
}

void PrefixInjection::validate() const {
  if (mode == InjectionMode::RawCompletionTemplate) {
    if (tmpl.find("{query}") == std::string::npos || tmpl.find("{prefix}") == std::string::npos) {
      fail(ErrorCode::TemplateError, "injection template needs {query} and {prefix} placeholders");
    }
  }
  if (!extra_body.is_object()) fail(ErrorCode::ConfigError, "extra_body must be a JSON object");
}

std::string render_prefix_block(std::string_view text, bool close_think) {
  std::string out(kThinkOpen);
  out += '\n';
  out += text;
  if (close_think) out += kThinkClose;
  return out;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::None: return "none";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "none";
}

namespace {

void apply_params(nlohmann::json& body, const DecodingParams& params,
                  std::optional<std::int64_t> seed) {
  body["temperature"] = params.temperature;
  body["top_p"] = params.top_p;
  body["max_tokens"] = params.max_tokens;
  if (!params.stop.empty()) body["stop"] = params.stop;
  if (seed) body["seed"] = *seed;
}

}  // namespace

WireRequest render_request(std::string_view query, std::string_view prefix_text,
                           const PrefixInjection& injection, const DecodingParams& params,
                           std::string_view model, std::optional<std::int64_t> seed) {
  if (text::trim(query).empty()) fail(ErrorCode::TemplateError, "query is empty");
  injection.validate();
  validate_prefix_text(prefix_text);

  WireRequest req;
  req.prefill_open = !injection.close_think;
  const std::string block = render_prefix_block(prefix_text, injection.close_think);
  req.body = nlohmann::json::object();
  req.body["model"] = model;
  if (injection.mode == InjectionMode::RawCompletionTemplate) {
    req.path = "/v1/completions";
    req.body["prompt"] = text::render_placeholders(
        injection.tmpl, {{"query", std::string(query)}, {"prefix", block}});
  } else {
    req.path = "/v1/chat/completions";
    req.body["messages"] = nlohmann::json::array({
        {{"role", "user"}, {"content", query}},
        {{"role", "assistant"}, {"content", block}},
    });
  }
  apply_params(req.body, params, seed);
  for (const auto& [key, value] : injection.extra_body.items()) req.body[key] = value;
  req.provenance.role = "target";
  return req;
}

WireRequest render_chat_request(std::string_view prompt, const DecodingParams& params,
                                std::string_view model, std::optional<std::int64_t> seed) {
  WireRequest req;
  req.path = "/v1/chat/completions";
  req.body = nlohmann::json::object();
  req.body["model"] = model;
  req.body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  apply_params(req.body, params, seed);
  return req;
}

ModelReply parse_reply(std::string_view raw, std::optional<std::int64_t> usage_tokens,
                       bool prefill_open) {
  ModelReply reply;
  reply.raw_text = std::string(raw);
  reply.content = reply.raw_text;
  if (usage_tokens) {
    reply.completion_tokens = *usage_tokens;
    reply.token_source = TokenSource::ApiUsage;
  } else {
    reply.completion_tokens = static_cast<std::int64_t>(text::split_words(raw).size());
    reply.token_source = TokenSource::Approximated;
  }

  const auto open = raw.find(kThinkOpen);
  const auto close = raw.find(kThinkClose);
  if (open != std::string_view::npos && (close == std::string_view::npos || open < close)) {
    const auto body_start = open + kThinkOpen.size();
    const auto end = raw.find(kThinkClose, body_start);
    if (end == std::string_view::npos) {
      reply.answer = reply.raw_text;
      return reply;
    }
    reply.thinking = std::string(raw.substr(body_start, end - body_start));
    reply.answer = std::string(raw.substr(0, open)) +
                   std::string(raw.substr(end + kThinkClose.size()));
    return reply;
  }
  if (prefill_open && close != std::string_view::npos) {
    reply.thinking = std::string(raw.substr(0, close));
    reply.answer = std::string(raw.substr(close + kThinkClose.size()));
    return reply;
  }
  reply.answer = reply.raw_text;
  return reply;
}

double RetryPolicy::delay_seconds(int retry, std::mt19937_64& rng) const {
  double d = base_seconds * std::pow(factor, std::max(0, retry - 1));
  if (jitter > 0.0) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    d *= 1.0 + jitter * (2.0 * u - 1.0);
  }
  return std::clamp(d, 0.0, cap_seconds);
}

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy, int concurrency,
                 Sleeper sleeper)
    : backend_(std::move(backend)),
      policy_(policy),
      sleeper_(std::move(sleeper)),
      slots_(std::clamp(concurrency, 1, kMaxConcurrency)) {
  if (!backend_) fail(ErrorCode::ConfigError, "gateway needs a backend");
  if (policy_.retries < 0) fail(ErrorCode::ConfigError, "retries must be >= 0");
  if (!sleeper_) {
    sleeper_ = [](double seconds) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    };
  }
}

void Gateway::set_observer(std::function<void(const WireRequest&)> observer) {
  std::lock_guard lock(observer_mutex_);
  observer_ = std::move(observer);
}

namespace {

struct SlotGuard {
  std::counting_semaphore<Gateway::kMaxConcurrency>& sem;
  explicit SlotGuard(std::counting_semaphore<Gateway::kMaxConcurrency>& s) : sem(s) {
    sem.acquire();
  }
  ~SlotGuard() { sem.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;
};

bool looks_like_context_overflow(const std::string& body) {
  auto lower = text::to_lower(body);
  return lower.find("context_length_exceeded") != std::string::npos ||
         lower.find("maximum context length") != std::string::npos ||
         lower.find("context length") != std::string::npos;
}

}  // namespace

GenerateResult Gateway::generate(const WireRequest& request) {
  {
    std::lock_guard lock(observer_mutex_);
    if (observer_) observer_(request);
  }
  SlotGuard slot(slots_);
  std::string last_error = "no attempt made";
  const int max_attempts = policy_.retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    attempts_.fetch_add(1);
    bool retryable = false;
    try {
      WireResponse resp = backend_->send(request);
      if (resp.status >= 200 && resp.status < 300) {
        return {parse_body(request, resp.body), attempt};
      }
      if (resp.status == 401 || resp.status == 403) {
        fail(ErrorCode::AuthError, "backend rejected credentials (HTTP " +
                                       std::to_string(resp.status) + ")");
      }
      if ((resp.status == 400 || resp.status == 413 || resp.status == 422) &&
          looks_like_context_overflow(resp.body)) {
        fail(ErrorCode::ContextOverflow, "request exceeds the model context: " + resp.body);
      }
      if (resp.status == 429 || resp.status >= 500) {
        retryable = true;
        last_error = "HTTP " + std::to_string(resp.status);
      } else {
        fail(ErrorCode::BadResponse,
             "HTTP " + std::to_string(resp.status) + " from backend: " + resp.body);
      }
    } catch (const TransportError& e) {
      retryable = true;
      last_error = e.what();
    }
    if (retryable && attempt < max_attempts) {
      double delay;
      {
        std::lock_guard lock(rng_mutex_);
        delay = policy_.delay_seconds(attempt, jitter_rng_);
      }
      sleeper_(delay);
    }
  }
  fail(ErrorCode::BackendUnavailable, "backend unavailable after " +
                                          std::to_string(max_attempts) +
                                          " attempts: " + last_error);
}

ModelReply Gateway::parse_body(const WireRequest& request, const std::string& body) const {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::BadResponse, "backend body is not JSON");
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    fail(ErrorCode::BadResponse, "backend body has no choices");
  }
  const auto& choice = (*choices)[0];
  std::string raw;
  std::string content;
  bool prefill_open = request.prefill_open;
  if (choice.contains("text") && choice["text"].is_string()) {
    raw = choice["text"].get<std::string>();
  } else if (choice.contains("message") && choice["message"].is_object()) {
    const auto& msg = choice["message"];
    if (msg.contains("content") && msg["content"].is_string()) {
      raw = msg["content"].get<std::string>();
    }
    content = raw;
    // Servers running a reasoning parser return the think block separately.
    if (msg.contains("reasoning_content") && msg["reasoning_content"].is_string()) {
      raw = std::string(kThinkOpen) + msg["reasoning_content"].get<std::string>() +
            std::string(kThinkClose) + raw;
      prefill_open = false;
    }
  } else {
    fail(ErrorCode::BadResponse, "choice carries neither text nor message");
  }
  std::optional<std::int64_t> usage;
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    if (auto ct = u->find("completion_tokens"); ct != u->end() && ct->is_number_integer()) {
      usage = ct->get<std::int64_t>();
    }
  }
  auto reply = parse_reply(raw, usage, prefill_open);
  if (choice.contains("message")) reply.content = std::move(content);
  return reply;
}

}  // namespace prefixevo
