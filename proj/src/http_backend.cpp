#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "prefixevo/error.hpp"
#include "prefixevo/gateway.hpp"

namespace prefixevo {

HttpBackendConfig HttpBackendConfig::from_env(HttpBackendConfig c) {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  if (c.base_url.empty()) c.base_url = env("PREFIXEVO_BASE_URL");
  if (c.api_key.empty()) c.api_key = env("PREFIXEVO_API_KEY");
  if (auto t = env("PREFIXEVO_TIMEOUT"); !t.empty()) {
    try {
      c.timeout_seconds = std::stod(t);
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "PREFIXEVO_TIMEOUT is not a number: " + t);
    }
  }
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    fail(ErrorCode::ConfigError, "no endpoint configured; set base_url or PREFIXEVO_BASE_URL");
  }
  if (config_.model.empty()) fail(ErrorCode::ConfigError, "backend model id is empty");
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorCode::ConfigError, "base URL needs a scheme: " + config_.base_url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  if (path_prefix_.size() >= 3 && path_prefix_.compare(path_prefix_.size() - 3, 3, "/v1") == 0) {
    path_prefix_.resize(path_prefix_.size() - 3);
  }
}

WireResponse HttpBackend::send(const WireRequest& request) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto result = client.Post(path_prefix_ + request.path, headers, request.bytes(),
                            "application/json");
  if (!result) throw TransportError("HTTP transport error: " + httplib::to_string(result.error()));
  return {result->status, result->body};
}

}  // namespace prefixevo
