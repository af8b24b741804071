#include "medlink/chat_client.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "medlink/errors.hpp"

namespace medlink {

std::string build_chat_payload(const CompletionRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt_text}}});
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_output;
  return j.dump();
}

CompletionResponse parse_chat_response(const std::string& body) {
  CompletionResponse out;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      out.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::uint64_t{0});
      out.usage.completion_tokens = j["usage"].value("completion_tokens", std::uint64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::backend, std::string("malformed chat-completion response: ") + e.what());
  }
  out.source = ResponseSource::remote;
  return out;
}

RemoteChatBackend::RemoteChatBackend(RemoteConfig config, Clock& clock, RateLimiter* limiter)
    : config_(std::move(config)), clock_(clock), limiter_(limiter), jitter_rng_(config_.jitter_seed) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::config, "endpoint must start with http:// or https://: " + config_.base_url);
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

std::string RemoteChatBackend::describe() const { return "remote:" + config_.base_url; }

int RemoteChatBackend::attempts_made() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

std::chrono::milliseconds RemoteChatBackend::backoff_delay(int attempt) {
  double ms = static_cast<double>(config_.base_delay.count()) * std::pow(config_.backoff_factor, attempt - 1);
  if (config_.jitter) {
    std::lock_guard lock(mu_);
    // Scale into [0.5, 1.0) of the nominal delay.
    const double u = static_cast<double>(jitter_rng_() >> 11) * 0x1.0p-53;
    ms *= 0.5 + 0.5 * u;
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

CompletionResponse RemoteChatBackend::complete(const CompletionRequest& request) {
  const auto payload = build_chat_payload(request);
  httplib::Headers headers;
  if (config_.api_key && !config_.api_key->empty()) {
    headers.emplace("Authorization", "Bearer " + *config_.api_key);
  }
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) clock_.sleep_for(backoff_delay(attempt - 1));
    if (limiter_) limiter_->acquire();
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::auth, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 408 || status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorKind::backend, "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));
    }
    auto response = parse_chat_response(result->body);
    response.elapsed_seconds = elapsed.count();
    return response;
  }
  throw Error(ErrorKind::backend, "retry budget exhausted after " + std::to_string(config_.max_attempts) +
                                      " attempts (" + last_error + ")");
}

}  // namespace medlink
