#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "medlink/teacher.hpp"

namespace medlink {

struct RemoteConfig {
  // e.g. https://api.openai.com/v1 ; requests go to <base_url>/chat/completions
  std::string base_url;
  std::optional<std::string> api_key;
  std::chrono::seconds timeout{120};
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double backoff_factor = 2.0;
  bool jitter = true;
  std::uint64_t jitter_seed = 0x5eed;
};

inline constexpr const char* kApiKeyEnv = "MEDLINK_API_KEY";
inline constexpr const char* kDefaultStudentUrl = "http://127.0.0.1:8000/v1";

// Chat-completion JSON body for a single user turn carrying the prompt.
std::string build_chat_payload(const CompletionRequest& request);

// Extracts choices[0].message.content and usage; throws Error(backend) on a
// malformed body.
CompletionResponse parse_chat_response(const std::string& body);

// Speaks the chat-completion wire protocol over HTTP(S). Transient failures
// (transport errors, 408, 429, 5xx) are retried with exponential backoff;
// 401/403 fail immediately with Error(auth).
class RemoteChatBackend final : public CompletionBackend {
 public:
  RemoteChatBackend(RemoteConfig config, Clock& clock = SteadyClock::instance(),
                    RateLimiter* limiter = nullptr);

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override;

  int attempts_made() const;

 private:
  std::chrono::milliseconds backoff_delay(int attempt);

  RemoteConfig config_;
  Clock& clock_;
  RateLimiter* limiter_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  mutable std::mutex mu_;
  std::mt19937_64 jitter_rng_;
  int attempts_ = 0;
};

}  // namespace medlink
