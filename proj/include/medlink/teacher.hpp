#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medlink {

inline constexpr double kDefaultTemperature = 0.0;
inline constexpr int kDefaultMaxOutput = 512;

struct CompletionRequest {
  std::string model;
  std::string prompt_text;
  double temperature = kDefaultTemperature;
  int max_output = kDefaultMaxOutput;
  // Label of the gold candidate. Only the oracle mock looks at it; it never
  // reaches the wire or the cache key.
  std::optional<std::string> gold_label;
};

struct Usage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

enum class ResponseSource { remote, cache, mock };

const char* to_string(ResponseSource source);
ResponseSource parse_response_source(std::string_view s);

struct CompletionResponse {
  std::string text;
  Usage usage;
  ResponseSource source = ResponseSource::remote;
  double elapsed_seconds = 0.0;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// Rough token estimate used by the mocks: ceil(bytes / 4).
std::uint64_t estimate_tokens(std::string_view text);

enum class MockKind {
  identity,  // echoes the prompt's candidate list in input order
  oracle,    // gold first, the rest in input order
  reverse,   // input order reversed
};

MockKind parse_mock_kind(std::string_view s);
const char* to_string(MockKind kind);

class MockBackend final : public CompletionBackend {
 public:
  explicit MockBackend(MockKind kind) : kind_(kind) {}

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override;

 private:
  MockKind kind_;
};

// Injectable time source so backoff and rate limiting are testable.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;

  static SteadyClock& instance();
};

// Time only moves when someone sleeps.
class ManualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;
  void advance(duration d);
  duration total_slept() const;

 private:
  mutable std::mutex mu_;
  time_point now_{};
  duration slept_{};
};

// At most `per_second` dispatches in any half-open one-second window.
// per_second == 0 disables limiting.
class RateLimiter {
 public:
  RateLimiter(std::size_t per_second, Clock& clock);

  void acquire();
  std::size_t limit() const noexcept { return per_second_; }

 private:
  std::size_t per_second_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> recent_;
};

struct CallRecord {
  std::string model;
  ResponseSource source = ResponseSource::remote;
  Usage usage;
  double seconds = 0.0;
};

struct ModelUsage {
  std::uint64_t calls = 0;
  std::uint64_t backend_calls = 0;  // calls that reached a backend
  std::uint64_t remote_calls = 0;
  std::uint64_t mock_calls = 0;
  std::uint64_t cache_hits = 0;
  // Billable totals, i.e. backend calls only.
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  double seconds = 0.0;
  // Cost measured outside this tool (e.g. a published comparison).
  std::optional<double> reported_cost_usd;
};

// Thread-safe running totals per model.
class UsageLedger {
 public:
  void record(const CallRecord& call);
  std::map<std::string, ModelUsage> totals() const;
  std::vector<CallRecord> records() const;
  std::uint64_t backend_calls() const;
  std::uint64_t cache_hits() const;

  std::string to_json() const;
  void save(const std::filesystem::path& path) const;
  // Reads the "models" totals written by save(); records are not restored.
  static std::map<std::string, ModelUsage> load_totals(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
  std::map<std::string, ModelUsage> totals_;
};

struct Price {
  std::optional<double> prompt_per_1k;
  std::optional<double> completion_per_1k;
  std::optional<double> per_gpu_second;
};

using PriceTable = std::map<std::string, Price>;

PriceTable parse_price_table(std::string_view json_text, const std::string& source = "<prices>");
PriceTable load_price_table(const std::filesystem::path& path);

struct CostRow {
  std::string model;
  ModelUsage usage;
  std::optional<double> cost_usd;  // empty = unpriced
  std::string basis;               // tokens | gpu-seconds | reported | unpriced
};

struct CostReport {
  std::vector<CostRow> rows;
  double total_usd = 0.0;
  std::size_t unpriced = 0;

  std::string to_table() const;
  std::string to_json() const;
};

CostReport cost_report(const std::map<std::string, ModelUsage>& totals, const PriceTable& prices);

// Delegates to the backend and records the call.
CompletionResponse complete(CompletionBackend& backend, const CompletionRequest& request,
                            UsageLedger& ledger);

}  // namespace medlink
