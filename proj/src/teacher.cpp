#include "medlink/teacher.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/promptkit.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

const char* to_string(ResponseSource source) {
  switch (source) {
    case ResponseSource::remote: return "remote";
    case ResponseSource::cache: return "cache";
    case ResponseSource::mock: return "mock";
  }
  return "remote";
}

ResponseSource parse_response_source(std::string_view s) {
  if (s == "remote") return ResponseSource::remote;
  if (s == "cache") return ResponseSource::cache;
  if (s == "mock") return ResponseSource::mock;
  throw Error(ErrorKind::parse, "unknown response source '" + std::string(s) + "'");
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

MockKind parse_mock_kind(std::string_view s) {
  if (s == "identity") return MockKind::identity;
  if (s == "oracle") return MockKind::oracle;
  if (s == "reverse") return MockKind::reverse;
  throw Error(ErrorKind::config, "unknown mock backend '" + std::string(s) + "'");
}

const char* to_string(MockKind kind) {
  switch (kind) {
    case MockKind::identity: return "identity";
    case MockKind::oracle: return "oracle";
    case MockKind::reverse: return "reverse";
  }
  return "identity";
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
  auto labels = last_numbered_list(request.prompt_text);
  if (kind_ == MockKind::reverse) {
    std::reverse(labels.begin(), labels.end());
  } else if (kind_ == MockKind::oracle && request.gold_label) {
    const auto it = std::find(labels.begin(), labels.end(), *request.gold_label);
    if (it != labels.end()) std::rotate(labels.begin(), it, it + 1);
  }
  CompletionResponse out;
  out.text = numbered_list(labels);
  out.usage = {estimate_tokens(request.prompt_text), estimate_tokens(out.text)};
  out.source = ResponseSource::mock;
  return out;
}

std::string MockBackend::describe() const { return std::string("mock:") + to_string(kind_); }

Clock::time_point SteadyClock::now() { return std::chrono::steady_clock::now(); }

void SteadyClock::sleep_for(duration d) { std::this_thread::sleep_for(d); }

SteadyClock& SteadyClock::instance() {
  static SteadyClock clock;
  return clock;
}

Clock::time_point ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_for(duration d) {
  std::lock_guard lock(mu_);
  if (d > duration::zero()) {
    now_ += d;
    slept_ += d;
  }
}

void ManualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

Clock::duration ManualClock::total_slept() const {
  std::lock_guard lock(mu_);
  return slept_;
}

RateLimiter::RateLimiter(std::size_t per_second, Clock& clock) : per_second_(per_second), clock_(clock) {}

void RateLimiter::acquire() {
  if (per_second_ == 0) return;
  constexpr auto kWindow = std::chrono::seconds(1);
  // Held while sleeping: waiters queue behind the one at the head.
  std::lock_guard lock(mu_);
  while (true) {
    const auto now = clock_.now();
    while (!recent_.empty() && now - recent_.front() >= kWindow) recent_.pop_front();
    if (recent_.size() < per_second_) {
      recent_.push_back(now);
      return;
    }
    clock_.sleep_for(recent_.front() + kWindow - now);
  }
}

void UsageLedger::record(const CallRecord& call) {
  std::lock_guard lock(mu_);
  records_.push_back(call);
  auto& t = totals_[call.model];
  ++t.calls;
  if (call.source == ResponseSource::cache) {
    ++t.cache_hits;
    return;
  }
  ++t.backend_calls;
  if (call.source == ResponseSource::remote) ++t.remote_calls;
  if (call.source == ResponseSource::mock) ++t.mock_calls;
  t.prompt_tokens += call.usage.prompt_tokens;
  t.completion_tokens += call.usage.completion_tokens;
  t.seconds += call.seconds;
}

std::map<std::string, ModelUsage> UsageLedger::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

std::vector<CallRecord> UsageLedger::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::uint64_t UsageLedger::backend_calls() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [_, t] : totals_) n += t.backend_calls;
  return n;
}

std::uint64_t UsageLedger::cache_hits() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [_, t] : totals_) n += t.cache_hits;
  return n;
}

namespace {

nlohmann::ordered_json usage_json(const ModelUsage& u) {
  nlohmann::ordered_json j;
  j["calls"] = u.calls;
  j["backend_calls"] = u.backend_calls;
  j["remote_calls"] = u.remote_calls;
  j["mock_calls"] = u.mock_calls;
  j["cache_hits"] = u.cache_hits;
  j["prompt_tokens"] = u.prompt_tokens;
  j["completion_tokens"] = u.completion_tokens;
  j["seconds"] = u.seconds;
  if (u.reported_cost_usd) j["reported_cost_usd"] = *u.reported_cost_usd;
  return j;
}

}  // namespace

std::string UsageLedger::to_json() const {
  const auto totals = this->totals();
  nlohmann::ordered_json j;
  std::uint64_t backend = 0;
  std::uint64_t hits = 0;
  j["models"] = nlohmann::ordered_json::object();
  for (const auto& [model, u] : totals) {
    j["models"][model] = usage_json(u);
    backend += u.backend_calls;
    hits += u.cache_hits;
  }
  j["backend_calls"] = backend;
  j["cache_hits"] = hits;
  return j.dump(2) + "\n";
}

void UsageLedger::save(const std::filesystem::path& path) const { text::write_file_atomic(path, to_json()); }

std::map<std::string, ModelUsage> UsageLedger::load_totals(const std::filesystem::path& path) {
  std::map<std::string, ModelUsage> out;
  try {
    const auto j = nlohmann::json::parse(text::read_file(path));
    for (const auto& [model, u] : j.at("models").items()) {
      ModelUsage m;
      m.calls = u.value("calls", std::uint64_t{0});
      m.backend_calls = u.value("backend_calls", std::uint64_t{0});
      m.remote_calls = u.value("remote_calls", std::uint64_t{0});
      m.mock_calls = u.value("mock_calls", std::uint64_t{0});
      m.cache_hits = u.value("cache_hits", std::uint64_t{0});
      m.prompt_tokens = u.value("prompt_tokens", std::uint64_t{0});
      m.completion_tokens = u.value("completion_tokens", std::uint64_t{0});
      m.seconds = u.value("seconds", 0.0);
      if (u.contains("reported_cost_usd")) m.reported_cost_usd = u["reported_cost_usd"].get<double>();
      out[model] = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": invalid ledger: " + e.what());
  }
  return out;
}

PriceTable parse_price_table(std::string_view json_text, const std::string& source) {
  PriceTable table;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& [model, p] : j.items()) {
      Price price;
      if (p.contains("prompt_per_1k")) price.prompt_per_1k = p["prompt_per_1k"].get<double>();
      if (p.contains("completion_per_1k")) price.completion_per_1k = p["completion_per_1k"].get<double>();
      if (p.contains("gpu_second")) price.per_gpu_second = p["gpu_second"].get<double>();
      if (!price.prompt_per_1k && !price.completion_per_1k && !price.per_gpu_second) {
        throw Error(ErrorKind::validation, source + ": price entry for " + model + " sets no rate");
      }
      table[model] = price;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, source + ": " + e.what());
  }
  return table;
}

PriceTable load_price_table(const std::filesystem::path& path) {
  return parse_price_table(text::read_file(path), path.string());
}

CostReport cost_report(const std::map<std::string, ModelUsage>& totals, const PriceTable& prices) {
  CostReport report;
  for (const auto& [model, usage] : totals) {
    CostRow row{model, usage, std::nullopt, "unpriced"};
    const auto it = prices.find(model);
    if (usage.reported_cost_usd) {
      row.cost_usd = *usage.reported_cost_usd;
      row.basis = "reported";
    } else if (it != prices.end()) {
      const Price& p = it->second;
      if (p.prompt_per_1k || p.completion_per_1k) {
        row.cost_usd = static_cast<double>(usage.prompt_tokens) * p.prompt_per_1k.value_or(0.0) / 1000.0 +
                       static_cast<double>(usage.completion_tokens) * p.completion_per_1k.value_or(0.0) / 1000.0;
        row.basis = "tokens";
      } else {
        row.cost_usd = usage.seconds * *p.per_gpu_second;
        row.basis = "gpu-seconds";
      }
    }
    if (row.cost_usd) {
      report.total_usd += *row.cost_usd;
    } else {
      ++report.unpriced;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string CostReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(28) << "model" << std::right << std::setw(8) << "calls" << std::setw(9)
      << "backend" << std::setw(8) << "cached" << std::setw(12) << "prompt_tok" << std::setw(12)
      << "compl_tok" << std::setw(12) << "cost ($)" << "  basis\n";
  for (const auto& r : rows) {
    std::ostringstream cost;
    if (r.cost_usd) {
      cost << std::fixed << std::setprecision(3) << *r.cost_usd;
    } else {
      cost << "unpriced";
    }
    out << std::left << std::setw(28) << r.model << std::right << std::setw(8) << r.usage.calls
        << std::setw(9) << r.usage.backend_calls << std::setw(8) << r.usage.cache_hits << std::setw(12)
        << r.usage.prompt_tokens << std::setw(12) << r.usage.completion_tokens << std::setw(12)
        << cost.str() << "  " << r.basis << '\n';
  }
  out << std::left << std::setw(28) << "total" << std::right << std::setw(61) << [&] {
    std::ostringstream t;
    t << std::fixed << std::setprecision(3) << total_usd;
    return t.str();
  }() << '\n';
  return out.str();
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["model"] = r.model;
    row["usage"] = usage_json(r.usage);
    row["cost_usd"] = r.cost_usd ? nlohmann::ordered_json(*r.cost_usd) : nlohmann::ordered_json("unpriced");
    row["basis"] = r.basis;
    j["rows"].push_back(row);
  }
  j["total_usd"] = total_usd;
  j["unpriced"] = unpriced;
  return j.dump(2) + "\n";
}

CompletionResponse complete(CompletionBackend& backend, const CompletionRequest& request,
                            UsageLedger& ledger) {
  auto response = backend.complete(request);
  ledger.record({request.model, response.source, response.usage, response.elapsed_seconds});
  return response;
}

}  // namespace medlink
