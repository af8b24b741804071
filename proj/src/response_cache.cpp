#include "medlink/response_cache.hpp"

#include <functional>
#include <iostream>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

namespace {

nlohmann::ordered_json key_fields(const CompletionRequest& r) {
  return nlohmann::ordered_json::array({r.model, r.prompt_text, r.temperature, r.max_output});
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    throw Error(ErrorKind::io, "cache directory not usable: " + dir_.string());
  }
}

std::string ResponseCache::key(const CompletionRequest& request) {
  return text::sha256_hex(key_fields(request).dump());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::mutex& ResponseCache::lock_for(const std::string& key) {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

std::optional<CompletionResponse> ResponseCache::read_unlocked(const std::string& key,
                                                               const CompletionRequest& request) {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto j = nlohmann::ordered_json::parse(text::read_file(path));
    if (j.at("request") != key_fields(request)) throw Error(ErrorKind::validation, "request fields differ");
    CompletionResponse out;
    out.text = j.at("text").get<std::string>();
    out.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::uint64_t>();
    out.usage.completion_tokens = j.at("usage").at("completion_tokens").get<std::uint64_t>();
    out.source = ResponseSource::cache;
    return out;
  } catch (const std::exception& e) {
    ++corrupt_;
    std::cerr << "warning: ignoring corrupt cache entry " << path.string() << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

std::optional<CompletionResponse> ResponseCache::lookup(const CompletionRequest& request) {
  const auto k = key(request);
  std::lock_guard lock(lock_for(k));
  return read_unlocked(k, request);
}

void ResponseCache::store(const CompletionRequest& request, const CompletionResponse& response) {
  const auto k = key(request);
  std::lock_guard lock(lock_for(k));
  if (const auto existing = read_unlocked(k, request)) {
    if (existing->text != response.text) {
      ++conflicts_;
      std::cerr << "warning: cache conflict for key " << k << ": keeping stored response\n";
    }
    return;
  }
  // Missing or corrupt: write the fresh response.
  nlohmann::ordered_json j;
  j["request"] = key_fields(request);
  j["text"] = response.text;
  j["usage"] = {{"prompt_tokens", response.usage.prompt_tokens},
                {"completion_tokens", response.usage.completion_tokens}};
  j["origin"] = to_string(response.source);
  text::write_file_atomic(path_for(k), j.dump(2) + "\n");
}

CompletionResponse cached_complete(ResponseCache& cache, CompletionBackend& backend,
                                   const CompletionRequest& request, UsageLedger& ledger) {
  if (auto hit = cache.lookup(request)) {
    ledger.record({request.model, ResponseSource::cache, hit->usage, 0.0});
    return *hit;
  }
  auto response = complete(backend, request, ledger);
  cache.store(request, response);
  return response;
}

}  // namespace medlink
