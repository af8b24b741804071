#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "medlink/teacher.hpp"

namespace medlink {

// One JSON file per request under `dir`, named by the SHA-256 of
// (model, prompt_text, temperature, max_output). The backend URL is not part
// of the key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const CompletionRequest& request);
  std::filesystem::path path_for(const std::string& key) const;

  // Unreadable or mismatching files count as a miss and bump corrupt_reads().
  std::optional<CompletionResponse> lookup(const CompletionRequest& request);

  // Never replaces a stored response with different text; such attempts are
  // counted in conflicts() and the stored bytes win.
  void store(const CompletionRequest& request, const CompletionResponse& response);

  std::size_t conflicts() const noexcept { return conflicts_.load(); }
  std::size_t corrupt_reads() const noexcept { return corrupt_.load(); }

 private:
  std::mutex& lock_for(const std::string& key);
  std::optional<CompletionResponse> read_unlocked(const std::string& key, const CompletionRequest& request);

  std::filesystem::path dir_;
  std::array<std::mutex, 64> stripes_;
  std::atomic<std::size_t> conflicts_{0};
  std::atomic<std::size_t> corrupt_{0};
};

// Cache hit: stored text with source=cache and the original usage, recorded
// in the ledger at zero cost. Miss: delegate, record, store.
CompletionResponse cached_complete(ResponseCache& cache, CompletionBackend& backend,
                                   const CompletionRequest& request, UsageLedger& ledger);

}  // namespace medlink
