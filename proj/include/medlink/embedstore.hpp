#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medlink/corpus.hpp"

namespace medlink {

// Id-aligned dense vectors, row-major float32. Immutable after construction.
class EmbeddingStore {
 public:
  // Validates dim >= 1, row count, id uniqueness and finiteness of every value.
  EmbeddingStore(std::size_t dim, std::vector<std::string> ids, std::vector<float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> values() const noexcept { return values_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  std::optional<std::size_t> row_of(std::string_view id) const;
  bool contains(std::string_view id) const { return row_of(id).has_value(); }

  // Throws Error(not_found) naming the id.
  std::span<const float> lookup(std::string_view id) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// EMB1 blob: "EMB1" | u32 count | u32 dim | count*dim little-endian f32.
inline constexpr char kBlobMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kBlobHeaderBytes = 12;

std::string encode_blob(const EmbeddingStore& store);

// Writes <blob_name> next to the manifest (default: manifest stem + ".bin")
// and a JSON manifest carrying blob, count, dim, ids and sha256.
void save_store(const EmbeddingStore& store, const std::filesystem::path& manifest_path,
                std::optional<std::string> blob_name = std::nullopt);

EmbeddingStore load_store(const std::filesystem::path& manifest_path);

// Text import: one `id<TAB>f1 f2 ...` line per row, dim taken from the first row.
EmbeddingStore import_text(const std::filesystem::path& path);

struct AlignmentReport {
  std::vector<std::string> missing;  // KB entities without a vector
  std::vector<std::string> orphans;  // vectors whose id is not in the KB

  bool covers_kb() const noexcept { return missing.empty(); }
};

AlignmentReport validate_alignment(const EmbeddingStore& store, const KnowledgeBase& kb);

}  // namespace medlink
