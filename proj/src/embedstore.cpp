#include "medlink/embedstore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "medlink/errors.hpp"
#include "medlink/text_util.hpp"

namespace medlink {

EmbeddingStore::EmbeddingStore(std::size_t dim, std::vector<std::string> ids,
                               std::vector<float> values)
    : dim_(dim), ids_(std::move(ids)), values_(std::move(values)) {
  if (dim_ == 0) throw Error(ErrorKind::validation, "embedding dim must be >= 1");
  if (values_.size() != ids_.size() * dim_) {
    throw Error(ErrorKind::validation, "embedding matrix has " + std::to_string(values_.size()) +
                                           " values, expected " + std::to_string(ids_.size()) +
                                           "x" + std::to_string(dim_));
  }
  index_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!index_.emplace(ids_[r], r).second) {
      throw Error(ErrorKind::conflict, "duplicate embedding id " + ids_[r]);
    }
    for (std::size_t c = 0; c < dim_; ++c) {
      if (!std::isfinite(values_[r * dim_ + c])) {
        throw Error(ErrorKind::validation, "non-finite value in embedding row " + std::to_string(r) +
                                               " (id " + ids_[r] + ")");
      }
    }
  }
}

std::optional<std::size_t> EmbeddingStore::row_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingStore::lookup(std::string_view id) const {
  const auto r = row_of(id);
  if (!r) throw Error(ErrorKind::not_found, "no embedding for id " + std::string(id));
  return row(*r);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string encode_blob(const EmbeddingStore& store) {
  std::string out;
  out.reserve(kBlobHeaderBytes + store.values().size() * 4);
  out.append(kBlobMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  put_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (float f : store.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& manifest_path,
                std::optional<std::string> blob_name) {
  const std::string blob_file = blob_name.value_or(manifest_path.stem().string() + ".bin");
  const auto blob = encode_blob(store);
  const auto dir = manifest_path.parent_path();
  text::write_file_atomic(dir / blob_file, blob);

  nlohmann::ordered_json manifest;
  manifest["format"] = "EMB1";
  manifest["blob"] = blob_file;
  manifest["count"] = store.size();
  manifest["dim"] = store.dim();
  manifest["sha256"] = text::sha256_hex(blob);
  manifest["ids"] = store.ids();
  text::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

EmbeddingStore load_store(const std::filesystem::path& manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, manifest_path.string() + ": invalid manifest: " + e.what());
  }

  std::string blob_file;
  std::size_t count = 0;
  std::size_t dim = 0;
  std::string checksum;
  std::vector<std::string> ids;
  try {
    blob_file = manifest.at("blob").get<std::string>();
    count = manifest.at("count").get<std::size_t>();
    dim = manifest.at("dim").get<std::size_t>();
    checksum = manifest.at("sha256").get<std::string>();
    ids = manifest.at("ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, manifest_path.string() + ": manifest field error: " + e.what());
  }
  if (dim == 0) throw Error(ErrorKind::validation, manifest_path.string() + ": dim must be >= 1");
  if (ids.size() != count) {
    throw Error(ErrorKind::validation, manifest_path.string() + ": ids array has " +
                                           std::to_string(ids.size()) + " entries, count is " +
                                           std::to_string(count));
  }

  const auto blob_path = manifest_path.parent_path() / blob_file;
  const auto blob = text::read_file(blob_path);
  if (blob.size() < kBlobHeaderBytes || std::memcmp(blob.data(), kBlobMagic, 4) != 0) {
    throw Error(ErrorKind::validation, blob_path.string() + ": magic mismatch (expected EMB1)");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::size_t blob_count = get_u32(bytes + 4);
  const std::size_t blob_dim = get_u32(bytes + 8);
  if (blob_count != count || blob_dim != dim) {
    throw Error(ErrorKind::validation, blob_path.string() + ": header says " +
                                           std::to_string(blob_count) + "x" + std::to_string(blob_dim) +
                                           ", manifest says " + std::to_string(count) + "x" +
                                           std::to_string(dim));
  }
  const std::size_t payload = blob.size() - kBlobHeaderBytes;
  if (payload != count * dim * 4) {
    throw Error(ErrorKind::validation, blob_path.string() + ": size mismatch, payload is " +
                                           std::to_string(payload) + " bytes, expected " +
                                           std::to_string(count * dim * 4));
  }
  if (text::sha256_hex(blob) != checksum) {
    throw Error(ErrorKind::validation, blob_path.string() + ": checksum failure");
  }

  std::vector<float> values(count * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes + kBlobHeaderBytes + 4 * i));
  }
  return EmbeddingStore(dim, std::move(ids), std::move(values));
}

EmbeddingStore import_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(path.string(), line_no, "expected id<TAB>f1 f2 ...");
    }
    std::istringstream fields(line.substr(tab + 1));
    std::vector<float> row;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stof(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path.string(), line_no, "bad float '" + tok + "'");
      }
    }
    if (row.empty()) throw ParseError(path.string(), line_no, "no vector values");
    if (dim == 0) dim = row.size();
    if (row.size() != dim) {
      throw ParseError(path.string(), line_no, "row has " + std::to_string(row.size()) +
                                                   " values, expected " + std::to_string(dim));
    }
    ids.push_back(line.substr(0, tab));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (ids.empty()) throw Error(ErrorKind::validation, path.string() + ": no embedding rows");
  return EmbeddingStore(dim, std::move(ids), std::move(values));
}

AlignmentReport validate_alignment(const EmbeddingStore& store, const KnowledgeBase& kb) {
  AlignmentReport report;
  for (const auto& e : kb.entities()) {
    if (!store.contains(e.id)) report.missing.push_back(e.id);
  }
  for (const auto& id : store.ids()) {
    if (!kb.contains(id)) report.orphans.push_back(id);
  }
  return report;
}

}  // namespace medlink
