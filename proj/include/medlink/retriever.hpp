#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medlink/corpus.hpp"
#include "medlink/embedstore.hpp"
#include "medlink/topk_kernels.hpp"

namespace medlink {

using kernels::Metric;

const char* to_string(Metric metric);
Metric parse_metric(std::string_view s);

inline constexpr std::size_t kDefaultCandidates = 6;

// Throws on dim mismatch, or on a zero vector under cosine.
double score(std::span<const float> mention, std::span<const float> entity, Metric metric);

struct Candidate {
  std::string entity_id;
  double score = 0.0;
};

struct CandidateSet {
  std::string mention_uid;
  std::vector<Candidate> candidates;  // best first
  std::size_t k = 0;
  Metric metric = Metric::dot;

  std::vector<std::string> ids() const;
  bool contains(std::string_view entity_id) const;
  // 1-based rank of entity_id among the candidates, if present.
  std::optional<std::size_t> rank_of(std::string_view entity_id) const;
};

// Entity matrix laid out in KB order. Construction refuses a store that does
// not cover every KB entity, so every retrieval path sees full coverage.
class EntityIndex {
 public:
  EntityIndex(const KnowledgeBase& kb, const EmbeddingStore& store);

  const KnowledgeBase& kb() const noexcept { return *kb_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return kb_->size(); }

  // Exact top-k; ties go to the smaller KB position. parallel selects the
  // OpenMP block-scan kernel, which returns identical results.
  CandidateSet top_k(std::span<const float> mention_vec, std::size_t k, Metric metric,
                     bool parallel = true) const;

  // Full ranking of every entity (used for hard-negative mining).
  std::vector<kernels::Scored> rank_all(std::span<const float> mention_vec, Metric metric) const;

 private:
  kernels::MatrixView view() const;
  double check_query(std::span<const float> mention_vec, Metric metric) const;

  const KnowledgeBase* kb_;
  std::size_t dim_;
  std::vector<float> matrix_;
  std::vector<double> norms_;
};

enum class NegativeKind { hard, random };

const char* to_string(NegativeKind kind);

struct NegativeSample {
  std::string mention_uid;
  std::string entity_id;
  NegativeKind kind = NegativeKind::random;
};

inline constexpr std::size_t kDefaultNegatives = 15;
inline constexpr double kDefaultHardRatio = 0.10;

// ceil(hard_ratio * total), robust to representation error in hard_ratio.
std::size_t hard_negative_count(std::size_t total, double hard_ratio);

// Hard negatives are the top-scoring non-gold entities; the rest are drawn
// uniformly without replacement from what remains. Deterministic per seed.
std::vector<NegativeSample> mine_negatives(const EntityIndex& index, std::span<const float> mention_vec,
                                           std::string_view mention_uid, std::string_view gold_id,
                                           std::size_t total, double hard_ratio, std::uint64_t seed,
                                           Metric metric = Metric::dot);

// Stable per-mention seed derived from a run seed and the mention uid.
std::uint64_t mention_seed(std::uint64_t run_seed, std::string_view uid);

struct TrainingPairInput {
  const Mention* mention = nullptr;
  std::vector<NegativeSample> negatives;
};

// TSV rows: uid, surface, context, entity_id, label (pos|hard_neg|rand_neg).
// No header. One pos row per mention followed by its negatives.
void export_training_pairs(const std::vector<TrainingPairInput>& inputs,
                           const std::filesystem::path& path);

struct TrainingPairReport {
  std::size_t rows = 0;
  std::size_t mentions = 0;
  std::vector<std::string> problems;

  bool ok() const noexcept { return problems.empty(); }
};

TrainingPairReport validate_training_pairs(const std::filesystem::path& path);

}  // namespace medlink
