#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace medlink::kernels {

enum class Metric { dot, cosine };

struct Scored {
  std::size_t position;  // row in the entity matrix (KB order)
  double score;
};

// Strict ranking order: higher score first, then smaller position.
inline bool ranks_before(const Scored& a, const Scored& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.position < b.position;
}

// Accumulates in double, left to right. Both scan kernels and score() go
// through this so equal inputs produce bit-identical scores.
inline double dot(const float* a, const float* b, std::size_t dim) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

// Row-major view over an entity matrix plus precomputed row norms (only
// consulted for cosine).
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t dim = 0;
  const double* norms = nullptr;
};

// Reference implementation: one pass, bounded selection, final sort.
std::vector<Scored> top_k_serial(const MatrixView& m, std::span<const float> query, double query_norm,
                                 std::size_t k, Metric metric);

// Parallel block scan: each thread selects a local top-k over its row block;
// the partial lists are merged and ordered with the same tie rule, so the
// result equals top_k_serial exactly.
std::vector<Scored> top_k_parallel(const MatrixView& m, std::span<const float> query,
                                   double query_norm, std::size_t k, Metric metric,
                                   int threads = 0);

}  // namespace medlink::kernels
