#include "medlink/topk_kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace medlink::kernels {

namespace {

double row_score(const MatrixView& m, std::size_t r, const float* q, double query_norm, Metric metric) {
  const double d = dot(m.data + r * m.dim, q, m.dim);
  if (metric == Metric::dot) return d;
  return d / (query_norm * m.norms[r]);
}

// Keeps the best k items of [begin, end) in a max-heap ordered by
// ranks_before (heap top = worst kept item).
void select_block(const MatrixView& m, std::size_t begin, std::size_t end, const float* q,
                  double query_norm, std::size_t k, Metric metric, std::vector<Scored>& heap) {
  heap.clear();
  heap.reserve(k);
  for (std::size_t r = begin; r < end; ++r) {
    const Scored s{r, row_score(m, r, q, query_norm, metric)};
    if (heap.size() < k) {
      heap.push_back(s);
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    } else if (ranks_before(s, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), ranks_before);
      heap.back() = s;
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    }
  }
}

}  // namespace

std::vector<Scored> top_k_serial(const MatrixView& m, std::span<const float> query, double query_norm,
                                 std::size_t k, Metric metric) {
  k = std::min(k, m.rows);
  std::vector<Scored> best;
  if (k == 0) return best;
  select_block(m, 0, m.rows, query.data(), query_norm, k, metric, best);
  std::sort(best.begin(), best.end(), ranks_before);
  return best;
}

std::vector<Scored> top_k_parallel(const MatrixView& m, std::span<const float> query,
                                   double query_norm, std::size_t k, Metric metric, int threads) {
  k = std::min(k, m.rows);
  if (k == 0) return {};
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
  std::vector<std::vector<Scored>> partial(static_cast<std::size_t>(nthreads));

#pragma omp parallel num_threads(nthreads)
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto team = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t block = (m.rows + team - 1) / team;
    const std::size_t begin = std::min(m.rows, t * block);
    const std::size_t end = std::min(m.rows, begin + block);
    select_block(m, begin, end, query.data(), query_norm, k, metric, partial[t]);
  }

  std::vector<Scored> merged;
  merged.reserve(k * partial.size());
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(k), merged.end(),
                    ranks_before);
  merged.resize(k);
  return merged;
}

}  // namespace medlink::kernels
