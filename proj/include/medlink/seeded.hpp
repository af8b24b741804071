#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace medlink {

// std::mt19937_64 output is fixed by the standard but the <random>
// distributions are not, so seeded sampling goes through these helpers to
// stay reproducible across standard libraries.
inline std::size_t bounded_draw(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t n = bound;
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

// Moves a uniform sample of `count` elements into the front of v.
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t count, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count && i < v.size(); ++i) {
    const std::size_t j = i + bounded_draw(rng, v.size() - i);
    std::swap(v[i], v[j]);
  }
}

}  // namespace medlink
