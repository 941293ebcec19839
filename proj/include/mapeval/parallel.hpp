#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mapeval {

/// Number of worker threads used by the parallel stages. 0 selects all cores.
void set_thread_count(int threads);
int thread_count();

/// Items per work block. Reductions sum per-block partials in block order, so
/// results do not depend on how many threads executed the blocks.
inline constexpr std::size_t kBlockSize = 4096;

/// Calls fn(begin, end) for consecutive blocks of [0, n). Blocks run
/// concurrently; fn must only write to per-item or per-block slots.
void parallel_blocks(std::size_t n, std::size_t block_size,
                     const std::function<void(std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t n, std::size_t block_size = kBlockSize) {
  return (n + block_size - 1) / block_size;
}

/// Deterministic parallel reduction. map(begin, end) produces a block partial,
/// partials are folded left to right with combine.
template <typename T, typename Map, typename Combine>
T parallel_reduce(std::size_t n, T init, Map&& map, Combine&& combine,
                  std::size_t block_size = kBlockSize) {
  std::vector<T> partials(block_count(n, block_size), init);
  parallel_blocks(n, block_size, [&](std::size_t begin, std::size_t end) {
    partials[begin / block_size] = map(begin, end);
  });
  T acc = init;
  for (const T& p : partials) acc = combine(acc, p);
  return acc;
}

/// Fixed-order sum of f(i) over [0, n).
template <typename F>
double parallel_sum(std::size_t n, F&& f) {
  return parallel_reduce(
      n, 0.0,
      [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += f(i);
        return s;
      },
      [](double a, double b) { return a + b; });
}

}  // namespace mapeval
