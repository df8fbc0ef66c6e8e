#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace bmidx {

// Runs fn(i) for i in [0, n) across up to `threads` workers in fixed-size
// blocks. Callers must write only to disjoint per-index slots; any
// order-sensitive reduction has to be done per block by the caller.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  constexpr std::size_t kBlock = 64;
  if (threads <= 1 || n <= kBlock) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(kBlock);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + kBlock);
      for (std::size_t i = begin; i < end; ++i) fn(i);
    }
  };
  const std::size_t max_workers = (n + kBlock - 1) / kBlock;
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), max_workers);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace bmidx
