#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace kickpend {

/// Runs body(i) for i in [0, n) across `workers` threads. Output slots must be
/// disjoint per index so the result does not depend on scheduling; body must
/// not throw (grid producers convert failures into cell status flags).
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace kickpend
