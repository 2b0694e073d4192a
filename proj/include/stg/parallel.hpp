#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace stg {

// Worker count: ST_GRAPHORMER_THREADS if set (clamped to >= 1), otherwise the
// hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("ST_GRAPHORMER_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static contiguous partition of [begin, end) across workers.  Each index is
// processed exactly once by exactly one worker, so bodies that write only to
// index-owned slots produce results independent of the worker count.
inline void parallel_for(long begin, long end,
                         const std::function<void(long)>& body,
                         int max_threads = 0) {
  const long n = end - begin;
  if (n <= 0) return;
  int workers = thread_count();
  if (max_threads > 0 && max_threads < workers) workers = max_threads;
  if (workers > n) workers = static_cast<int>(n);
  if (workers <= 1) {
    for (long i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = begin + static_cast<long>(w) * chunk;
    const long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (long i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace stg
