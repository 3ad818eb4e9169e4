#pragma once

// Static-partition parallel loop. Work items are indexed, so results written
// per index do not depend on how many workers ran.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rdq {

/// Worker count: RD_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("RD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(begin, end) on contiguous chunks of [0, count). The first
/// exception thrown by any chunk is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned workers = worker_count()) {
  if (count == 0) return;
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::exception_ptr error;
  std::mutex mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, count) into `chunks` contiguous ranges and calls
/// fn(chunk, begin, end) for each, in parallel. Per-chunk accumulators indexed
/// by `chunk` give results that depend on `chunks` but not on scheduling.
template <class Fn>
void parallel_chunks(std::size_t count, std::size_t chunks, Fn&& fn) {
  chunks = std::max<std::size_t>(1, chunks);
  const std::size_t width = (count + chunks - 1) / chunks;
  parallel_for(chunks, [&](std::size_t cbegin, std::size_t cend) {
    for (std::size_t c = cbegin; c < cend; ++c) {
      const std::size_t begin = std::min(count, c * width);
      const std::size_t end = std::min(count, begin + width);
      fn(c, begin, end);
    }
  });
}

}  // namespace rdq
