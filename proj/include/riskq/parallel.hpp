#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace riskq {

namespace detail {
inline std::atomic<std::size_t>& worker_thread_setting() {
  static std::atomic<std::size_t> threads{
      std::max<std::size_t>(1, std::thread::hardware_concurrency())};
  return threads;
}
} // namespace detail

/// Number of workers used to fan out a batch. Defaults to the hardware
/// concurrency.
inline std::size_t worker_threads() { return detail::worker_thread_setting().load(); }

inline void set_worker_threads(std::size_t n) {
  detail::worker_thread_setting().store(std::max<std::size_t>(1, n));
}

/// Runs fn(i) for every i in [0, count). Work is split into contiguous
/// chunks; each index is processed exactly once, so results written to
/// per-index slots do not depend on the number of workers.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t min_chunk = 16) {
  const std::size_t workers =
      std::min(worker_threads(), (count + min_chunk - 1) / std::max<std::size_t>(1, min_chunk));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end)
      break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i)
          fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace riskq
