#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "graphbss/errors.hpp"

namespace graphbss {

/**
 * Runs fn(0..count-1) on up to `threads` workers pulling indices from a
 * shared counter and returns the results ordered by index. The output is a
 * pure function of fn, never of the thread schedule, so any thread count
 * produces identical results. The first exception wins, remaining work is
 * abandoned, and the exception is rethrown on the caller's thread.
 */
template <typename T, typename F>
std::vector<T> parallel_map(int count, int threads, F&& fn) {
  if (count < 0) throw ParameterError("parallel_map needs a non-negative job count");
  if (threads < 1) throw ParameterError("parallel_map needs at least one thread");
  std::vector<T> results(static_cast<std::size_t>(count));
  if (count == 0) return results;

  if (threads == 1 || count == 1) {
    for (int i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }

  std::atomic<int> next{0};
  std::mutex failure_mu;
  std::exception_ptr failure;
  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
        next.store(count);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace graphbss
