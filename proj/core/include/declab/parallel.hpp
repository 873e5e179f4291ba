#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace declab {

/**
 * Runs fn(i) for i in [0, n) across up to `workers` threads in static
 * contiguous blocks. Each index must touch only its own output slot; the
 * call returns after all blocks finish and rethrows the first exception.
 * With workers <= 1 this is a plain loop.
 */
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int w = std::min(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(w));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < w; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(n) * t / w);
    const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / w);
    threads.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace declab
