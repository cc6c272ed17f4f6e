#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace capypipe {

inline int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(i) for i in [0, n) over up to `jobs` threads in contiguous
// chunks. Callers write results to slot i so output order never depends on
// scheduling. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
  const size_t workers =
      std::min<size_t>(n, static_cast<size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        for (size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace capypipe
