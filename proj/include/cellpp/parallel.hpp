#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cellpp {

void set_thread_count(unsigned n);
unsigned thread_count();

namespace detail {
/// True on worker threads; nested loops then run inline.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; any
/// result a caller stores by index is therefore independent of thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = detail::in_worker ? 1u : static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      detail::in_worker = true;
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cellpp
