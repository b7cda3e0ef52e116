#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lesionkit {

//! Evaluates `fn(i)` for i in [0, n) on up to `threads` workers and returns
//! the results in index order. The first exception thrown is rethrown.
template<typename T, typename Fn>
std::vector<T>
parallel_map(std::size_t n, unsigned threads, Fn&& fn)
{
  std::vector<T> results(n);
  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      results[i] = fn(i);
    return results;
  }

  std::atomic<std::size_t> next{ 0 };
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
  return results;
}

} // namespace lesionkit
