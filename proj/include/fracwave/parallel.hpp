#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fracwave {

// Thread count: explicit request, else FRACWAVE_THREADS, else hardware.
// FRACWAVE_THREADS also caps an explicit request.
inline unsigned thread_count(unsigned requested = 0) {
  long env = 0;
  if (const char* s = std::getenv("FRACWAVE_THREADS")) env = std::strtol(s, nullptr, 10);
  if (requested > 0) return env > 0 ? std::min(requested, static_cast<unsigned>(env)) : requested;
  if (env > 0) return static_cast<unsigned>(env);
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(i) for i in [0, n). Work is handed out dynamically, so the
/// body must write only to slots owned by i.
template <class F>
void parallel_for(std::size_t n, F&& body, unsigned threads = 0) {
  const unsigned nt = std::min<std::size_t>(thread_count(threads), std::max<std::size_t>(n, 1));
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace fracwave
