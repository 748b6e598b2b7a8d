#pragma once

// Static-chunk parallel loop. The body writes into per-index slots, so the
// caller reduces in index order and the result never depends on the
// number of workers.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pspider {

template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
  const std::size_t w = std::min<std::size_t>(std::max(1u, workers), count);
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t id = 0; id < w; ++id) {
    threads.emplace_back([&, id] {
      const std::size_t lo = count * id / w;
      const std::size_t hi = count * (id + 1) / w;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[id] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace pspider
