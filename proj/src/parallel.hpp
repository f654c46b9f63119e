#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace vad::detail {

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
// handled by exactly one call, so per-index results are independent of the
// thread count.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t min_chunk, Body&& body) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t chunks = std::clamp<std::size_t>(n / std::max<std::size_t>(min_chunk, 1), 1, hw);
  if (chunks <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t step = (n + chunks - 1) / chunks;
  for (std::size_t begin = 0; begin < n; begin += step) {
    const std::size_t end = std::min(n, begin + step);
    jobs.push_back(std::async(std::launch::async, [&body, begin, end] { body(begin, end); }));
  }
  for (auto& j : jobs) j.get();
}

}  // namespace vad::detail
