#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace elongate {

/// Worker count for assembly loops and audits. Read once from ELONGATE_THREADS,
/// falling back to the hardware concurrency.
inline unsigned thread_count()
{
  static const unsigned count = [] {
    if (const char* env = std::getenv("ELONGATE_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v > 0)
          return static_cast<unsigned>(v);
      } catch (...) {
      }
    }
    return std::max(1u, std::thread::hardware_concurrency());
  }();
  return count;
}

namespace detail {

// Ranges below this many items are never split across threads; spawning costs
// more than the work.
inline constexpr std::size_t kMinParallelItems = 1u << 15;

} // namespace detail

/// Runs body(begin, end) over [0, count) split into contiguous chunks. The chunk
/// boundaries only influence scheduling, never the result, as long as body writes
/// to disjoint outputs.
template <class Body>
void parallel_for(std::size_t count, Body&& body,
                  std::size_t min_items = detail::kMinParallelItems)
{
  const unsigned workers = thread_count();
  if (workers <= 1 || count < std::max<std::size_t>(min_items, 2)) {
    body(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e)
      break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool)
    t.join();
}

/// Sum of term(i) over [0, count), reproducible bit-for-bit regardless of the
/// thread count: items are grouped into fixed blocks, each block is summed in
/// order, then the block sums are added in order.
template <class Term>
double deterministic_sum(std::size_t count, Term&& term)
{
  constexpr std::size_t block = 4096;
  const std::size_t nblocks = (count + block - 1) / block;
  std::vector<double> partial(nblocks, 0.0);
  parallel_for(nblocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      double s = 0.0;
      const std::size_t end = std::min(count, (b + 1) * block);
      for (std::size_t i = b * block; i < end; ++i)
        s += term(i);
      partial[b] = s;
    }
  }, detail::kMinParallelItems / block);
  double total = 0.0;
  for (double s : partial)
    total += s;
  return total;
}

} // namespace elongate
