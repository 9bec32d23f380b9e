#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

namespace stbell {

/// Number of worker threads used when a caller passes 0.
inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/*!
 * Runs fn(shard_index) for shard_index in [0, n_shards) and returns the
 * results in shard order. Shards are statically interleaved across workers;
 * since each shard owns its own output slot and callers reduce the returned
 * vector in index order, results are identical for any worker count.
 */
template <typename Fn>
auto run_shards(std::size_t n_shards, Fn&& fn, unsigned workers = 0) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out(n_shards);
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_shards));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n_shards; ++s) out[s] = fn(s);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < n_shards; s += workers) out[s] = fn(s);
      });
    }
  }
  return out;
}

/// Sizes of consecutive shards covering n items.
inline std::vector<std::uint64_t> shard_sizes(std::uint64_t n, std::uint64_t shard_size) {
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t done = 0; done < n; done += shard_size) sizes.push_back(std::min(shard_size, n - done));
  return sizes;
}

}  // namespace stbell
