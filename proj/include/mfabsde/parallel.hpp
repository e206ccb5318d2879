#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mfabsde {

// Execution mode for the per-particle kernels. Every parallel loop writes
// disjoint slots and all reductions are serial, so results are identical
// for any worker count.
enum class Exec { Serial, OpenMP };

Exec default_exec();
void set_default_exec(Exec e);
int worker_count();
void set_worker_count(int n);

template <class F>
void for_each_index(std::int64_t n, F&& body, Exec exec) {
  if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
}

template <class F>
void for_each_index(std::int64_t n, F&& body) {
  for_each_index(n, std::forward<F>(body), default_exec());
}

// Fixed-size chunks independent of thread count, for blocked matrix work.
template <class F>
void for_each_chunk(std::int64_t n, std::int64_t chunk, F&& body, Exec exec) {
  const std::int64_t nchunks = (n + chunk - 1) / chunk;
  for_each_index(
      nchunks,
      [&](std::int64_t c) {
        const std::int64_t lo = c * chunk;
        body(lo, std::min(lo + chunk, n));
      },
      exec);
}

}  // namespace mfabsde
