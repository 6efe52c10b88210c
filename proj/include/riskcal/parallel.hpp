#ifndef RISKCAL_PARALLEL_HPP
#define RISKCAL_PARALLEL_HPP

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace riskcal {

// Execution mode for the data-parallel kernels. Serial is the reference
// path; Parallel distributes the same fixed chunk decomposition over OpenMP
// threads, so both modes produce bit-identical sums regardless of the
// thread count.
enum class Exec { Serial, Parallel };

namespace par {

inline constexpr std::size_t kChunk = 2048;

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Chunked reduction: chunk sums are computed (possibly in parallel) and then
// combined serially in chunk order. The result does not depend on Exec or on
// the number of threads.
template <typename F>
double chunked_sum(std::size_t n, F&& body, Exec exec) {
  if (n == 0) return 0.0;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  if (exec == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
      const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
      const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += body(i);
      partial[static_cast<std::size_t>(c)] = s;
    }
  } else {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = c * kChunk;
      const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += body(i);
      partial[c] = s;
    }
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

// Vector-valued variant: body(i, acc) accumulates into a chunk-local vector,
// chunk vectors are combined in order.
template <typename F>
void chunked_sum_vec(std::size_t n, std::size_t dim, F&& body,
                     std::vector<double>& out, Exec exec) {
  out.assign(dim, 0.0);
  if (n == 0) return;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks * dim, 0.0);
  if (exec == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
      const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
      const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
      double* acc = partial.data() + static_cast<std::size_t>(c) * dim;
      for (std::size_t i = lo; i < hi; ++i) body(i, acc);
    }
  } else {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = c * kChunk;
      const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
      double* acc = partial.data() + c * dim;
      for (std::size_t i = lo; i < hi; ++i) body(i, acc);
    }
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* acc = partial.data() + c * dim;
    for (std::size_t k = 0; k < dim; ++k) out[k] += acc[k];
  }
}

// Independent-iteration loop (no reduction). Safe whenever iterations touch
// disjoint state.
template <typename F>
void parallel_for(std::size_t n, F&& body, Exec exec) {
  if (exec == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

}  // namespace par
}  // namespace riskcal

#endif
