#include "stabsvrg/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stabsvrg::parallel {

namespace {
std::atomic<bool> g_enabled{true};
std::atomic<int> g_threads{0};
}  // namespace

bool enabled() { return g_enabled.load(std::memory_order_relaxed); }

void set_enabled(bool on) { g_enabled.store(on, std::memory_order_relaxed); }

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int n) {
  g_threads.store(n < 0 ? 0 : n, std::memory_order_relaxed);
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

namespace detail {

bool run_parallel(Exec exec, int items) {
#ifdef _OPENMP
  // Tiny reductions are not worth a parallel region; the result is the same
  // either way because partials fold in block order.
  return exec == Exec::parallel && items >= 2 * kBlockSize;
#else
  (void)exec;
  (void)items;
  return false;
#endif
}

}  // namespace detail

}  // namespace stabsvrg::parallel
