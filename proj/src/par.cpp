#include "oplab/par.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace oplab {

namespace {

std::atomic<bool> g_parallel{true};

// read per call, not latched: the cost is one environment scan per loop
// launch, and callers may flip the variable between runs they compare
bool envForcesSerial() {
  const char* v = std::getenv("OPLAB_SERIAL");
  return v != nullptr && v[0] == '1';
}

}  // namespace

void setParallelEnabled(bool on) { g_parallel.store(on); }

bool parallelEnabled() { return g_parallel.load() && !envForcesSerial(); }

int parallelThreadCount() {
#ifdef _OPENMP
  return parallelEnabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

void parallelFor(std::size_t n, const std::function<void(std::size_t)>& f) {
#ifdef _OPENMP
  if (parallelEnabled() && n > 1) {
    #pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace oplab
