#pragma once

// Slot-write parallelism. Loop bodies write into disjoint, preallocated slots
// and every reduction happens afterwards in serial index order, so enabling
// OpenMP cannot change a single output byte. A process-wide switch (or the
// OPLAB_SERIAL=1 environment variable) forces the serial path; the benchmark
// target compares the two.

#include <cstddef>
#include <functional>

namespace oplab {

void setParallelEnabled(bool on);
bool parallelEnabled();
int parallelThreadCount();

// Runs f(i) for i in [0, n). With OpenMP available and parallelism enabled the
// iterations are distributed statically; otherwise they run in order.
void parallelFor(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace oplab
