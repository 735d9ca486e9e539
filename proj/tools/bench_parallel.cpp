// Benchmark of the OpenMP slot-write kernels against the serial reference.
// Runs the same workloads in both modes, reports wall times, and hard-fails
// if any output differs by a single byte, since identical results are the
// whole point of the slot-write design.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "oplab/coarse.hpp"
#include "oplab/interpolation.hpp"
#include "oplab/par.hpp"
#include "oplab/rng.hpp"

using namespace oplab;

namespace {

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

struct BenchRow {
  std::string name;
  double serialSec = 0.0;
  double parallelSec = 0.0;
  bool identical = false;
};

void printRow(const BenchRow& r) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n", r.name.c_str(),
              r.serialSec, r.parallelSec,
              r.parallelSec > 0.0 ? r.serialSec / r.parallelSec : 0.0,
              r.identical ? "outputs identical" : "OUTPUTS DIFFER");
}

}  // namespace

int main() {
  std::printf("slot-write kernels, %d thread(s) available\n\n", parallelThreadCount());
  std::vector<BenchRow> rows;

  {
    BenchRow row;
    row.name = "coarse moduli (1536 pairs)";
    DomainSampler s;
    s.space = OsDescriptor{SpaceKind::Row, 4};
    s.n = 3;
    s.radius = 2.0;
    s.seed = 11;
    s.count = 256;
    const std::vector<double> grid = defaultModuliGrid();

    std::string serialCsv, parallelCsv;
    setParallelEnabled(false);
    row.serialSec = seconds([&] { serialCsv = moduliCsv(estimateModuli(identityOsMap(), s, grid)); });
    setParallelEnabled(true);
    row.parallelSec =
        seconds([&] { parallelCsv = moduliCsv(estimateModuli(identityOsMap(), s, grid)); });
    row.identical = serialCsv == parallelCsv;
    printRow(row);
    rows.push_back(row);
  }

  {
    BenchRow row;
    row.name = "interpolation brackets (x8)";
    NormCouple couple = coupleRowColumn(2, 3);
    SolveBudget budget;
    budget.degree = 4;
    budget.grid = 24;
    budget.restarts = 8;
    budget.steps = 400;
    Rng rng = Rng::forSlot(13, 0);
    VecC x(12);
    for (auto& z : x) z = rng.gaussianC();

    auto sweep = [&]() {
      std::string all;
      for (int i = 0; i < 8; ++i)
        all += bracketToJson(bracket(x, couple, 0.25 + 0.05 * i, budget, 3));
      return all;
    };
    std::string serialOut, parallelOut;
    setParallelEnabled(false);
    row.serialSec = seconds([&] { serialOut = sweep(); });
    setParallelEnabled(true);
    row.parallelSec = seconds([&] { parallelOut = sweep(); });
    row.identical = serialOut == parallelOut;
    printRow(row);
    rows.push_back(row);
  }

  bool allIdentical = true;
  for (const auto& r : rows) allIdentical = allIdentical && r.identical;
  std::printf("\n%s\n", allIdentical ? "all outputs byte-identical across modes"
                                     : "MISMATCH: parallel output diverged from serial");
  return allIdentical ? 0 : 1;
}
