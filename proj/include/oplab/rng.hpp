#pragma once

// Deterministic random source. Standard-library real distributions are
// implementation-defined, which would break byte-level reproducibility of
// reports, so the generator and the double/gaussian draws are spelled out.

#include <cmath>
#include <cstdint>

#include "oplab/cmatrix.hpp"

namespace oplab {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97f4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ^ 0xD1B54A32D192ED03ull) {
    // warm up so that small consecutive seeds decorrelate
    splitmix64(state_);
    splitmix64(state_);
  }

  // derive an independent stream for slot `idx` (parallel loops seed one per slot)
  static Rng forSlot(uint64_t seed, uint64_t idx) {
    uint64_t s = seed;
    uint64_t mixed = splitmix64(s) + 0x9E3779B97f4A7C15ull * (idx + 1);
    return Rng(mixed);
  }

  uint64_t nextU64() { return splitmix64(state_); }

  // uniform in [0, 1) with 53 significant bits
  double uniform01() { return static_cast<double>(nextU64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller (no cached second value: keeps state simple)
  double gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  cplx gaussianC() { return cplx(gaussian(), gaussian()); }

  int uniformInt(int lo, int hi) {  // inclusive bounds
    if (hi < lo) throw Error(ErrKind::Input, "uniformInt empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(nextU64() % span);
  }

  VecC gaussianVec(size_t n) {
    VecC v(n);
    for (auto& z : v) z = gaussianC();
    return v;
  }

  CMatrix gaussianMatrix(int r, int c) {
    CMatrix m(r, c);
    for (auto& z : m.a) z = gaussianC();
    return m;
  }

 private:
  uint64_t state_;
};

}  // namespace oplab
