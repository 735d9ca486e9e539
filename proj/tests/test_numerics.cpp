// Dense kernel and LP checks against the independently coded references in
// oracles.hpp plus a set of hand-computable pinned instances.

#include <cmath>
#include <cstdio>

#include "oplab/cmatrix.hpp"
#include "oplab/eig.hpp"
#include "oplab/lp.hpp"
#include "oplab/rng.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

using namespace oplab;

namespace {

CMatrix randomMatrix(int rows, int cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (auto& z : m.a) z = rng.gaussianC();
  return m;
}

CMatrix randomHermitian(int n, Rng& rng) {
  CMatrix m = randomMatrix(n, n, rng);
  return matScale(matAdd(m, adjoint(m)), cplx(0.5, 0.0));
}

CMatrix randomHpd(int n, Rng& rng) {
  CMatrix m = randomMatrix(n, n, rng);
  CMatrix g = matmul(adjoint(m), m);
  for (int i = 0; i < n; ++i) g.at(i, i) += 0.05;
  return g;
}

double offDiagMax(const CMatrix& a) {
  double big = 0.0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j)
      if (i != j) big = std::max(big, std::abs(a.at(i, j)));
  return big;
}

}  // namespace

int main() {
  testkit::section("hermitian eigensolver vs classical-pivot reference");
  for (int trial = 0; trial < 40; ++trial) {
    Rng rng = Rng::forSlot(101, trial);
    const int n = 1 + trial % 6;
    CMatrix a = randomHermitian(n, rng);
    HermEig e = hermitianEig(a);
    std::vector<double> ref = oracle::hermEigenvalues(a);
    std::sort(ref.begin(), ref.end());
    REQUIRE(static_cast<int>(e.values.size()) == n);
    for (int i = 0; i < n; ++i) REQUIRE_CLOSE(e.values[i], ref[i], 1e-10);
    // residual of each eigenpair
    for (int k = 0; k < n; ++k) {
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        cplx av(0.0, 0.0);
        for (int j = 0; j < n; ++j) av += a.at(i, j) * e.vectors.at(j, k);
        res = std::max(res, std::abs(av - e.values[k] * e.vectors.at(i, k)));
      }
      REQUIRE_MSG(res <= 1e-9, "eigenpair residual");
    }
  }

  testkit::section("gram svd vs reference");
  for (int trial = 0; trial < 40; ++trial) {
    Rng rng = Rng::forSlot(202, trial);
    const int rows = 1 + trial % 5;
    const int cols = 1 + (trial / 5) % 5;
    CMatrix a = randomMatrix(rows, cols, rng);
    Svd s = svdGram(a);
    std::vector<double> ev = oracle::hermEigenvalues(oracle::mul(oracle::dagger(a), a));
    std::sort(ev.rbegin(), ev.rend());
    for (size_t i = 0; i < s.sigma.size(); ++i)
      REQUIRE_CLOSE(s.sigma[i], std::sqrt(std::max(0.0, ev[i])), 1e-10);
    // reconstruction through the factors
    CMatrix recon(rows, cols);
    for (size_t k = 0; k < s.sigma.size(); ++k)
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          recon.at(i, j) += s.sigma[k] * s.u.at(i, k) * std::conj(s.v.at(j, k));
    REQUIRE_MSG(oracle::spectralNorm(matSub(recon, a)) <= 1e-9, "svd reconstruction");
    REQUIRE_CLOSE(spectralNorm(a), oracle::spectralNorm(a), 1e-10);
    REQUIRE_CLOSE(nuclearNorm(a), oracle::nuclearNorm(a), 1e-9);
  }

  testkit::section("pinned singular values");
  {
    // diag(3, 4) embedded in a 2x3 rectangle has singular values 4, 3
    CMatrix a(2, 3);
    a.at(0, 0) = 3.0;
    a.at(1, 1) = 4.0;
    Svd s = svdGram(a);
    REQUIRE_CLOSE(s.sigma[0], 4.0, 1e-14);
    REQUIRE_CLOSE(s.sigma[1], 3.0, 1e-14);
    TopSingular top = topSingularPair(a);
    REQUIRE_CLOSE(top.sigma, 4.0, 1e-12);
    // a v = sigma u
    cplx av0 = a.at(0, 0) * top.v[0] + a.at(0, 1) * top.v[1] + a.at(0, 2) * top.v[2];
    cplx av1 = a.at(1, 0) * top.v[0] + a.at(1, 1) * top.v[1] + a.at(1, 2) * top.v[2];
    REQUIRE(std::abs(av0 - top.sigma * top.u[0]) <= 1e-10);
    REQUIRE(std::abs(av1 - top.sigma * top.u[1]) <= 1e-10);
  }

  testkit::section("cholesky and triangular solves");
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng = Rng::forSlot(303, trial);
    const int n = 1 + trial % 5;
    CMatrix g = randomHpd(n, rng);
    CMatrix l = cholesky(g);
    REQUIRE_MSG(oracle::spectralNorm(matSub(matmul(l, adjoint(l)), g)) <= 1e-9,
                "cholesky factorization residual");
    CMatrix b = randomMatrix(n, 2, rng);
    CMatrix y = solveLowerTri(l, b);
    REQUIRE_MSG(oracle::spectralNorm(matSub(matmul(l, y), b)) <= 1e-8, "lower solve");
    CMatrix z = solveUpperTri(adjoint(l), b);
    REQUIRE_MSG(oracle::spectralNorm(matSub(matmul(adjoint(l), z), b)) <= 1e-8, "upper solve");
  }
  {
    CMatrix bad(2, 2);
    bad.at(0, 0) = 1.0;
    bad.at(1, 1) = -1.0;
    REQUIRE_THROWS_KIND(cholesky(bad), ErrKind::Definiteness);
  }

  testkit::section("positive powers");
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng = Rng::forSlot(404, trial);
    const int n = 1 + trial % 4;
    CMatrix g = randomHpd(n, rng);
    CMatrix half = hpdPower(g, 0.5);
    REQUIRE_MSG(oracle::spectralNorm(matSub(matmul(half, half), g)) <= 1e-9, "square root");
    CMatrix inv = hpdPower(g, -1.0);
    REQUIRE_MSG(offDiagMax(matmul(inv, g)) <= 1e-9, "inverse off-diagonal");
    const double theta = 0.3 + 0.1 * (trial % 5);
    CMatrix lib = hpdPower(g, theta);
    CMatrix ref = oracle::hermPower(g, theta);
    REQUIRE_MSG(oracle::spectralNorm(matSub(lib, ref)) <= 1e-9, "fractional power");
  }

  testkit::section("congruence diagonalization");
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng = Rng::forSlot(505, trial);
    const int n = 1 + trial % 4;
    CMatrix g0 = randomHpd(n, rng);
    CMatrix g1 = randomHpd(n, rng);
    CongruencePair cp = congruenceDiagonalize(g1, g0);
    CMatrix id = matmul(adjoint(cp.x), matmul(g0, cp.x));
    for (int i = 0; i < n; ++i) REQUIRE_CLOSE(id.at(i, i).real(), 1.0, 1e-9);
    REQUIRE_MSG(offDiagMax(id) <= 1e-9, "x* g0 x = I");
    CMatrix diag = matmul(adjoint(cp.x), matmul(g1, cp.x));
    REQUIRE_MSG(offDiagMax(diag) <= 1e-8, "x* g1 x diagonal");
    for (int i = 0; i < n; ++i) {
      REQUIRE(cp.lambda[i] > 0.0);
      REQUIRE_CLOSE(diag.at(i, i).real(), cp.lambda[i], 1e-8);
      if (i > 0) REQUIRE(cp.lambda[i] >= cp.lambda[i - 1]);
    }
    REQUIRE_MSG(offDiagMax(matmul(cp.x, cp.xinv)) <= 1e-8, "xinv inverts x");
  }

  testkit::section("simplex on pinned instances");
  {
    // min x0 + x1 with x0 + 2 x1 = 4, 3 x0 + x1 = 7 has the unique solution (2, 1)
    std::vector<std::vector<double>> a = {{1.0, 2.0}, {3.0, 1.0}};
    std::vector<double> b = {4.0, 7.0};
    std::vector<double> c = {1.0, 1.0};
    LpResult r = simplexSolve(a, b, c);
    REQUIRE_CLOSE(r.z[0], 2.0, 1e-9);
    REQUIRE_CLOSE(r.z[1], 1.0, 1e-9);
    REQUIRE_CLOSE(r.value, 3.0, 1e-9);
  }
  {
    // infeasible: x0 = 1 and x0 = 2 with x0 >= 0
    std::vector<std::vector<double>> a = {{1.0}, {1.0}};
    std::vector<double> b = {1.0, 2.0};
    std::vector<double> c = {1.0};
    REQUIRE_THROWS_KIND(simplexSolve(a, b, c), ErrKind::NoPreimage);
  }

  testkit::section("least-l1 preimage vs basic-solution enumeration");
  {
    CMatrix q(3, 4);
    const double cols[4][3] = {{1, 1, 1}, {1, -1, 1}, {1, 1, -1}, {1, -1, -1}};
    for (int j = 0; j < 4; ++j)
      for (int t = 0; t < 3; ++t) q.at(t, j) = cols[j][t];
    for (int trial = 0; trial < 60; ++trial) {
      Rng rng = Rng::forSlot(606, trial);
      VecC x(3);
      const bool realOnly = trial % 2 == 0;
      for (auto& z : x) z = realOnly ? cplx(rng.gaussian(), 0.0) : rng.gaussianC();
      PreimageResult pre = minL1Preimage(q, x);
      REQUIRE_CLOSE(pre.l1, oracle::minL1Value(q, x), 1e-9);
      VecC back(3, cplx(0.0, 0.0));
      for (int t = 0; t < 3; ++t)
        for (int j = 0; j < 4; ++j) back[t] += q.at(t, j) * pre.y[j];
      for (int t = 0; t < 3; ++t) REQUIRE(std::abs(back[t] - x[t]) <= 1e-9);
      // exact positive homogeneity for a power-of-two scale
      VecC x2 = x;
      for (auto& z : x2) z *= 4.0;
      PreimageResult pre2 = minL1Preimage(q, x2);
      for (int j = 0; j < 4; ++j) REQUIRE(std::abs(pre2.y[j] - 4.0 * pre.y[j]) == 0.0);
    }
    // rank-deficient map is rejected
    CMatrix flat(3, 4);
    for (int j = 0; j < 4; ++j) flat.at(0, j) = 1.0;
    for (int j = 0; j < 4; ++j) flat.at(1, j) = 2.0;
    for (int j = 0; j < 4; ++j) flat.at(2, j) = 3.0;
    REQUIRE_THROWS_KIND(minL1Preimage(flat, VecC(3, cplx(1.0, 0.0))),
                        ErrKind::DegenerateQuotient);
  }

  testkit::section("wider random least-l1 instances");
  for (int trial = 0; trial < 25; ++trial) {
    Rng rng = Rng::forSlot(707, trial);
    const int n = 2 + trial % 3;
    const int m = n + 1 + trial % 4;
    CMatrix q(n, m);
    for (auto& z : q.a) z = cplx(rng.gaussian(), 0.0);
    VecC x(n);
    for (auto& z : x) z = cplx(rng.gaussian(), 0.0);
    double refVal = 0.0;
    bool feasible = true;
    try {
      refVal = oracle::minL1Value(q, x);
    } catch (...) {
      feasible = false;
    }
    if (!feasible) continue;
    PreimageResult pre = minL1Preimage(q, x);
    REQUIRE_CLOSE(pre.l1, refVal, 1e-8);
  }

  return testkit::finish("test_numerics");
}
