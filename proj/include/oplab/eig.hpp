#pragma once

// Self-contained dense kernels: a cyclic complex Jacobi eigensolver for
// Hermitian matrices, an SVD built on the smaller Gram matrix, Cholesky,
// triangular solves, Hermitian-positive powers and congruence
// diagonalization of a definite pair. Everything is deterministic.

#include <vector>

#include "oplab/cmatrix.hpp"

namespace oplab {

struct HermEig {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // columns are eigenvectors, A = V diag(values) V*
  int sweeps = 0;
};

// Cyclic Jacobi with complex rotations. `a` must be square and Hermitian up to
// 1e-12 relative; the strict upper triangle is trusted. Tolerance is on the
// off-diagonal Frobenius mass relative to the diagonal scale.
HermEig hermitianEig(const CMatrix& a, bool wantVectors = true, double tol = 1e-13,
                     int maxSweeps = 100);

struct Svd {
  std::vector<double> sigma;  // descending, length min(rows, cols)
  CMatrix u;                  // rows x k, columns are left vectors (k = #sigma)
  CMatrix v;                  // cols x k, columns are right vectors
};

// Singular values/vectors through the eigendecomposition of the smaller Gram
// matrix (a a* or a* a). Vector columns beyond the numerical rank are zero.
Svd svdGram(const CMatrix& a, bool wantVectors = true);

double spectralNorm(const CMatrix& a);
double nuclearNorm(const CMatrix& a);

struct TopSingular {
  double sigma = 0.0;
  VecC u, v;  // a v = sigma u when sigma > 0
};
TopSingular topSingularPair(const CMatrix& a);

// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
CMatrix cholesky(const CMatrix& a, double tol = 1e-12);

// Solve L X = B (L lower-triangular) / U X = B (U upper-triangular).
CMatrix solveLowerTri(const CMatrix& l, const CMatrix& b);
CMatrix solveUpperTri(const CMatrix& u, const CMatrix& b);

// A^p for Hermitian positive-definite A via its eigendecomposition.
CMatrix hpdPower(const CMatrix& a, double p);

struct CongruencePair {
  std::vector<double> lambda;  // ascending, positive
  CMatrix x;                   // x* g0 x = I, x* g1 x = diag(lambda)
  CMatrix xinv;
};

// Simultaneous diagonalization of a definite pair (g0 HPD, g1 HPD).
CongruencePair congruenceDiagonalize(const CMatrix& g1, const CMatrix& g0);

}  // namespace oplab
