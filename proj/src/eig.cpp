#include "oplab/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oplab {

namespace {

double offDiagonalMass(const CMatrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j)
      if (i != j) s += std::norm(a.at(i, j));
  return std::sqrt(s);
}

double diagonalScale(const CMatrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows; ++i) s += std::norm(a.at(i, i));
  return std::sqrt(s);
}

}  // namespace

HermEig hermitianEig(const CMatrix& a, bool wantVectors, double tol, int maxSweeps) {
  if (a.empty()) throw Error(ErrKind::EmptyInput, "eigensolver: empty matrix");
  if (a.rows != a.cols) throw Error(ErrKind::Shape, "eigensolver: matrix not square");
  if (!allFinite(a)) throw Error(ErrKind::Input, "eigensolver: non-finite entries");
  const int n = a.rows;

  // Hermitian symmetrization guards against roundoff in the caller's assembly.
  CMatrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      h.at(i, j) = 0.5 * (a.at(i, j) + std::conj(a.at(j, i)));

  CMatrix vecs = wantVectors ? identityMatrix(n) : CMatrix();

  HermEig out;
  if (n == 1) {
    out.values = {h.at(0, 0).real()};
    out.vectors = vecs;
    return out;
  }

  const double scale0 = std::max(diagonalScale(h), offDiagonalMass(h));
  const double stop = tol * std::max(scale0, 1e-300);

  int sweep = 0;
  for (; sweep < maxSweeps; ++sweep) {
    if (offDiagonalMass(h) <= stop) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cplx apq = h.at(p, q);
        const double m = std::abs(apq);
        if (m <= 1e-300) {
          h.at(p, q) = 0.0;
          h.at(q, p) = 0.0;
          continue;
        }
        const cplx u = apq / m;  // unit phase of the pivot entry
        const double app = h.at(p, p).real();
        const double aqq = h.at(q, q).real();
        const double tau = (aqq - app) / (2.0 * m);
        const double sg = (tau >= 0.0) ? 1.0 : -1.0;
        const double t = sg / (std::abs(tau) + std::hypot(tau, 1.0));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // columns p, q:  col_p <- c col_p - s conj(u) col_q ; col_q <- s u col_p + c col_q
        for (int k = 0; k < n; ++k) {
          const cplx hp = h.at(k, p);
          const cplx hq = h.at(k, q);
          h.at(k, p) = c * hp - s * std::conj(u) * hq;
          h.at(k, q) = s * u * hp + c * hq;
        }
        // rows p, q with the adjoint rotation
        for (int k = 0; k < n; ++k) {
          const cplx hp = h.at(p, k);
          const cplx hq = h.at(q, k);
          h.at(p, k) = c * hp - s * u * hq;
          h.at(q, k) = s * std::conj(u) * hp + c * hq;
        }
        h.at(p, q) = 0.0;
        h.at(q, p) = 0.0;
        h.at(p, p) = cplx(h.at(p, p).real(), 0.0);
        h.at(q, q) = cplx(h.at(q, q).real(), 0.0);

        if (wantVectors) {
          for (int k = 0; k < n; ++k) {
            const cplx vp = vecs.at(k, p);
            const cplx vq = vecs.at(k, q);
            vecs.at(k, p) = c * vp - s * std::conj(u) * vq;
            vecs.at(k, q) = s * u * vp + c * vq;
          }
        }
      }
    }
  }

  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = h.at(i, i).real();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return vals[i] < vals[j]; });

  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = vals[order[i]];
  if (wantVectors) {
    out.vectors = CMatrix(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out.vectors.at(i, j) = vecs.at(i, order[j]);
  }
  out.sweeps = sweep;
  return out;
}

Svd svdGram(const CMatrix& a, bool wantVectors) {
  if (a.empty()) throw Error(ErrKind::EmptyInput, "svd: empty matrix");
  if (!allFinite(a)) throw Error(ErrKind::Input, "svd: non-finite entries");

  const bool rowSide = a.rows <= a.cols;
  const int k = std::min(a.rows, a.cols);
  const CMatrix aH = adjoint(a);

  // Gram matrix on the smaller side keeps the eigenproblem as small as possible.
  CMatrix g = rowSide ? matmul(a, aH) : matmul(aH, a);
  HermEig eg = hermitianEig(g, wantVectors);

  Svd out;
  out.sigma.resize(k);
  // eigenvalues ascending -> singular values descending
  for (int i = 0; i < k; ++i) out.sigma[i] = std::sqrt(std::max(0.0, eg.values[k - 1 - i]));

  if (!wantVectors) return out;

  out.u = CMatrix(a.rows, k);
  out.v = CMatrix(a.cols, k);
  const double smax = out.sigma.empty() ? 0.0 : out.sigma[0];
  const double rankTol = smax * 1e-14;

  for (int i = 0; i < k; ++i) {
    VecC w(rowSide ? a.rows : a.cols);
    for (int r = 0; r < (int)w.size(); ++r) w[r] = eg.vectors.at(r, k - 1 - i);
    if (rowSide) {
      for (int r = 0; r < a.rows; ++r) out.u.at(r, i) = w[r];
      if (out.sigma[i] > rankTol && out.sigma[i] > 0.0) {
        // v = a* u / sigma
        for (int r = 0; r < a.cols; ++r) {
          cplx s = 0.0;
          for (int t = 0; t < a.rows; ++t) s += std::conj(a.at(t, r)) * w[t];
          out.v.at(r, i) = s / out.sigma[i];
        }
      }
    } else {
      for (int r = 0; r < a.cols; ++r) out.v.at(r, i) = w[r];
      if (out.sigma[i] > rankTol && out.sigma[i] > 0.0) {
        // u = a v / sigma
        for (int r = 0; r < a.rows; ++r) {
          cplx s = 0.0;
          for (int t = 0; t < a.cols; ++t) s += a.at(r, t) * w[t];
          out.u.at(r, i) = s / out.sigma[i];
        }
      }
    }
  }
  return out;
}

double spectralNorm(const CMatrix& a) {
  Svd s = svdGram(a, false);
  return s.sigma.empty() ? 0.0 : s.sigma[0];
}

double nuclearNorm(const CMatrix& a) {
  Svd s = svdGram(a, false);
  double t = 0.0;
  for (double x : s.sigma) t += x;
  return t;
}

TopSingular topSingularPair(const CMatrix& a) {
  Svd s = svdGram(a, true);
  TopSingular out;
  if (s.sigma.empty()) return out;
  out.sigma = s.sigma[0];
  out.u.resize(a.rows);
  out.v.resize(a.cols);
  for (int i = 0; i < a.rows; ++i) out.u[i] = s.u.at(i, 0);
  for (int i = 0; i < a.cols; ++i) out.v[i] = s.v.at(i, 0);
  if (out.sigma == 0.0) {
    // arbitrary but fixed unit pair keeps downstream formulas total
    out.u.assign(a.rows, 0.0);
    out.v.assign(a.cols, 0.0);
    out.u[0] = 1.0;
    out.v[0] = 1.0;
  }
  return out;
}

CMatrix cholesky(const CMatrix& a, double tol) {
  if (a.empty()) throw Error(ErrKind::EmptyInput, "cholesky: empty matrix");
  if (a.rows != a.cols) throw Error(ErrKind::Shape, "cholesky: matrix not square");
  const int n = a.rows;
  CMatrix l(n, n);
  double diagScale = 0.0;
  for (int i = 0; i < n; ++i) diagScale = std::max(diagScale, std::abs(a.at(i, i).real()));
  if (diagScale == 0.0) diagScale = 1.0;

  for (int j = 0; j < n; ++j) {
    cplx d = a.at(j, j);
    for (int k = 0; k < j; ++k) d -= l.at(j, k) * std::conj(l.at(j, k));
    const double dj = d.real();
    if (dj <= tol * diagScale)
      throw Error(ErrKind::Definiteness, "cholesky: matrix not positive definite");
    const double lj = std::sqrt(dj);
    l.at(j, j) = lj;
    for (int i = j + 1; i < n; ++i) {
      cplx s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * std::conj(l.at(j, k));
      l.at(i, j) = s / lj;
    }
  }
  return l;
}

CMatrix solveLowerTri(const CMatrix& l, const CMatrix& b) {
  if (l.rows != l.cols || l.rows != b.rows) throw Error(ErrKind::Shape, "solveLowerTri shape");
  const int n = l.rows;
  CMatrix x = b;
  for (int c = 0; c < b.cols; ++c) {
    for (int i = 0; i < n; ++i) {
      cplx s = x.at(i, c);
      for (int k = 0; k < i; ++k) s -= l.at(i, k) * x.at(k, c);
      x.at(i, c) = s / l.at(i, i);
    }
  }
  return x;
}

CMatrix solveUpperTri(const CMatrix& u, const CMatrix& b) {
  if (u.rows != u.cols || u.rows != b.rows) throw Error(ErrKind::Shape, "solveUpperTri shape");
  const int n = u.rows;
  CMatrix x = b;
  for (int c = 0; c < b.cols; ++c) {
    for (int i = n - 1; i >= 0; --i) {
      cplx s = x.at(i, c);
      for (int k = i + 1; k < n; ++k) s -= u.at(i, k) * x.at(k, c);
      x.at(i, c) = s / u.at(i, i);
    }
  }
  return x;
}

CMatrix hpdPower(const CMatrix& a, double p) {
  HermEig eg = hermitianEig(a, true);
  const int n = a.rows;
  const double vmax = eg.values.empty() ? 0.0 : eg.values.back();
  CMatrix out(n, n);
  for (int k = 0; k < n; ++k) {
    const double lv = eg.values[k];
    if (lv <= 1e-14 * std::max(vmax, 1e-300))
      throw Error(ErrKind::Definiteness, "hpdPower: matrix not positive definite");
    const double lp = std::pow(lv, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.at(i, j) += lp * eg.vectors.at(i, k) * std::conj(eg.vectors.at(j, k));
  }
  return out;
}

CongruencePair congruenceDiagonalize(const CMatrix& g1, const CMatrix& g0) {
  if (g0.rows != g0.cols || g1.rows != g1.cols || g0.rows != g1.rows)
    throw Error(ErrKind::Shape, "congruence: shape mismatch");
  const CMatrix l = cholesky(g0);
  // b = inv(l) g1 inv(l)*  (Hermitian by construction)
  const CMatrix c1 = solveLowerTri(l, g1);
  CMatrix b = solveLowerTri(l, adjoint(c1));
  for (int i = 0; i < b.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      const cplx sym = 0.5 * (b.at(i, j) + std::conj(b.at(j, i)));
      b.at(i, j) = sym;
    }
  HermEig eg = hermitianEig(b, true);
  const double vmax = eg.values.empty() ? 0.0 : std::max(std::abs(eg.values.front()), std::abs(eg.values.back()));
  for (double lv : eg.values)
    if (lv <= 1e-14 * std::max(vmax, 1e-300))
      throw Error(ErrKind::Definiteness, "congruence: second form not positive definite");

  CongruencePair out;
  out.lambda = eg.values;
  // x = inv(l)* u ; xinv = u* l*
  out.x = solveUpperTri(adjoint(l), eg.vectors);
  out.xinv = matmul(adjoint(eg.vectors), adjoint(l));
  return out;
}

}  // namespace oplab
