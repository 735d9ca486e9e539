#include "oplab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oplab/eig.hpp"

namespace oplab {

namespace {

constexpr double kPivTol = 1e-11;
constexpr double kFeasTol = 1e-9;

struct Tableau {
  int m = 0, n = 0;                    // rows, structural columns
  std::vector<std::vector<double>> t;  // m rows of n+1 (last = rhs)
  std::vector<int> basis;              // basis[i] = column basic in row i

  void pivot(int row, int col) {
    const double p = t[row][col];
    const double inv = 1.0 / p;
    for (double& v : t[row]) v *= inv;
    t[row][col] = 1.0;  // cut roundoff
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = t[i][col];
      if (f == 0.0) continue;
      for (int j = 0; j <= n; ++j) t[i][j] -= f * t[row][j];
      t[i][col] = 0.0;
    }
    basis[row] = col;
  }
};

// One simplex phase under Bland's rule for the cost vector `cost` restricted
// to columns [0, usable). Returns false if the problem is unbounded.
bool runSimplex(Tableau& tb, const std::vector<double>& cost, int usable) {
  const int m = tb.m;
  for (long iter = 0;; ++iter) {
    if (iter > 200000) throw Error(ErrKind::Budget, "simplex: iteration cap hit");
    // reduced costs: r_j = c_j - c_B . column_j
    std::vector<double> cb(m);
    for (int i = 0; i < m; ++i) cb[i] = cost[tb.basis[i]];
    int enter = -1;
    for (int j = 0; j < usable; ++j) {
      double r = cost[j];
      for (int i = 0; i < m; ++i) r -= cb[i] * tb.t[i][j];
      if (r < -kPivTol) {
        enter = j;  // Bland: first eligible index
        break;
      }
    }
    if (enter < 0) return true;  // optimal

    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double aij = tb.t[i][enter];
      if (aij > kPivTol) {
        const double ratio = tb.t[i][tb.n] / aij;
        if (ratio < best - 1e-12 ||
            (ratio <= best + 1e-12 && (leave < 0 || tb.basis[i] < tb.basis[leave]))) {
          if (ratio < best) best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;  // unbounded
    tb.pivot(leave, enter);
  }
}

}  // namespace

LpResult simplexSolve(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                      const std::vector<double>& c) {
  const int m = static_cast<int>(a.size());
  if (m == 0) throw Error(ErrKind::EmptyInput, "simplex: no constraints");
  const int n = static_cast<int>(a[0].size());
  if (n == 0) throw Error(ErrKind::EmptyInput, "simplex: no variables");
  if ((int)b.size() != m || (int)c.size() != n) throw Error(ErrKind::Shape, "simplex: size mismatch");

  Tableau tb;
  tb.m = m;
  tb.n = n + m;  // structural + artificial
  tb.t.assign(m, std::vector<double>(tb.n + 1, 0.0));
  tb.basis.resize(m);
  for (int i = 0; i < m; ++i) {
    const double sign = (b[i] < 0.0) ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tb.t[i][j] = sign * a[i][j];
    tb.t[i][n + i] = 1.0;
    tb.t[i][tb.n] = sign * b[i];
    tb.basis[i] = n + i;
  }

  // phase 1: minimize the artificial mass
  std::vector<double> cost1(tb.n, 0.0);
  for (int i = 0; i < m; ++i) cost1[n + i] = 1.0;
  if (!runSimplex(tb, cost1, tb.n)) throw Error(ErrKind::Input, "simplex: phase-1 unbounded");

  double art = 0.0;
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] >= n) art += tb.t[i][tb.n];
  if (art > kFeasTol) throw Error(ErrKind::NoPreimage, "simplex: infeasible system");

  // drive leftover zero-level artificials out of the basis when possible
  for (int i = 0; i < m; ++i) {
    if (tb.basis[i] < n) continue;
    int col = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(tb.t[i][j]) > kPivTol) {
        col = j;
        break;
      }
    if (col >= 0) tb.pivot(i, col);
    // a fully zero structural row is redundant; its artificial stays at level ~0
  }

  // phase 2 over structural columns only
  std::vector<double> cost2(tb.n, 0.0);
  for (int j = 0; j < n; ++j) cost2[j] = c[j];
  for (int i = 0; i < m; ++i) cost2[n + i] = 1e6;  // keep any stuck artificial pinned at zero
  if (!runSimplex(tb, cost2, n)) throw Error(ErrKind::Input, "simplex: objective unbounded");

  LpResult out;
  out.z.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] < n) out.z[tb.basis[i]] = tb.t[i][tb.n];
  out.value = 0.0;
  for (int j = 0; j < n; ++j) out.value += c[j] * out.z[j];
  out.basis = tb.basis;
  return out;
}

PreimageResult minL1Preimage(const CMatrix& q, const VecC& x) {
  if (q.empty()) throw Error(ErrKind::EmptyInput, "preimage: empty quotient matrix");
  if ((int)x.size() != q.rows) throw Error(ErrKind::Shape, "preimage: target length mismatch");
  if (!allFinite(q) || !allFinite(x)) throw Error(ErrKind::Input, "preimage: non-finite input");

  // full row rank is part of the contract for a quotient map
  {
    Svd s = svdGram(q, false);
    const double smax = s.sigma.empty() ? 0.0 : s.sigma[0];
    if (q.rows > q.cols || smax == 0.0 || s.sigma[q.rows - 1] <= 1e-9 * smax)
      throw Error(ErrKind::DegenerateQuotient, "preimage: quotient matrix is rank deficient");
  }

  const int nRows = q.rows;
  const int mCols = q.cols;

  // real decomposition: [Re q, -Im q; Im q, Re q] (p - r) = (Re x; Im x) with
  // p = positive parts, r = negative parts of (Re y; Im y)
  const int realVars = 2 * mCols;           // (Re y_j, Im y_j)
  const int lpCols = 2 * realVars;          // split into + and - parts
  std::vector<std::vector<double>> a(2 * nRows, std::vector<double>(lpCols, 0.0));
  std::vector<double> b(2 * nRows);

  auto reIdx = [&](int j) { return 2 * j; };      // Re y_j among real variables
  auto imIdx = [&](int j) { return 2 * j + 1; };  // Im y_j

  for (int i = 0; i < nRows; ++i) {
    for (int j = 0; j < mCols; ++j) {
      const double qr = q.at(i, j).real();
      const double qi = q.at(i, j).imag();
      // row i: Re(q y) = sum_j qr*Re y_j - qi*Im y_j
      a[i][reIdx(j)] = qr;
      a[i][imIdx(j)] = -qi;
      // row nRows+i: Im(q y) = sum_j qi*Re y_j + qr*Im y_j
      a[nRows + i][reIdx(j)] = qi;
      a[nRows + i][imIdx(j)] = qr;
    }
    b[i] = x[i].real();
    b[nRows + i] = x[i].imag();
  }
  // split z = (plus..., minus...) so column v and column realVars+v carry +/-
  for (auto& row : a) {
    for (int v = 0; v < realVars; ++v) row[realVars + v] = -row[v];
  }

  std::vector<double> plain(lpCols, 1.0);
  LpResult base = simplexSolve(a, b, plain);

  // graded costs prefer support on the earliest coordinates (then the real
  // part, then the positive half) among optimal vertices
  const double eta = 1e-7;
  std::vector<double> graded(lpCols);
  for (int v = 0; v < lpCols; ++v) {
    const int half = v / realVars;       // 0 = positive part, 1 = negative part
    const int rv = v % realVars;
    const int j = rv / 2;                // source coordinate
    const int im = rv % 2;               // 0 = real, 1 = imaginary
    graded[v] = 1.0 + eta * (4.0 * j + 2.0 * im + half) / (4.0 * mCols + 4.0);
  }
  LpResult tie = simplexSolve(a, b, graded);

  PreimageResult out;
  out.y.resize(mCols);
  double l1 = 0.0;
  for (int j = 0; j < mCols; ++j) {
    const double re = tie.z[reIdx(j)] - tie.z[realVars + reIdx(j)];
    const double im = tie.z[imIdx(j)] - tie.z[realVars + imIdx(j)];
    out.y[j] = cplx(re, im);
    l1 += std::abs(re) + std::abs(im);
  }
  out.l1 = l1;
  out.check = base.value;
  if (l1 > base.value + 1e-9 * (1.0 + base.value))
    throw Error(ErrKind::Input, "preimage: tie-broken vertex is not optimal");
  return out;
}

}  // namespace oplab
