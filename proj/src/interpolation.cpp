#include "oplab/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "oplab/eig.hpp"
#include "oplab/par.hpp"
#include "oplab/rng.hpp"

namespace oplab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSoftmaxSharpness = 28.0;
constexpr int kFineGridFactor = 16;
constexpr int kStallLimit = 250;

VecC matVec(const CMatrix& m, const VecC& v) {
  if (m.cols != static_cast<int>(v.size()))
    throw Error(ErrKind::Shape, "matrix-vector shape mismatch");
  VecC r(m.rows, cplx(0.0));
  for (int i = 0; i < m.rows; ++i) {
    cplx s = 0.0;
    for (int k = 0; k < m.cols; ++k) s += m.at(i, k) * v[k];
    r[i] = s;
  }
  return r;
}

CMatrix hermitize(const CMatrix& m) {
  CMatrix h(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) h.at(i, j) = 0.5 * (m.at(i, j) + std::conj(m.at(j, i)));
  return h;
}

size_t flatIndex(int n, int k, int i, int j) {
  return (static_cast<size_t>(k) * n + i) * n + j;
}

// block-row embedding of flattened coordinates: n x (n d)
CMatrix embedRowFlat(const VecC& y, int n, int d) {
  CMatrix e(n, n * d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e.at(i, k * n + j) = y[flatIndex(n, k, i, j)];
  return e;
}

// block-column embedding: (n d) x n
CMatrix embedColFlat(const VecC& y, int n, int d) {
  CMatrix e(n * d, n);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e.at(k * n + i, j) = y[flatIndex(n, k, i, j)];
  return e;
}

VecC transposeFlat(const VecC& y, int n, int d) {
  VecC t(y.size());
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t[flatIndex(n, k, i, j)] = y[flatIndex(n, k, j, i)];
  return t;
}

// norming functional of the row norm: with (sigma, u, v) the top singular pair
// of the embedding, Re<xi, y> equals the norm and |<xi, z>| <= ||z||_row.
VecC rowNormingFunctional(const VecC& y, int n, int d) {
  TopSingular t = topSingularPair(embedRowFlat(y, n, d));
  VecC xi(y.size(), cplx(0.0));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        xi[flatIndex(n, k, i, j)] = t.u[i] * std::conj(t.v[static_cast<size_t>(k) * n + j]);
  return xi;
}

VecC colNormingFunctional(const VecC& y, int n, int d) {
  TopSingular t = topSingularPair(embedColFlat(y, n, d));
  VecC xi(y.size(), cplx(0.0));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        xi[flatIndex(n, k, i, j)] = t.u[static_cast<size_t>(k) * n + i] * std::conj(t.v[j]);
  return xi;
}

// spectral-norm-one witness of the nuclear norm (U V* of the SVD), pulled back
// to coordinates through the embedding cells.
VecC rowNuclearFunctional(const VecC& y, int n, int d) {
  Svd s = svdGram(embedRowFlat(y, n, d), true);
  CMatrix w = matmul(s.u, adjoint(s.v));
  VecC xi(y.size(), cplx(0.0));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) xi[flatIndex(n, k, i, j)] = w.at(i, k * n + j);
  return xi;
}

VecC colNuclearFunctional(const VecC& y, int n, int d) {
  Svd s = svdGram(embedColFlat(y, n, d), true);
  CMatrix w = matmul(s.u, adjoint(s.v));
  VecC xi(y.size(), cplx(0.0));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) xi[flatIndex(n, k, i, j)] = w.at(k * n + i, j);
  return xi;
}

double quadraticNorm(const CMatrix& g, const VecC& x) {
  VecC gx = matVec(g, x);
  double s = std::real(pairing(x, gx));
  return std::sqrt(std::max(0.0, s));
}

VecC quadraticNormingFunctional(const CMatrix& g, const VecC& x) {
  double nx = quadraticNorm(g, x);
  VecC gx = matVec(g, x);
  if (nx <= 0.0) return VecC(x.size(), cplx(0.0));
  return vecScale(gx, 1.0 / nx);
}

void checkCoupleInput(const VecC& x, const NormCouple& couple, double theta) {
  if (couple.dim <= 0 || !couple.norm0 || !couple.norm1)
    throw Error(ErrKind::UnsupportedDescriptor, "couple is missing norm callbacks");
  if (static_cast<int>(x.size()) != couple.dim)
    throw Error(ErrKind::Shape, "element length does not match couple dimension");
  if (!allFinite(x)) throw Error(ErrKind::Input, "non-finite element coordinates");
  if (!(theta >= 0.0 && theta <= 1.0))
    throw Error(ErrKind::Input, "interpolation parameter must lie in [0,1]");
}

struct RestartOutcome {
  double bestJ = std::numeric_limits<double>::infinity();
  std::vector<VecC> coeff;  // powers 1..P
  long evals = 0;
};

}  // namespace

NormCouple dualCouple(const NormCouple& c) {
  if (!c.hasDuals() || !c.hasDualSolver())
    throw Error(ErrKind::UnsupportedDescriptor, "couple has no dual-norm callbacks");
  NormCouple d;
  d.dim = c.dim;
  d.norm0 = c.dual0;
  d.norm1 = c.dual1;
  d.nf0 = c.dualNf0;
  d.nf1 = c.dualNf1;
  d.dual0 = c.norm0;
  d.dual1 = c.norm1;
  d.dualNf0 = c.nf0;
  d.dualNf1 = c.nf1;
  d.label0 = c.label0 + "*";
  d.label1 = c.label1 + "*";
  if (c.quadratic) {
    d.quadratic = true;
    d.gram0 = hermitize(hpdPower(c.gram0, -1.0));
    d.gram1 = hermitize(hpdPower(c.gram1, -1.0));
  }
  return d;
}

NormCouple coupleRowColumn(int n, int d) {
  if (n < 1 || d < 1) throw Error(ErrKind::Input, "row/column couple needs n >= 1, d >= 1");
  NormCouple c;
  c.dim = d * n * n;
  c.label0 = "row";
  c.label1 = "column";
  c.norm0 = [n, d](const VecC& y) { return spectralNorm(embedRowFlat(y, n, d)); };
  c.norm1 = [n, d](const VecC& y) { return spectralNorm(embedColFlat(y, n, d)); };
  c.nf0 = [n, d](const VecC& y) { return rowNormingFunctional(y, n, d); };
  c.nf1 = [n, d](const VecC& y) { return colNormingFunctional(y, n, d); };
  c.dual0 = [n, d](const VecC& y) { return nuclearNorm(embedRowFlat(y, n, d)); };
  c.dual1 = [n, d](const VecC& y) { return nuclearNorm(embedColFlat(y, n, d)); };
  c.dualNf0 = [n, d](const VecC& y) { return rowNuclearFunctional(y, n, d); };
  c.dualNf1 = [n, d](const VecC& y) { return colNuclearFunctional(y, n, d); };
  return c;
}

NormCouple coupleRowRowOp(int n, int d) {
  if (n < 1 || d < 1) throw Error(ErrKind::Input, "row/row-op couple needs n >= 1, d >= 1");
  NormCouple c;
  c.dim = d * n * n;
  c.label0 = "row";
  c.label1 = "row_op";
  c.norm0 = [n, d](const VecC& y) { return spectralNorm(embedRowFlat(y, n, d)); };
  c.norm1 = [n, d](const VecC& y) { return spectralNorm(embedRowFlat(transposeFlat(y, n, d), n, d)); };
  c.nf0 = [n, d](const VecC& y) { return rowNormingFunctional(y, n, d); };
  c.nf1 = [n, d](const VecC& y) {
    return transposeFlat(rowNormingFunctional(transposeFlat(y, n, d), n, d), n, d);
  };
  c.dual0 = [n, d](const VecC& y) { return nuclearNorm(embedRowFlat(y, n, d)); };
  c.dual1 = [n, d](const VecC& y) { return nuclearNorm(embedRowFlat(transposeFlat(y, n, d), n, d)); };
  c.dualNf0 = [n, d](const VecC& y) { return rowNuclearFunctional(y, n, d); };
  c.dualNf1 = [n, d](const VecC& y) {
    return transposeFlat(rowNuclearFunctional(transposeFlat(y, n, d), n, d), n, d);
  };
  return c;
}

NormCouple coupleFromGrams(const CMatrix& g0, const CMatrix& g1) {
  if (g0.rows != g0.cols || g1.rows != g1.cols || g0.rows != g1.rows)
    throw Error(ErrKind::Shape, "gram matrices must be square and of equal size");
  if (g0.rows < 1) throw Error(ErrKind::EmptyInput, "empty gram matrices");
  if (!allFinite(g0) || !allFinite(g1)) throw Error(ErrKind::Input, "non-finite gram entries");
  NormCouple c;
  c.dim = g0.rows;
  c.quadratic = true;
  c.gram0 = hermitize(g0);
  c.gram1 = hermitize(g1);
  c.label0 = "hilbert0";
  c.label1 = "hilbert1";
  // definiteness check up front (throws on a non-HPD gram)
  CMatrix inv0 = hermitize(hpdPower(c.gram0, -1.0));
  CMatrix inv1 = hermitize(hpdPower(c.gram1, -1.0));
  CMatrix s0 = c.gram0, s1 = c.gram1;
  c.norm0 = [s0](const VecC& y) { return quadraticNorm(s0, y); };
  c.norm1 = [s1](const VecC& y) { return quadraticNorm(s1, y); };
  c.nf0 = [s0](const VecC& y) { return quadraticNormingFunctional(s0, y); };
  c.nf1 = [s1](const VecC& y) { return quadraticNormingFunctional(s1, y); };
  c.dual0 = [inv0](const VecC& y) { return quadraticNorm(inv0, y); };
  c.dual1 = [inv1](const VecC& y) { return quadraticNorm(inv1, y); };
  c.dualNf0 = [inv0](const VecC& y) { return quadraticNormingFunctional(inv0, y); };
  c.dualNf1 = [inv1](const VecC& y) { return quadraticNormingFunctional(inv1, y); };
  return c;
}

NormCouple coupleWeightedL2(const std::vector<double>& w0, const std::vector<double>& w1) {
  if (w0.empty() || w0.size() != w1.size())
    throw Error(ErrKind::Shape, "weight vectors must be nonempty and of equal length");
  const int n = static_cast<int>(w0.size());
  CMatrix g0(n, n), g1(n, n);
  for (int i = 0; i < n; ++i) {
    if (!(w0[i] > 0.0) || !(w1[i] > 0.0))
      throw Error(ErrKind::Definiteness, "weights must be strictly positive");
    g0.at(i, i) = w0[i];
    g1.at(i, i) = w1[i];
  }
  NormCouple c = coupleFromGrams(g0, g1);
  c.label0 = "weighted-l2-0";
  c.label1 = "weighted-l2-1";
  return c;
}

NormCouple coupleConstant(const CMatrix& g) {
  NormCouple c = coupleFromGrams(g, g);
  c.label0 = "const";
  c.label1 = "const";
  return c;
}

std::vector<double> boundaryAngles(double theta, int edge, int count) {
  if (count < 1) throw Error(ErrKind::Grid, "boundary grid needs at least one point");
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrKind::Input, "boundary arcs are defined for theta strictly inside (0,1)");
  std::vector<double> psi(static_cast<size_t>(count));
  const double cut = 2.0 * kPi * theta;
  if (edge == 1) {
    for (int j = 0; j < count; ++j) psi[j] = cut * (j + 0.5) / count;
  } else if (edge == 0) {
    for (int j = 0; j < count; ++j) psi[j] = cut + (2.0 * kPi - cut) * (j + 0.5) / count;
  } else {
    throw Error(ErrKind::Input, "edge must be 0 or 1");
  }
  return psi;
}

cplx diskPoint(double psi) { return cplx(std::cos(psi), std::sin(psi)); }

VecC candidateBoundaryValue(const AnalyticCandidate& c, cplx zeta) {
  if (c.coeff.empty()) throw Error(ErrKind::EmptyInput, "candidate has no coefficients");
  VecC y = c.coeff[0];
  cplx zp = 1.0;
  for (size_t p = 1; p < c.coeff.size(); ++p) {
    zp *= zeta;
    if (c.coeff[p].size() != y.size())
      throw Error(ErrKind::Shape, "candidate coefficient length mismatch");
    for (size_t i = 0; i < y.size(); ++i) y[i] += c.coeff[p][i] * zp;
  }
  return y;
}

double upperGeometric(const VecC& x, const NormCouple& couple, double theta) {
  checkCoupleInput(x, couple, theta);
  const double n0 = couple.norm0(x);
  const double n1 = couple.norm1(x);
  return std::pow(n0, 1.0 - theta) * std::pow(n1, theta);
}

namespace {

// Exact route for a couple of quadratic norms: simultaneous diagonalization
// turns the couple into weighted l2 norms on the same basis, where the
// interpolated norm has a closed form and the optimal analytic witness has
// constant boundary norms.
CalderonResult quadraticCalderon(const VecC& x, const NormCouple& couple, double theta) {
  CalderonResult res;
  res.quadraticRoute = true;
  res.candidate.theta = theta;
  res.candidate.coeff = {x};
  CongruencePair cp = congruenceDiagonalize(couple.gram1, couple.gram0);
  VecC u = matVec(cp.xinv, x);
  double s = 0.0;
  for (size_t k = 0; k < u.size(); ++k) s += std::pow(cp.lambda[k], theta) * std::norm(u[k]);
  const double value = std::sqrt(std::max(0.0, s));
  res.value = res.rawValue = value;
  res.margin = 0.0;
  if (value <= 0.0) return res;

  // witness check: f(z) = X diag(lambda^((theta-z)/2)) u has boundary norms
  // that are constant in t on each edge; the check runs against the couple's
  // own norm callbacks, so a drift flags gram data inconsistent with the
  // norms actually in force
  const double probes[] = {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 3.7, -5.2, 7.9};
  for (int edge = 0; edge <= 1; ++edge) {
    for (double t : probes) {
      VecC w(u.size());
      for (size_t k = 0; k < u.size(); ++k) {
        const double lg = std::log(cp.lambda[k]);
        const cplx expo = 0.5 * cplx(theta - edge, -t) * lg;
        w[k] = u[k] * std::exp(expo);
      }
      VecC fz = matVec(cp.x, w);
      const double bn = (edge == 0) ? couple.norm0(fz) : couple.norm1(fz);
      ++res.evaluations;
      if (std::abs(bn - value) > 1e-7 * value)
        throw Error(ErrKind::Input,
                    "quadratic couple failed the constant-boundary witness check");
    }
  }
  res.gram0 = couple.gram0;
  res.gram1 = couple.gram1;
  return res;
}

// A couple handed over as bare norm callbacks may still be Hilbertian. Test
// the parallelogram law on deterministic sample pairs; when it holds,
// reconstruct the gram matrix by polarization over the standard basis and
// verify the reconstruction against the callbacks on fresh samples. Any
// failure reports "not quadratic" and the caller keeps the general route.
bool reconstructGram(const std::function<double(const VecC&)>& norm, int dim,
                     uint64_t seed, CMatrix& gram) {
  Rng rng = Rng::forSlot(seed, 0);
  const size_t d = static_cast<size_t>(dim);
  for (int trial = 0; trial < 16; ++trial) {
    VecC a(d), b(d);
    for (auto& v : a) v = rng.gaussianC();
    for (auto& v : b) v = rng.gaussianC();
    VecC sum(d), diff(d);
    for (size_t i = 0; i < d; ++i) {
      sum[i] = a[i] + b[i];
      diff[i] = a[i] - b[i];
    }
    const double na = norm(a), nb = norm(b);
    const double lhs = norm(sum) * norm(sum) + norm(diff) * norm(diff);
    const double rhs = 2.0 * na * na + 2.0 * nb * nb;
    if (std::abs(lhs - rhs) > 1e-8 * std::max(1.0, rhs)) return false;
  }
  // polarization: <e_i, G e_j> from norms of e_j +/- e_i and e_j +/- i e_i
  gram = CMatrix(dim, dim);
  VecC probe(d, cplx(0.0));
  for (int j = 0; j < dim; ++j) {
    probe[j] = 1.0;
    const double nj = norm(probe);
    gram.at(j, j) = nj * nj;
    probe[j] = 0.0;
  }
  auto normSq = [&](const VecC& v) {
    const double nv = norm(v);
    return nv * nv;
  };
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      VecC v(d, cplx(0.0));
      double parts[4];
      const cplx units[4] = {cplx(1.0, 0.0), cplx(-1.0, 0.0), cplx(0.0, 1.0),
                             cplx(0.0, -1.0)};
      for (int q = 0; q < 4; ++q) {
        v[i] = units[q];
        v[j] = 1.0;
        parts[q] = normSq(v);
      }
      // B(u, w) = sum conj(u_k) G_kl w_l recovered from ||w + i^q u||^2
      const cplx bij(0.25 * (parts[0] - parts[1]), 0.25 * (parts[2] - parts[3]));
      gram.at(i, j) = bij;
      gram.at(j, i) = std::conj(bij);
    }
  }
  // the reconstructed form must reproduce the callback on fresh samples
  for (int trial = 0; trial < 24; ++trial) {
    VecC v(d);
    for (auto& w : v) w = rng.gaussianC();
    cplx acc(0.0);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) acc += std::conj(v[i]) * gram.at(i, j) * v[j];
    const double formVal = std::sqrt(std::max(0.0, acc.real()));
    const double direct = norm(v);
    if (std::abs(formVal - direct) > 1e-9 * std::max(1.0, direct)) return false;
  }
  return true;
}

struct EdgeGrid {
  std::vector<cplx> zeta;                 // grid points on the arc
  std::vector<std::vector<cplx>> zpow;    // zpow[j][p] = zeta_j^p, p = 0..P
};

EdgeGrid makeEdgeGrid(double theta, int edge, int count, int degree) {
  EdgeGrid g;
  auto psi = boundaryAngles(theta, edge, count);
  g.zeta.resize(psi.size());
  g.zpow.resize(psi.size());
  for (size_t j = 0; j < psi.size(); ++j) {
    g.zeta[j] = diskPoint(psi[j]);
    g.zpow[j].resize(static_cast<size_t>(degree) + 1);
    cplx zp = 1.0;
    for (int p = 0; p <= degree; ++p) {
      g.zpow[j][p] = zp;
      zp *= g.zeta[j];
    }
  }
  return g;
}

VecC gridValue(const VecC& x, const std::vector<VecC>& coeff, const std::vector<cplx>& zpow) {
  VecC y = x;
  for (size_t p = 0; p < coeff.size(); ++p) {
    const cplx zp = zpow[p + 1];
    const VecC& c = coeff[p];
    for (size_t i = 0; i < y.size(); ++i) y[i] += c[i] * zp;
  }
  return y;
}

}  // namespace

CalderonResult upperCalderon(const VecC& x, const NormCouple& couple, double theta,
                             const SolveBudget& budget, uint64_t seed) {
  checkCoupleInput(x, couple, theta);
  if (budget.degree < 0 || budget.grid < 2 || budget.restarts < 1 || budget.steps < 0)
    throw Error(ErrKind::Budget, "solver budget fields out of range");

  CalderonResult res;
  res.candidate.theta = theta;
  res.candidate.coeff = {x};

  const double nx0 = couple.norm0(x);
  const double nx1 = couple.norm1(x);
  const double geo = std::pow(nx0, 1.0 - theta) * std::pow(nx1, theta);

  if (theta == 0.0 || theta == 1.0) {
    res.value = res.rawValue = geo;
    res.fallbackGeometric = true;
    return res;
  }
  if (couple.quadratic) return quadraticCalderon(x, couple, theta);
  if (geo <= 0.0 || vecL2(x) == 0.0) {
    res.value = res.rawValue = 0.0;
    res.fallbackGeometric = true;
    return res;
  }
  // a couple handed over as bare callbacks may still be Hilbertian; when the
  // parallelogram law holds and the polarized grams reproduce the callbacks,
  // the exact route applies, with its witness verified against the original
  // callbacks (any failure falls through to the general solver)
  if (couple.dim <= 256) {
    CMatrix dg0, dg1;
    if (reconstructGram(couple.norm0, couple.dim, seed ^ 0x9A8Dull, dg0) &&
        reconstructGram(couple.norm1, couple.dim, seed ^ 0xD1A6ull, dg1)) {
      NormCouple enriched = couple;
      enriched.quadratic = true;
      enriched.gram0 = dg0;
      enriched.gram1 = dg1;
      try {
        return quadraticCalderon(x, enriched, theta);
      } catch (const Error&) {
        // reconstruction did not survive verification: keep the general route
      }
    }
  }
  if (!couple.nf0 || !couple.nf1)
    throw Error(ErrKind::UnsupportedDescriptor, "couple is missing norming-functional callbacks");

  const int P = budget.degree;
  const int T = budget.grid;
  const int R = budget.restarts;
  const int S = budget.steps;
  const size_t D = x.size();
  const double ax = maxAbs(x);

  const EdgeGrid grid0 = makeEdgeGrid(theta, 0, T, P);
  const EdgeGrid grid1 = makeEdgeGrid(theta, 1, T, P);

  std::vector<RestartOutcome> slots(static_cast<size_t>(R));

  parallelFor(static_cast<size_t>(R), [&](size_t r) {
    RestartOutcome out;
    Rng rng = Rng::forSlot(seed, r);
    std::vector<VecC> coeff(static_cast<size_t>(P), VecC(D, cplx(0.0)));
    if (r > 0) {
      const double scale = 0.15 * ax / (1.0 + static_cast<double>(r));
      for (auto& c : coeff)
        for (auto& v : c) v = scale * rng.gaussianC();
    }
    std::vector<VecC> momentum(static_cast<size_t>(P), VecC(D, cplx(0.0)));
    double vnorm = 0.0;
    std::vector<double> v0(grid0.zeta.size()), v1(grid1.zeta.size());
    std::vector<VecC> y0(grid0.zeta.size()), y1(grid1.zeta.size());
    int sinceImprove = 0;

    for (int t = 0; t <= S; ++t) {
      double m0 = 0.0, m1 = 0.0;
      for (size_t j = 0; j < grid0.zeta.size(); ++j) {
        y0[j] = gridValue(x, coeff, grid0.zpow[j]);
        v0[j] = couple.norm0(y0[j]);
        m0 = std::max(m0, v0[j]);
      }
      for (size_t j = 0; j < grid1.zeta.size(); ++j) {
        y1[j] = gridValue(x, coeff, grid1.zpow[j]);
        v1[j] = couple.norm1(y1[j]);
        m1 = std::max(m1, v1[j]);
      }
      out.evals += static_cast<long>(grid0.zeta.size() + grid1.zeta.size());
      if (m0 <= 0.0 || m1 <= 0.0) break;
      const double j0 = std::pow(m0, 1.0 - theta) * std::pow(m1, theta);
      if (j0 < out.bestJ * (1.0 - 1e-12)) {
        out.bestJ = j0;
        out.coeff = coeff;
        sinceImprove = 0;
      } else if (++sinceImprove > kStallLimit) {
        break;
      }
      if (t == S || P == 0) break;

      // smoothed max: softmax weights per edge, then one subgradient step on
      // the log of the two-edge geometric mean
      std::vector<VecC> grad(static_cast<size_t>(P), VecC(D, cplx(0.0)));
      for (int edge = 0; edge <= 1; ++edge) {
        const EdgeGrid& grid = (edge == 0) ? grid0 : grid1;
        const std::vector<double>& v = (edge == 0) ? v0 : v1;
        const std::vector<VecC>& y = (edge == 0) ? y0 : y1;
        const double m = (edge == 0) ? m0 : m1;
        const double mix = ((edge == 0) ? (1.0 - theta) : theta) / m;
        std::vector<double> w(v.size());
        double wsum = 0.0;
        for (size_t j = 0; j < v.size(); ++j) {
          w[j] = std::exp(kSoftmaxSharpness * (v[j] / m - 1.0));
          wsum += w[j];
        }
        for (size_t j = 0; j < v.size(); ++j) {
          w[j] /= wsum;
          if (w[j] < 1e-12) continue;
          VecC xi = (edge == 0) ? couple.nf0(y[j]) : couple.nf1(y[j]);
          ++out.evals;
          const double wm = w[j] * mix;
          for (int p = 1; p <= P; ++p) {
            const cplx zc = std::conj(grid.zpow[j][p]);
            VecC& gp = grad[p - 1];
            for (size_t i = 0; i < D; ++i) gp[i] += wm * zc * xi[i];
          }
        }
      }
      double gn = 0.0;
      for (const auto& gp : grad)
        for (const auto& v : gp) gn += std::norm(v);
      gn = std::sqrt(gn);
      for (int p = 0; p < P; ++p)
        for (size_t i = 0; i < D; ++i)
          momentum[p][i] = 0.9 * momentum[p][i] + grad[p][i];
      vnorm = std::max(0.999 * vnorm, gn);
      if (vnorm <= 0.0) break;
      const double step = 0.05 * ax / (1.0 + t / 80.0) / vnorm;
      for (int p = 0; p < P; ++p)
        for (size_t i = 0; i < D; ++i) coeff[p][i] -= step * momentum[p][i];
    }
    if (out.coeff.empty()) out.coeff.assign(static_cast<size_t>(P), VecC(D, cplx(0.0)));

    // Phase two: the loop above closes in on the optimum quickly but its
    // fixed step schedule stalls a few percent short. Polish with steepest
    // descent along a sharp-softmax subgradient and an exact multiplicative
    // line search on the true two-edge objective; every probe is only a
    // boundary norm sweep, so this is cheap relative to the main loop.
    if (P > 0 && std::isfinite(out.bestJ) && out.bestJ > 0.0) {
      std::vector<VecC> cur = out.coeff;
      auto fill = [&](const std::vector<VecC>& cf, double& m0, double& m1) {
        m0 = 0.0;
        m1 = 0.0;
        for (size_t j = 0; j < grid0.zeta.size(); ++j) {
          y0[j] = gridValue(x, cf, grid0.zpow[j]);
          v0[j] = couple.norm0(y0[j]);
          m0 = std::max(m0, v0[j]);
        }
        for (size_t j = 0; j < grid1.zeta.size(); ++j) {
          y1[j] = gridValue(x, cf, grid1.zpow[j]);
          v1[j] = couple.norm1(y1[j]);
          m1 = std::max(m1, v1[j]);
        }
        out.evals += static_cast<long>(grid0.zeta.size() + grid1.zeta.size());
        if (m0 <= 0.0 || m1 <= 0.0) return std::numeric_limits<double>::infinity();
        return std::pow(m0, 1.0 - theta) * std::pow(m1, theta);
      };
      double m0c = 0.0, m1c = 0.0;
      double curJ = fill(cur, m0c, m1c);
      double sigma = 0.02 * ax;
      const int rounds = std::max(30, std::min(160, S / 16));
      int stall = 0;
      std::vector<VecC> cand(static_cast<size_t>(P), VecC(D, cplx(0.0)));
      for (int round = 0; round < rounds && stall < 12; ++round) {
        if (!std::isfinite(curJ) || curJ <= 0.0) break;
        std::vector<VecC> grad(static_cast<size_t>(P), VecC(D, cplx(0.0)));
        for (int edge = 0; edge <= 1; ++edge) {
          const EdgeGrid& grid = (edge == 0) ? grid0 : grid1;
          const std::vector<double>& v = (edge == 0) ? v0 : v1;
          const std::vector<VecC>& y = (edge == 0) ? y0 : y1;
          const double m = (edge == 0) ? m0c : m1c;
          const double mix = ((edge == 0) ? (1.0 - theta) : theta) / m;
          std::vector<double> w(v.size());
          double wsum = 0.0;
          for (size_t j = 0; j < v.size(); ++j) {
            w[j] = std::exp(90.0 * (v[j] / m - 1.0));
            wsum += w[j];
          }
          for (size_t j = 0; j < v.size(); ++j) {
            w[j] /= wsum;
            if (w[j] < 1e-10) continue;
            VecC xi = (edge == 0) ? couple.nf0(y[j]) : couple.nf1(y[j]);
            ++out.evals;
            const double wm = w[j] * mix;
            for (int p = 1; p <= P; ++p) {
              const cplx zc = std::conj(grid.zpow[j][p]);
              VecC& gp = grad[p - 1];
              for (size_t i = 0; i < D; ++i) gp[i] += wm * zc * xi[i];
            }
          }
        }
        double gn = 0.0;
        for (const auto& gp : grad)
          for (const auto& v : gp) gn += std::norm(v);
        gn = std::sqrt(gn);
        if (gn <= 0.0) break;
        double bestStep = 0.0, bestJ2 = curJ;
        const double ladder[] = {3.0, 1.4, 0.7, 0.3, 0.1};
        for (double f : ladder) {
          const double s = sigma * f / gn;
          for (int p = 0; p < P; ++p)
            for (size_t i = 0; i < D; ++i) cand[p][i] = cur[p][i] - s * grad[p][i];
          double a0 = 0.0, a1 = 0.0;
          for (size_t j = 0; j < grid0.zeta.size(); ++j)
            a0 = std::max(a0, couple.norm0(gridValue(x, cand, grid0.zpow[j])));
          for (size_t j = 0; j < grid1.zeta.size(); ++j)
            a1 = std::max(a1, couple.norm1(gridValue(x, cand, grid1.zpow[j])));
          out.evals += static_cast<long>(grid0.zeta.size() + grid1.zeta.size());
          if (a0 <= 0.0 || a1 <= 0.0) continue;
          const double j2 = std::pow(a0, 1.0 - theta) * std::pow(a1, theta);
          if (j2 < bestJ2 * (1.0 - 1e-13)) {
            bestJ2 = j2;
            bestStep = s;
          }
        }
        if (bestStep > 0.0) {
          for (int p = 0; p < P; ++p)
            for (size_t i = 0; i < D; ++i) cur[p][i] -= bestStep * grad[p][i];
          sigma = std::max(bestStep * gn, 1e-7 * ax);
          stall = 0;
        } else {
          sigma *= 0.3;
          ++stall;
        }
        curJ = fill(cur, m0c, m1c);
      }
      if (curJ < out.bestJ) {
        out.bestJ = curJ;
        out.coeff = cur;
      }
    }
    slots[r] = std::move(out);
  });

  size_t bestSlot = 0;
  for (size_t r = 1; r < slots.size(); ++r)
    if (slots[r].bestJ < slots[bestSlot].bestJ) bestSlot = r;
  for (const auto& s : slots) res.evaluations += static_cast<int>(s.evals);
  std::vector<VecC> best = slots[bestSlot].coeff;
  if (best.empty()) best.assign(static_cast<size_t>(P), VecC(D, cplx(0.0)));

  // certify the winning candidate on a fine grid with a Lipschitz safety gap
  const int Tf = kFineGridFactor * T;
  AnalyticCandidate cand;
  cand.theta = theta;
  cand.coeff.resize(static_cast<size_t>(P) + 1);
  cand.coeff[0] = x;
  for (int p = 1; p <= P; ++p) cand.coeff[p] = best[p - 1];

  double m0f = 0.0, m1f = 0.0;
  for (double psi : boundaryAngles(theta, 0, Tf)) {
    m0f = std::max(m0f, couple.norm0(candidateBoundaryValue(cand, diskPoint(psi))));
    ++res.evaluations;
  }
  for (double psi : boundaryAngles(theta, 1, Tf)) {
    m1f = std::max(m1f, couple.norm1(candidateBoundaryValue(cand, diskPoint(psi))));
    ++res.evaluations;
  }
  double lip0 = 0.0, lip1 = 0.0;
  for (int p = 1; p <= P; ++p) {
    lip0 += p * couple.norm0(cand.coeff[p]);
    lip1 += p * couple.norm1(cand.coeff[p]);
  }
  const double gap0 = kPi * (1.0 - theta) / Tf;
  const double gap1 = kPi * theta / Tf;
  const double edge0 = m0f + lip0 * gap0;
  const double edge1 = m1f + lip1 * gap1;
  const double certified = std::pow(edge0, 1.0 - theta) * std::pow(edge1, theta);
  const double raw = std::pow(m0f, 1.0 - theta) * std::pow(m1f, theta);

  if (certified < geo) {
    res.value = certified;
    res.rawValue = raw;
    res.margin = certified - raw;
    res.candidate = cand;
    res.candidate.twist = (edge0 > 0.0 && edge1 > 0.0) ? std::log(edge1 / edge0) : 0.0;
  } else {
    res.value = res.rawValue = geo;
    res.margin = 0.0;
    res.fallbackGeometric = true;
    res.candidate.coeff.assign(static_cast<size_t>(P) + 1, VecC(D, cplx(0.0)));
    res.candidate.coeff[0] = x;
    res.candidate.twist = (nx0 > 0.0 && nx1 > 0.0) ? std::log(nx1 / nx0) : 0.0;
  }
  return res;
}

DualCertificate lowerDual(const VecC& x, const NormCouple& couple, double theta, const VecC& xi) {
  checkCoupleInput(x, couple, theta);
  if (!couple.hasDuals())
    throw Error(ErrKind::UnsupportedDescriptor, "couple has no dual norms for lower bounds");
  if (xi.size() != x.size()) throw Error(ErrKind::Shape, "functional length mismatch");
  if (!allFinite(xi) || vecL2(xi) == 0.0)
    throw Error(ErrKind::DegenerateCertificate, "zero or non-finite dual functional");
  DualCertificate cert;
  cert.xi = xi;
  cert.dual0 = couple.dual0(xi);
  cert.dual1 = couple.dual1(xi);
  const double denom = std::pow(cert.dual0, 1.0 - theta) * std::pow(cert.dual1, theta);
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw Error(ErrKind::DegenerateCertificate, "functional with degenerate dual norm");
  cert.pairing = std::abs(pairing(xi, x));
  cert.lower = cert.pairing / denom;
  return cert;
}

namespace {

// best-effort dual ascent: accept-if-better steps along the Wirtinger gradient
// of log(|<xi,x>| / (d0^(1-theta) d1^theta))
DualCertificate improveDual(const VecC& x, const NormCouple& couple, double theta,
                            DualCertificate best, int iters) {
  VecC xi = best.xi;
  const double nx = vecL2(xi);
  if (nx > 0.0) xi = vecScale(xi, 1.0 / nx);
  for (int t = 0; t < iters; ++t) {
    const cplx s = pairing(xi, x);
    if (std::abs(s) <= 0.0) break;
    const double d0 = couple.dual0(xi);
    const double d1 = couple.dual1(xi);
    if (!(d0 > 0.0) || !(d1 > 0.0)) break;
    VecC eta0 = couple.dualNf0(xi);
    VecC eta1 = couple.dualNf1(xi);
    VecC g(xi.size());
    const cplx ps = std::conj(s) / std::norm(s);
    for (size_t i = 0; i < xi.size(); ++i)
      g[i] = ps * x[i] - (1.0 - theta) / d0 * eta0[i] - theta / d1 * eta1[i];
    const double gn = vecL2(g);
    if (gn <= 0.0) break;
    const double step = 0.5 * vecL2(xi) / (std::sqrt(1.0 + t) * gn);
    VecC trial = vecAdd(xi, vecScale(g, step));
    try {
      DualCertificate cand = lowerDual(x, couple, theta, trial);
      if (cand.lower > best.lower) {
        best = cand;
        const double tn = vecL2(trial);
        xi = vecScale(trial, 1.0 / tn);
      }
    } catch (const Error&) {
      // degenerate trial point: keep the current iterate
    }
  }
  return best;
}

}  // namespace

BracketResult bracket(const VecC& x, const NormCouple& couple, double theta,
                      const SolveBudget& budget, uint64_t seed) {
  checkCoupleInput(x, couple, theta);
  BracketResult br;
  br.theta = theta;

  if (theta == 0.0 || theta == 1.0) {
    const double v = (theta == 0.0) ? couple.norm0(x) : couple.norm1(x);
    br.lower = br.upper = v;
    br.exact = true;
    br.upperKind = "endpoint";
    return br;
  }
  if (vecL2(x) == 0.0) {
    br.lower = br.upper = 0.0;
    br.exact = true;
    br.upperKind = "geometric";
    return br;
  }
  if (couple.dim == 1) {
    // one-dimensional couples interpolate exactly to the geometric mean
    const double v = upperGeometric(x, couple, theta);
    br.lower = br.upper = v;
    br.exact = true;
    br.upperKind = "geometric";
    return br;
  }

  CalderonResult up = upperCalderon(x, couple, theta, budget, seed);
  br.upper = up.value;
  br.margin = up.margin;
  br.upperKind = up.fallbackGeometric ? "geometric" : "calderon";

  if (couple.hasDuals()) {
    std::vector<VecC> dictionary;
    if (couple.nf0) dictionary.push_back(couple.nf0(x));
    if (couple.nf1) dictionary.push_back(couple.nf1(x));
    if (dictionary.size() == 2) dictionary.push_back(vecAdd(dictionary[0], dictionary[1]));
    dictionary.push_back(x);
    // the functional S_theta x pairs optimally when the couple is Hilbertian,
    // natively or as detected by the upper solver
    VecC thetaFunctional;
    if (couple.quadratic)
      thetaFunctional = matVec(hilbertGramTheta(couple.gram0, couple.gram1, theta), x);
    else if (up.quadraticRoute && up.gram0.rows == couple.dim && up.gram1.rows == couple.dim)
      thetaFunctional = matVec(hilbertGramTheta(up.gram0, up.gram1, theta), x);
    if (!thetaFunctional.empty()) dictionary.push_back(thetaFunctional);

    DualCertificate best;
    bool have = false;
    for (const auto& xi : dictionary) {
      try {
        DualCertificate cand = lowerDual(x, couple, theta, xi);
        if (!have || cand.lower > best.lower) {
          best = cand;
          have = true;
        }
      } catch (const Error&) {
        // degenerate dictionary entry: skip it
      }
    }
    if (have) {
      if (couple.hasDualSolver())
        best = improveDual(x, couple, theta, best, std::max(10, budget.steps / 4));
      br.bestDual = best;
      br.lower = best.lower;
      if (couple.hasDualSolver()) {
        // denominator refinement: replace the geometric mean of the endpoint
        // dual norms by a certified interpolated norm of the functional in
        // the dual couple; try both the ascent winner and the optimal-pairing
        // candidate, since ascent optimizes the unrefined quotient
        std::vector<const VecC*> refineSet;
        if (best.pairing > 0.0) refineSet.push_back(&best.xi);
        if (!thetaFunctional.empty() && &best.xi != &thetaFunctional)
          refineSet.push_back(&thetaFunctional);
        NormCouple dc;
        bool haveDual = false;
        for (const VecC* xi : refineSet) {
          try {
            if (!haveDual) {
              dc = dualCouple(couple);
              haveDual = true;
            }
            DualCertificate base = lowerDual(x, couple, theta, *xi);
            CalderonResult du = upperCalderon(*xi, dc, theta, budget, seed ^ 0x5EED5EEDull);
            const double geoStar =
                std::pow(base.dual0, 1.0 - theta) * std::pow(base.dual1, theta);
            const double denom = std::min(du.value, geoStar);
            if (denom > 0.0 && std::isfinite(denom)) {
              const double refined = base.pairing / denom;
              if (refined > br.lower) {
                br.refinedDenominator = denom;
                br.lower = refined;
                br.bestDual = base;
                br.bestDual.lower = refined;
              }
            }
          } catch (const Error&) {
            // dual refinement is optional; the dictionary bound stands
          }
        }
      }
    }
  }

  if (br.lower > br.upper) {
    const double lo = br.upper, hi = br.lower;
    br.lower = lo;
    br.upper = hi;
    br.widened = true;
  }
  const double scale = std::max(br.upper, 1e-300);
  if (br.upper - br.lower <= 1e-9 * scale) br.exact = true;
  if (up.quadraticRoute && br.upper - br.lower <= 1e-7 * scale) br.exact = true;
  return br;
}

NormCertificate bracketToCertificate(const BracketResult& b) {
  NormCertificate c;
  c.lower = b.lower;
  c.upper = b.upper;
  c.exact = b.exact;
  c.method = "interp-" + b.upperKind;
  return c;
}

std::string bracketToJson(const BracketResult& b) {
  nlohmann::json j;
  j["theta"] = b.theta;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  j["exact"] = b.exact;
  j["upper_kind"] = b.upperKind;
  j["margin"] = b.margin;
  return j.dump();
}

CMatrix hilbertGramTheta(const CMatrix& s0, const CMatrix& s1, double theta) {
  if (s0.rows != s0.cols || s1.rows != s1.cols || s0.rows != s1.rows)
    throw Error(ErrKind::Shape, "gram matrices must be square and of equal size");
  if (!(theta >= 0.0 && theta <= 1.0))
    throw Error(ErrKind::Input, "interpolation parameter must lie in [0,1]");
  const CMatrix h0 = hermitize(s0);
  const CMatrix h1 = hermitize(s1);
  const CMatrix r = hpdPower(h0, 0.5);
  const CMatrix rm = hpdPower(h0, -0.5);
  const CMatrix mid = hermitize(matmul(rm, matmul(h1, rm)));
  return hermitize(matmul(r, matmul(hpdPower(mid, theta), r)));
}

double hilbertCoupleExact(const CMatrix& s0, const CMatrix& s1, double theta, const VecC& x) {
  const CMatrix st = hilbertGramTheta(s0, s1, theta);
  return quadraticNorm(st, x);
}

NormCertificate interpNormRC(const OsElement& x, const SolveBudget& budget) {
  if (x.space.kind != SpaceKind::InterpRC)
    throw Error(ErrKind::UnsupportedDescriptor, "element does not live in an interpolated space");
  NormCouple couple = coupleRowColumn(x.n, x.space.dim);
  BracketResult b = bracket(flattenElement(x), couple, x.space.theta, budget, 1);
  return bracketToCertificate(b);
}

}  // namespace oplab
