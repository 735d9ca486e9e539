#include "oplab/obstruction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oplab/interpolation.hpp"
#include "oplab/textio.hpp"

namespace oplab {

namespace {

void checkNorm(const OsElement& x, double want, const char* what) {
  NormCertificate c = osNorm(x);
  if (std::abs(c.upper - want) > 1e-9 * std::max(1.0, want) || !c.exact)
    throw Error(ErrKind::DegenerateCertificate,
                std::string("special-matrix norm check failed for ") + what);
}

}  // namespace

SpecialMatrices buildSpecial(int n, double r, const OsDescriptor& desc) {
  if (n < 1) throw Error(ErrKind::Input, "special matrices need n >= 1");
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrKind::Input, "scale r must be positive");
  if (desc.dim < 2 * n)
    throw Error(ErrKind::Truncation,
                "descriptor dimension too small: the construction needs 2n directions");
  SpecialMatrices s;
  s.n = n;
  s.r = r;
  s.c = makeZeroElement(desc, n);
  s.d = makeZeroElement(desc, n);
  for (int jj = 0; jj < n; ++jj) {
    OsElement aj = makeZeroElement(desc, n);
    OsElement bj = makeZeroElement(desc, n);
    aj.coords[2 * jj].at(jj, 0) = r;
    bj.coords[2 * jj + 1].at(jj, 0) = r;
    s.c.coords[2 * jj].at(jj, 0) = r;
    s.d.coords[2 * jj + 1].at(jj, 0) = r;
    s.a.push_back(std::move(aj));
    s.b.push_back(std::move(bj));
  }
  if (desc.kind == SpaceKind::Row) {
    const double rt2 = std::sqrt(2.0) * r;
    for (int jj = 0; jj < n; ++jj) {
      checkNorm(s.a[jj], r, "a_j");
      checkNorm(s.b[jj], r, "b_j");
      checkNorm(elemSub(s.a[jj], s.b[jj]), rt2, "a_j - b_j");
    }
    checkNorm(s.c, r, "c");
    checkNorm(s.d, r, "d");
    checkNorm(elemSub(s.c, s.d), rt2, "c - d");
  }
  return s;
}

std::vector<Lemma32Row> lemma32Table(int nMin, int nMax, const std::vector<double>& thetas,
                                     const SolveBudget& budget) {
  if (nMin < 1 || nMax < nMin) throw Error(ErrKind::Input, "bad n range");
  if (thetas.empty()) throw Error(ErrKind::EmptyInput, "no interpolation parameters given");
  for (double th : thetas)
    if (!(th >= 0.0 && th <= 1.0))
      throw Error(ErrKind::Input, "interpolation parameter must lie in [0,1]");

  std::vector<Lemma32Row> rows;
  for (int n = nMin; n <= nMax; ++n) {
    // the column-of-basis element: coordinate k is the matrix unit at (k,1)
    VecC flat(static_cast<size_t>(n) * n * n, cplx(0.0));
    for (int k = 0; k < n; ++k) flat[(static_cast<size_t>(k) * n + k) * n + 0] = 1.0;
    NormCouple couple = coupleRowRowOp(n, n);
    for (double th : thetas) {
      Lemma32Row row;
      row.n = n;
      row.theta = th;
      row.target = std::pow(static_cast<double>(n), th / 2.0);
      row.dualLower = lowerDual(flat, couple, th, flat).lower;
      BracketResult br = bracket(flat, couple, th, budget, 1);
      row.upper = br.upper;
      const double lower = std::max(row.dualLower, br.lower);
      row.width = row.upper - lower;
      const double tol = 1e-6 * std::max(1.0, row.target);
      if (row.target < lower - tol || row.target > row.upper + tol)
        throw Error(ErrKind::DegenerateCertificate,
                    "interpolation bracket excludes the exact value");
      rows.push_back(row);
    }
  }
  return rows;
}

ObstructionTable growthObstruction(double theta, double gamma, double r, double D, double L,
                                   long nMin, long nMax) {
  if (!(r > 0.0) || !(D > 0.0) || !(L > 0.0))
    throw Error(ErrKind::Input, "parameters r, D, L must be positive");
  if (!(theta >= 0.0 && theta <= 1.0) || !(gamma >= 0.0 && gamma <= 1.0))
    throw Error(ErrKind::Input, "exponents must lie in [0,1]");
  if (nMin < 1 || nMax < nMin) throw Error(ErrKind::Input, "bad n range");
  if (theta == gamma)
    throw Error(ErrKind::Ordering, "growth exponents coincide: no obstruction direction");

  ObstructionTable t;
  t.thetaUsed = theta;
  t.gammaUsed = gamma;
  if (theta > gamma) {
    // the opposite-space symmetry swaps the roles of the endpoints, replacing
    // the pair (theta, gamma) by (1-theta, 1-gamma)
    t.symmetricReduction = true;
    t.thetaUsed = 1.0 - theta;
    t.gammaUsed = 1.0 - gamma;
  }

  for (long n = nMin; n <= nMax; ++n) {
    ObstructionRow row;
    row.n = n;
    row.lhs = D * std::pow(static_cast<double>(n), t.gammaUsed / 2.0);
    row.rhs = 2.0 * L * r * std::pow(static_cast<double>(n), t.thetaUsed / 2.0) + L;
    row.violated = row.lhs > row.rhs;
    if (row.violated && t.firstTrueViolation == 0) t.firstTrueViolation = n;
    t.rows.push_back(row);
  }
  t.violationInRange = t.firstTrueViolation != 0;
  t.bFormula = std::pow((2.0 * L * r + L) / D, 2.0 / (t.gammaUsed - t.thetaUsed));
  t.nStar = (t.bFormula < 9e15) ? static_cast<long>(std::floor(t.bFormula)) + 1 : -1;
  return t;
}

XMap xmapTranspose(int dim) {
  if (dim < 1) throw Error(ErrKind::Input, "map dimension must be positive");
  XMap f;
  f.srcDim = f.tgtDim = dim;
  f.name = "transpose";
  f.eval = [](const VecC& v) { return v; };
  return f;
}

XMap xmapCollapse(int dim) {
  if (dim < 1) throw Error(ErrKind::Input, "map dimension must be positive");
  XMap f;
  f.srcDim = f.tgtDim = dim;
  f.name = "collapse";
  f.eval = [dim](const VecC& v) {
    VecC w(v.size(), cplx(0.0));
    for (int k = 0; k + 1 < dim; k += 2) w[k] = v[k] + v[k + 1];
    if (dim % 2 == 1) w[dim - 1] = v[dim - 1];
    return w;
  };
  return f;
}

XMap xmapScaledTranspose(int dim, double scale) {
  if (dim < 1) throw Error(ErrKind::Input, "map dimension must be positive");
  if (!std::isfinite(scale)) throw Error(ErrKind::Input, "non-finite scale");
  XMap f;
  f.srcDim = f.tgtDim = dim;
  f.name = "scaled-transpose";
  f.eval = [scale](const VecC& v) { return vecScale(v, scale); };
  return f;
}

OsElement amplifyXMap(const XMap& f, const OsElement& x, const OsDescriptor& target) {
  if (!f.eval) throw Error(ErrKind::Input, "candidate map has no evaluator");
  if (x.space.dim != f.srcDim)
    throw Error(ErrKind::Shape, "element coordinates do not match the map's source dimension");
  if (target.dim != f.tgtDim)
    throw Error(ErrKind::Shape, "target descriptor does not match the map's target dimension");
  const int n = x.n;
  OsElement out = makeZeroElement(target, n);
  VecC fiber(static_cast<size_t>(f.srcDim));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < f.srcDim; ++k) fiber[k] = x.coords[k].at(i, j);
      VecC w = f.eval(fiber);
      if (static_cast<int>(w.size()) != f.tgtDim || !allFinite(w))
        throw Error(ErrKind::Input, "candidate map returned a bad vector");
      for (int k = 0; k < f.tgtDim; ++k) out.coords[k].at(i, j) = w[k];
    }
  }
  return out;
}

std::vector<DivergenceRow> prop31Divergence(int nMin, int nMax, double r, const XMap& f) {
  if (nMin < 1 || nMax < nMin) throw Error(ErrKind::Input, "bad n range");
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrKind::Input, "scale r must be positive");
  if (!f.eval) throw Error(ErrKind::Input, "candidate map has no evaluator");
  if (f.srcDim < 2 * nMax)
    throw Error(ErrKind::Truncation, "candidate map is too small for the requested range");

  const OsDescriptor srcDesc = makeDescriptor(SpaceKind::Row, f.srcDim);
  const OsDescriptor tgtDesc = makeDescriptor(SpaceKind::Column, f.tgtDim);

  std::vector<DivergenceRow> rows;
  for (int n = nMin; n <= nMax; ++n) {
    SpecialMatrices s = buildSpecial(n, r, srcDesc);
    DivergenceRow row;
    row.n = n;
    double rho = 0.0;
    double stackedSq = 0.0;
    for (int jj = 0; jj < n; ++jj) {
      OsElement diff = elemSub(amplifyXMap(f, s.a[jj], tgtDesc), amplifyXMap(f, s.b[jj], tgtDesc));
      const double disp = osNorm(diff).upper;
      rho = (jj == 0) ? disp : std::min(rho, disp);

      VecC va(static_cast<size_t>(f.srcDim), cplx(0.0));
      VecC vb(static_cast<size_t>(f.srcDim), cplx(0.0));
      va[2 * jj] = r;
      vb[2 * jj + 1] = r;
      VecC y = vecSub(f.eval(va), f.eval(vb));
      if (static_cast<int>(y.size()) != f.tgtDim || !allFinite(y))
        throw Error(ErrKind::Input, "candidate map returned a bad vector");
      const double yn = vecL2(y);
      stackedSq += yn * yn;
    }
    row.rhoWitness = rho;
    row.stacked = std::sqrt(stackedSq);
    OsElement cd = elemSub(amplifyXMap(f, s.c, tgtDesc), amplifyXMap(f, s.d, tgtDesc));
    row.omegaValue = osNorm(cd).upper;
    rows.push_back(row);
  }
  return rows;
}

std::string lemma32Csv(const std::vector<Lemma32Row>& rows) {
  std::ostringstream out;
  out << "n,theta,target,dual_lower,upper,width\n";
  for (const auto& r : rows)
    out << r.n << ',' << formatDouble(r.theta) << ',' << formatDouble(r.target) << ','
        << formatDouble(r.dualLower) << ',' << formatDouble(r.upper) << ','
        << formatDouble(r.width) << '\n';
  return out.str();
}

std::string obstructionCsv(const ObstructionTable& table) {
  std::ostringstream out;
  out << "n,lhs,rhs,violated\n";
  for (const auto& r : table.rows)
    out << r.n << ',' << formatDouble(r.lhs) << ',' << formatDouble(r.rhs) << ','
        << formatBool(r.violated) << '\n';
  return out.str();
}

std::string divergenceCsv(const std::vector<DivergenceRow>& rows) {
  std::ostringstream out;
  out << "n,rho_witness,stacked,omega_value\n";
  for (const auto& r : rows)
    out << r.n << ',' << formatDouble(r.rhoWitness) << ',' << formatDouble(r.stacked) << ','
        << formatDouble(r.omegaValue) << '\n';
  return out.str();
}

}  // namespace oplab
