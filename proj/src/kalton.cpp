#include "oplab/kalton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "oplab/eig.hpp"
#include "oplab/lp.hpp"
#include "oplab/rng.hpp"
#include "oplab/textio.hpp"

namespace oplab {

namespace {

// level-1 norm of a coordinate vector under the descriptor's matrix norms
double vecNorm(const OsDescriptor& desc, const VecC& v) {
  OsElement e = makeZeroElement(desc, 1);
  if (v.size() != e.coords.size()) throw Error(ErrKind::Shape, "coordinate count mismatch");
  for (size_t a = 0; a < v.size(); ++a) e.coords[a].a[0] = v[a];
  NormCertificate c = osNorm(e);
  return c.upper;  // exact at level 1 for every built-in descriptor
}

VecC fiberAt(const OsElement& x, int i, int j) {
  VecC v(x.coords.size());
  for (size_t a = 0; a < v.size(); ++a) v[a] = x.coords[a].at(i, j);
  return v;
}

bool partIsZero(const OsElement& e) {
  for (const auto& m : e.coords)
    for (const auto& z : m.a)
      if (z != cplx(0.0, 0.0)) return false;
  return true;
}

void prune(ZMat& z) {
  for (auto it = z.parts.begin(); it != z.parts.end();) {
    if (partIsZero(it->second))
      it = z.parts.erase(it);
    else
      ++it;
  }
}

NormCertificate maxCombine(const NormCertificate& a, const NormCertificate& b,
                           const std::string& method) {
  NormCertificate out;
  out.lower = std::max(a.lower, b.lower);
  out.upper = std::max(a.upper, b.upper);
  out.exact = out.upper == out.lower;
  out.method = method;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// quotient data

QuotientMapData signVectorQuotient(int nTarget) {
  if (nTarget < 1) throw Error(ErrKind::Input, "quotient target dimension must be >= 1");
  if (nTarget > 20) throw Error(ErrKind::Input, "quotient target dimension too large");
  const int m = 1 << (nTarget - 1);
  QuotientMapData out;
  out.q = CMatrix(nTarget, m);
  for (int j = 0; j < m; ++j) {
    out.q.at(0, j) = 1.0;
    for (int t = 1; t < nTarget; ++t)
      out.q.at(t, j) = ((j >> (t - 1)) & 1) ? -1.0 : 1.0;
  }
  out.source = makeDescriptor(SpaceKind::MinL1, m);
  out.target = makeDescriptor(SpaceKind::MinLinf, nTarget);
  out.delta = 1.0;
  out.c = 1.0;

  // certify the quotient constant on the extreme points of the target ball
  for (int mask = 0; mask < (1 << nTarget); ++mask) {
    VecC s(nTarget);
    for (int t = 0; t < nTarget; ++t) s[t] = ((mask >> t) & 1) ? -1.0 : 1.0;
    PreimageResult pre = minL1Preimage(out.q, s);
    if (pre.l1 > 1.0 + 1e-9)
      throw Error(ErrKind::DegenerateQuotient,
                  "a sign vector has no unit-norm preimage; quotient constant is not 1");
  }
  return out;
}

VecC applyQuotient(const QuotientMapData& q, const VecC& y) {
  if (static_cast<int>(y.size()) != q.q.cols)
    throw Error(ErrKind::Shape, "source coordinate count mismatch");
  VecC x(q.q.rows, cplx(0.0, 0.0));
  for (int t = 0; t < q.q.rows; ++t)
    for (int j = 0; j < q.q.cols; ++j) x[t] += q.q.at(t, j) * y[j];
  return x;
}

OsElement applyQuotientMat(const QuotientMapData& q, const OsElement& y) {
  if (static_cast<int>(y.coords.size()) != q.q.cols)
    throw Error(ErrKind::Shape, "source coordinate count mismatch");
  OsElement out = makeZeroElement(q.target, y.n);
  for (int t = 0; t < q.q.rows; ++t)
    for (int j = 0; j < q.q.cols; ++j) {
      const cplx w = q.q.at(t, j);
      if (w == cplx(0.0, 0.0)) continue;
      for (size_t p = 0; p < out.coords[t].a.size(); ++p)
        out.coords[t].a[p] += w * y.coords[j].a[p];
    }
  return out;
}

// ---------------------------------------------------------------------------
// homogeneous maps

HomogeneousMap homogeneousExtension(std::function<VecC(const VecC&)> sphereRule,
                                    const OsDescriptor& source, const OsDescriptor& target,
                                    int summand, const std::string& name) {
  if (!sphereRule) throw Error(ErrKind::Input, "no sphere rule supplied");
  HomogeneousMap f;
  f.source = source;
  f.target = target;
  f.summand = summand;
  f.name = name;
  const int tgtDim = target.dim;
  f.eval = [sphereRule, source, tgtDim](const VecC& x) -> VecC {
    const double nx = vecNorm(source, x);
    if (nx == 0.0) return VecC(tgtDim, cplx(0.0, 0.0));
    VecC u(x.size());
    for (size_t a = 0; a < x.size(); ++a) u[a] = x[a] / nx;
    VecC w = sphereRule(u);
    if (static_cast<int>(w.size()) != tgtDim || !allFinite(w))
      throw Error(ErrKind::Input, "sphere rule returned a bad vector");
    for (auto& z : w) z *= nx;
    return w;
  };
  return f;
}

HomogeneousMap identityHomogeneous(const OsDescriptor& space) {
  HomogeneousMap f;
  f.source = space;
  f.target = space;
  f.eval = [](const VecC& x) { return x; };
  f.claimedNorm = 1.0;
  f.name = "identity";
  return f;
}

HomogeneousMap constantDirectionMap(const OsDescriptor& source, const OsDescriptor& target,
                                    const VecC& v) {
  if (static_cast<int>(v.size()) != target.dim)
    throw Error(ErrKind::Shape, "direction does not match the target dimension");
  HomogeneousMap f = homogeneousExtension([v](const VecC&) { return v; }, source, target, -1,
                                          "constant-direction");
  f.claimedNorm = vecNorm(target, v);
  return f;
}

OsElement amplifyHomogeneous(const HomogeneousMap& f, const OsElement& x) {
  if (x.space.kind != f.source.kind || x.space.dim != f.source.dim)
    throw Error(ErrKind::Shape, "element does not live over the map's source");
  OsElement out = makeZeroElement(f.target, x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      VecC w = f.eval(fiberAt(x, i, j));
      if (static_cast<int>(w.size()) != f.target.dim || !allFinite(w))
        throw Error(ErrKind::Input, "map returned a bad vector");
      for (size_t a = 0; a < w.size(); ++a) out.coords[a].at(i, j) = w[a];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Z(Q) elements

ZVec zvAdd(const ZVec& a, const ZVec& b) {
  ZVec out = a;
  for (const auto& [m, v] : b.parts) {
    auto it = out.parts.find(m);
    if (it == out.parts.end()) {
      out.parts.emplace(m, v);
    } else {
      if (it->second.size() != v.size()) throw Error(ErrKind::Shape, "summand size mismatch");
      for (size_t i = 0; i < v.size(); ++i) it->second[i] += v[i];
    }
  }
  return out;
}

ZVec zvScale(const ZVec& a, cplx s) {
  ZVec out = a;
  for (auto& [m, v] : out.parts)
    for (auto& z : v) z *= s;
  return out;
}

ZMat zmAdd(const ZMat& a, const ZMat& b) {
  if (a.k != b.k) throw Error(ErrKind::Shape, "matrix sizes differ");
  ZMat out = a;
  for (const auto& [m, e] : b.parts) {
    auto it = out.parts.find(m);
    if (it == out.parts.end())
      out.parts.emplace(m, e);
    else
      it->second = elemAdd(it->second, e);
  }
  prune(out);
  return out;
}

ZMat zmSub(const ZMat& a, const ZMat& b) { return zmAdd(a, zmScale(b, cplx(-1.0, 0.0))); }

ZMat zmScale(const ZMat& a, cplx s) {
  ZMat out = a;
  for (auto& [m, e] : out.parts) e = elemScale(e, s);
  prune(out);
  return out;
}

ZMat zmZero(const QuotientMapData&, int k) {
  ZMat z;
  z.k = k;
  return z;
}

ZMat amplifyToZ(const std::function<ZVec(const VecC&)>& f, const QuotientMapData& q,
                const OsElement& x) {
  ZMat out;
  out.k = x.n;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      ZVec zv = f(fiberAt(x, i, j));
      for (const auto& [m, w] : zv.parts) {
        if (static_cast<int>(w.size()) != q.source.dim || !allFinite(w))
          throw Error(ErrKind::Input, "map returned a bad summand vector");
        auto it = out.parts.find(m);
        if (it == out.parts.end())
          it = out.parts.emplace(m, makeZeroElement(q.source, x.n)).first;
        for (size_t a = 0; a < w.size(); ++a) it->second.coords[a].at(i, j) = w[a];
      }
    }
  prune(out);
  return out;
}

NormCertificate ymNormCert(const QuotientMapData& q, int m, const OsElement& y) {
  if (m < 1) throw Error(ErrKind::Input, "summand index must be >= 1");
  NormCertificate src = osNorm(y);
  NormCertificate qn = osNorm(applyQuotientMat(q, y));
  const double scale = std::ldexp(1.0, -m);
  NormCertificate out;
  out.lower = std::max(scale * src.lower, qn.lower);
  out.upper = std::max(scale * src.upper, qn.upper);
  out.exact = out.upper == out.lower;
  out.method = "ym-max";
  return out;
}

NormCertificate zNormCert(const QuotientMapData& q, const ZMat& z) {
  NormCertificate out;
  out.lower = 0.0;
  out.upper = 0.0;
  out.exact = true;
  out.method = "z-l1-sandwich";
  bool singleExact = true;
  for (const auto& [m, e] : z.parts) {
    NormCertificate c = ymNormCert(q, m, e);
    out.lower = std::max(out.lower, c.lower);
    out.upper += c.upper;
    singleExact = c.exact;
  }
  out.exact = z.parts.empty() || (z.parts.size() == 1 && singleExact) || out.upper == out.lower;
  return out;
}

OsElement quotientTilde(const QuotientMapData& q, const ZMat& z) {
  OsElement out = makeZeroElement(q.target, z.k);
  for (const auto& [m, e] : z.parts) out = elemAdd(out, applyQuotientMat(q, e));
  return out;
}

VecC quotientTildeVec(const QuotientMapData& q, const ZVec& z) {
  VecC out(q.target.dim, cplx(0.0, 0.0));
  for (const auto& [m, v] : z.parts) {
    VecC x = applyQuotient(q, v);
    for (size_t t = 0; t < out.size(); ++t) out[t] += x[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// sections

int sectionSummand(double c, int k, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrKind::Input, "eps must be positive");
  if (k < 1) throw Error(ErrKind::Input, "matrix level must be >= 1");
  if (!(c > 0.0)) throw Error(ErrKind::Input, "section bound must be positive");
  int m = 1;
  while (std::ldexp(1.0, -m + 1) * c * k * k > eps) {
    ++m;
    if (m > 4000) throw Error(ErrKind::Input, "eps is too small to resolve");
  }
  return m;
}

HomogeneousMap sectionIntoZ(const QuotientMapData& q, int k, double eps) {
  const int m = sectionSummand(q.c, k, eps);
  CMatrix qm = q.q;
  HomogeneousMap f = homogeneousExtension(
      [qm](const VecC& u) { return minL1Preimage(qm, u).y; }, q.target, q.source, m,
      "section-m" + std::to_string(m));
  f.claimedNorm = 1.0;
  f.claimedEps.push_back({k, eps, 1.0});
  return f;
}

ZMat sectionAmplified(const QuotientMapData& q, const HomogeneousMap& f, const OsElement& x) {
  if (f.summand < 1) throw Error(ErrKind::Input, "map does not land in a single summand");
  const int m = f.summand;
  return amplifyToZ(
      [&f, m](const VecC& v) {
        ZVec zv;
        zv.parts.emplace(m, f.eval(v));
        return zv;
      },
      q, x);
}

// ---------------------------------------------------------------------------
// eps-norms

namespace {

OsElement gaussianX(const OsDescriptor& desc, int n, Rng& rng, bool realOnly) {
  OsElement x = makeZeroElement(desc, n);
  for (auto& m : x.coords)
    for (auto& v : m.a) v = realOnly ? cplx(rng.gaussian(), 0.0) : rng.gaussianC();
  return x;
}

OsElement scaledToNorm(const OsElement& x, double target) {
  NormCertificate c = osNorm(x);
  if (c.upper <= 0.0) return x;
  return elemScale(x, target / c.upper);
}

}  // namespace

EpsNormReport epsNormLower(const QuotientMapData& q, const HomogeneousMap& f, int k, double eps,
                           double radius, int samples, uint64_t seed) {
  if (k < 1) throw Error(ErrKind::Input, "matrix level must be >= 1");
  if (samples < 1) throw Error(ErrKind::Input, "sample count must be >= 1");
  if (!(eps > 0.0) || !(radius > 0.0)) throw Error(ErrKind::Input, "eps and radius must be positive");
  EpsNormReport rep;
  for (int s = 0; s < samples; ++s) {
    Rng rng = Rng::forSlot(seed, static_cast<uint64_t>(s));
    OsElement x = scaledToNorm(gaussianX(f.source, k, rng, true), radius * rng.uniform01());
    OsElement y;
    if (s % 2 == 0) {
      y = scaledToNorm(gaussianX(f.source, k, rng, true), radius * rng.uniform01());
    } else {
      OsElement step = scaledToNorm(gaussianX(f.source, k, rng, true),
                                    0.1 * radius * rng.uniform01());
      y = elemAdd(x, step);
    }
    NormCertificate num;
    if (f.summand >= 1) {
      num = zNormCert(q, zmSub(sectionAmplified(q, f, x), sectionAmplified(q, f, y)));
    } else {
      num = osNorm(elemSub(amplifyHomogeneous(f, x), amplifyHomogeneous(f, y)));
    }
    NormCertificate d = osDistance(x, y);
    NormCertificate nx = osNorm(x);
    NormCertificate ny = osNorm(y);
    const double denLower = std::max({d.lower, eps * nx.lower, eps * ny.lower});
    const double denUpper = std::max({d.upper, eps * nx.upper, eps * ny.upper});
    if (denUpper <= 0.0) continue;  // degenerate pair
    ++rep.samples;
    rep.strict = std::max(rep.strict, num.lower / denUpper);
    if (denLower > 0.0) rep.conservative = std::max(rep.conservative, num.upper / denLower);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// equivalence pair

EquivalencePair equivalenceMaps(const QuotientMapData& q, int k) {
  if (k < 1) throw Error(ErrKind::Input, "matrix level must be >= 1");
  EquivalencePair e;
  e.q = q;
  e.k = k;
  e.eps = std::exp(-static_cast<double>(k));
  e.f = sectionIntoZ(q, k, e.eps);
  return e;
}

XZPair applyG(const EquivalencePair& e, const ZMat& y) {
  XZPair p;
  p.x = quotientTilde(e.q, y);
  p.z = zmSub(y, sectionAmplified(e.q, e.f, p.x));
  return p;
}

ZMat applyH(const EquivalencePair& e, const XZPair& p) {
  return zmAdd(p.z, sectionAmplified(e.q, e.f, p.x));
}

NormCertificate xzNormCert(const QuotientMapData& q, const XZPair& p) {
  return maxCombine(osNorm(p.x), zNormCert(q, p.z), "xz-max-sum");
}

double kernelResidual(const QuotientMapData& q, const ZMat& z) {
  return osNorm(quotientTilde(q, z)).upper;
}

// ---------------------------------------------------------------------------
// node families and spherical gluing

NodeFamily interpolateFamily(const QuotientMapData& q, int k, int tMax) {
  if (tMax < 0) throw Error(ErrKind::Input, "node range must contain t = 0");
  NodeFamily fam;
  fam.q = q;
  for (int n = 0; n <= tMax; ++n) {
    const double eps = std::exp(-2.0 * (n + 1));
    HomogeneousMap f = sectionIntoZ(q, k, eps);
    f.claimedEps.push_back({k, std::exp(-2.0 * n), 1.0});
    fam.nodes.push_back(std::move(f));
  }
  fam.slideConstant = 2.0;
  return fam;
}

ZVec familyEval(const NodeFamily& family, double t, const VecC& v) {
  if (family.nodes.empty()) throw Error(ErrKind::EmptyInput, "the node family is empty");
  const int tMax = static_cast<int>(family.nodes.size()) - 1;
  t = std::clamp(t, 0.0, static_cast<double>(tMax));
  int n = std::min(static_cast<int>(std::floor(t)), std::max(tMax - 1, 0));
  const double w1 = t - n;
  ZVec out;
  if (w1 < 1.0) {
    const HomogeneousMap& f = family.nodes[static_cast<size_t>(n)];
    out.parts.emplace(f.summand, f.eval(v));
    if (1.0 - w1 != 1.0) out = zvScale(out, cplx(1.0 - w1, 0.0));
  }
  if (w1 > 0.0) {
    const HomogeneousMap& f = family.nodes[static_cast<size_t>(n) + 1];
    ZVec hi;
    hi.parts.emplace(f.summand, f.eval(v));
    out = zvAdd(out, zvScale(hi, cplx(w1, 0.0)));
  }
  return out;
}

GluedMap glueSpherical(const NodeFamily& family, double constantK) {
  if (family.nodes.empty()) throw Error(ErrKind::EmptyInput, "the node family is empty");
  if (!(constantK > 0.0)) throw Error(ErrKind::Input, "the gluing constant must be positive");
  GluedMap g;
  g.family = family;
  g.constantK = constantK;
  g.hypothesisViolation = std::make_shared<bool>(false);
  return g;
}

ZMat gluedEval(const GluedMap& glued, const OsElement& x) {
  const QuotientMapData& q = glued.family.q;
  if (x.space.kind != q.target.kind || x.space.dim != q.target.dim)
    throw Error(ErrKind::Shape, "element does not live over the quotient target");
  const double nx = osNorm(x).upper;
  if (nx == 0.0) return zmZero(q, x.n);
  const int tMax = static_cast<int>(glued.family.nodes.size()) - 1;
  const double t = std::clamp(nx <= 1.0 ? 0.0 : std::log(nx), 0.0, static_cast<double>(tMax));
  const int n = std::min(static_cast<int>(std::floor(t)), std::max(tMax - 1, 0));
  const double w1 = t - n;
  if (w1 == 0.0 || tMax == 0) {
    const HomogeneousMap& f = glued.family.nodes[static_cast<size_t>(n)];
    return sectionAmplified(q, f, x);
  }
  ZMat lo = sectionAmplified(q, glued.family.nodes[static_cast<size_t>(n)], x);
  ZMat hi = sectionAmplified(q, glued.family.nodes[static_cast<size_t>(n) + 1], x);
  // sampled check of the sliding hypothesis at this point; certified only
  // when even the lower bound of the bracket exceeds the claimed bound
  NormCertificate slide = zNormCert(q, zmSub(lo, hi));
  if (slide.lower > glued.constantK * nx * (1.0 + 1e-9) + 1e-12)
    *glued.hypothesisViolation = true;
  return zmAdd(zmScale(lo, cplx(1.0 - w1, 0.0)), zmScale(hi, cplx(w1, 0.0)));
}

PairDisplacement gluedDisplacement(const GluedMap& glued) {
  return [glued](const OsElement& x, const OsElement& y) {
    return zNormCert(glued.family.q, zmSub(gluedEval(glued, x), gluedEval(glued, y)));
  };
}

// ---------------------------------------------------------------------------
// spherical uniqueness

namespace {

OsElement diagonalEmbed(const OsElement& x, const OsElement& y) {
  if (x.coords.size() != y.coords.size() || x.n != y.n)
    throw Error(ErrKind::Shape, "corner blocks must match");
  OsElement out = makeZeroElement(x.space, 2 * x.n);
  for (size_t a = 0; a < x.coords.size(); ++a)
    for (int i = 0; i < x.n; ++i)
      for (int j = 0; j < x.n; ++j) {
        out.coords[a].at(i, j) = x.coords[a].at(i, j);
        out.coords[a].at(x.n + i, x.n + j) = y.coords[a].at(i, j);
      }
  return out;
}

double cornerDeviation(const ZMat& a, const ZMat& b, int k, std::string* where) {
  double dev = 0.0;
  std::map<int, const OsElement*> pa, pb;
  for (const auto& [m, e] : a.parts) pa[m] = &e;
  for (const auto& [m, e] : b.parts) pb[m] = &e;
  std::vector<int> summands;
  for (const auto& [m, e] : pa) summands.push_back(m);
  for (const auto& [m, e] : pb)
    if (!pa.count(m)) summands.push_back(m);
  std::sort(summands.begin(), summands.end());
  for (int m : summands) {
    const OsElement* ea = pa.count(m) ? pa[m] : nullptr;
    const OsElement* eb = pb.count(m) ? pb[m] : nullptr;
    const size_t dim = ea ? ea->coords.size() : eb->coords.size();
    for (size_t c = 0; c < dim; ++c)
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const cplx va = ea ? ea->coords[c].at(i, j) : cplx(0.0, 0.0);
          const cplx vb = eb ? eb->coords[c].at(i, j) : cplx(0.0, 0.0);
          const double d = std::abs(va - vb);
          if (d > dev) {
            dev = d;
            if (where) {
              std::ostringstream os;
              os << "summand " << m << ", coordinate " << c << ", entry (" << i << "," << j
                 << ")";
              *where = os.str();
            }
          }
        }
  }
  return dev;
}

}  // namespace

UniquenessReport sphericalUniquenessCheck(const GluedMap& a, const GluedMap& b, int k,
                                          const std::vector<double>& radii, int samples,
                                          uint64_t seed, double tol) {
  if (k < 2) throw Error(ErrKind::Input, "corner uniqueness needs matrix level >= 2");
  if (radii.empty()) throw Error(ErrKind::EmptyInput, "no radii to check");
  if (samples < 1) throw Error(ErrKind::Input, "sample count must be >= 1");
  const OsDescriptor desc = a.family.q.target;
  UniquenessReport rep;
  for (size_t ri = 0; ri < radii.size(); ++ri) {
    const double r = radii[ri];
    if (!(r > 0.0)) throw Error(ErrKind::Input, "radii must be positive");
    for (int s = 0; s < samples; ++s) {
      Rng rng = Rng::forSlot(seed, ri * static_cast<size_t>(samples) + s);
      OsElement x = scaledToNorm(gaussianX(desc, k, rng, false), r * rng.uniform01());
      OsElement companion = scaledToNorm(gaussianX(desc, k, rng, false), r);
      OsElement big = diagonalEmbed(x, companion);
      ZMat outA = gluedEval(a, big);
      ZMat outB = gluedEval(b, big);
      std::string where;
      const double dev = cornerDeviation(outA, outB, k, &where);
      rep.maxDeviation = std::max(rep.maxDeviation, dev);
      ++rep.checked;
      if (dev > tol && rep.agree) {
        rep.agree = false;
        std::ostringstream os;
        os << "r=" << formatDouble(r) << ", sample " << s << ", " << where;
        rep.witness = os.str();
      }
    }
  }
  return rep;
}

HomogeneousMap modifyOutsideBall(const HomogeneousMap& f, double threshold, const VecC& bump) {
  if (static_cast<int>(bump.size()) != f.target.dim)
    throw Error(ErrKind::Shape, "bump does not match the target dimension");
  HomogeneousMap out = f;
  auto orig = f.eval;
  const OsDescriptor src = f.source;
  out.eval = [orig, src, threshold, bump](const VecC& v) {
    VecC w = orig(v);
    if (vecNorm(src, v) > threshold)
      for (size_t i = 0; i < w.size(); ++i) w[i] += bump[i];
    return w;
  };
  out.claimsHomogeneous = false;
  out.name = f.name + "+outside-mod";
  return out;
}

HomogeneousMap perturbMap(const HomogeneousMap& f, double magnitude) {
  HomogeneousMap out = f;
  auto orig = f.eval;
  const OsDescriptor src = f.source;
  out.eval = [orig, src, magnitude](const VecC& v) {
    VecC w = orig(v);
    if (!w.empty()) w[0] += magnitude * vecNorm(src, v);
    return w;
  };
  out.name = f.name + "+perturbed";
  return out;
}

// ---------------------------------------------------------------------------
// verification sweep

namespace {

void pushCheck(KaltonReport& rep, const std::string& name, bool pass, double margin,
               const std::string& detail) {
  rep.checks.push_back({name, pass, margin, detail});
  if (!pass) rep.allPass = false;
}

// kernel element built by subtracting the section of the projected point
ZMat kernelSample(const QuotientMapData& q, const HomogeneousMap& f, int k, double radius,
                  Rng& rng) {
  ZMat w;
  w.k = k;
  OsElement raw = gaussianX(q.source, k, rng, true);
  NormCertificate c = osNorm(raw);
  if (c.upper > 0.0) raw = elemScale(raw, radius * rng.uniform01() / c.upper);
  w.parts.emplace(f.summand, raw);
  return zmSub(w, sectionAmplified(q, f, quotientTilde(q, w)));
}

}  // namespace

KaltonReport runKaltonChecks(const KaltonConfig& config) {
  if (config.kMin < 1 || config.kMax < config.kMin)
    throw Error(ErrKind::Input, "bad matrix level range");
  if (config.samples < 1) throw Error(ErrKind::Input, "sample count must be >= 1");
  KaltonReport rep;
  rep.config = config;
  const QuotientMapData q = signVectorQuotient(config.nTarget);

  for (int k = config.kMin; k <= config.kMax; ++k) {
    const std::string suffix = "-k" + std::to_string(k);
    EquivalencePair eq = equivalenceMaps(q, k);
    const double ball = std::exp(static_cast<double>(k));

    // section property of Qtilde on random points
    {
      double worst = 0.0;
      for (int s = 0; s < config.samples; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0xA11CEull, static_cast<uint64_t>(k * 100000 + s));
        OsElement x = scaledToNorm(gaussianX(q.target, k, rng, false), ball * rng.uniform01());
        OsElement back = quotientTilde(q, sectionAmplified(q, eq.f, x));
        worst = std::max(worst, osNorm(elemSub(back, x)).upper);
      }
      pushCheck(rep, "section-residual" + suffix, worst <= 1e-9, 1e-9 - worst,
                "max residual " + formatDouble(worst) + " over " +
                    std::to_string(config.samples) + " samples");
    }

    // sampled eps-norm of the section stays below 1
    {
      EpsNormReport e = epsNormLower(q, eq.f, k, eq.eps, ball, config.samples,
                                     config.seed ^ 0xE95ull);
      pushCheck(rep, "eps-norm" + suffix, e.conservative <= 1.0 + 1e-6,
                1.0 + 1e-6 - e.conservative,
                "conservative " + formatDouble(e.conservative) + ", strict " +
                    formatDouble(e.strict) + " over " + std::to_string(e.samples) + " pairs");
    }

    // homogeneity of the section
    {
      double worst = 0.0;
      double worstExact = 0.0;
      for (int s = 0; s < config.samples; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0x40303ull, static_cast<uint64_t>(k * 100000 + s));
        VecC v(static_cast<size_t>(q.target.dim));
        for (auto& z : v) z = rng.gaussianC();
        const double alpha = rng.uniform(0.0, 10.0);
        VecC fa = eq.f.eval([&] {
          VecC av = v;
          for (auto& z : av) z *= alpha;
          return av;
        }());
        VecC af = eq.f.eval(v);
        for (auto& z : af) z *= alpha;
        double dev = 0.0;
        for (size_t i = 0; i < fa.size(); ++i) dev = std::max(dev, std::abs(fa[i] - af[i]));
        worst = std::max(worst, dev / (1.0 + alpha));
        const double pot = std::ldexp(1.0, (s % 7) - 3);  // powers of two scale bit-exactly
        VecC fp = eq.f.eval([&] {
          VecC av = v;
          for (auto& z : av) z *= pot;
          return av;
        }());
        VecC pf = eq.f.eval(v);
        for (auto& z : pf) z *= pot;
        for (size_t i = 0; i < fp.size(); ++i)
          worstExact = std::max(worstExact, std::abs(fp[i] - pf[i]));
      }
      pushCheck(rep, "homogeneity" + suffix, worst <= 1e-9 && worstExact == 0.0,
                1e-9 - worst,
                "relative deviation " + formatDouble(worst) + ", power-of-two deviation " +
                    formatDouble(worstExact));
    }

    // h(g(y)) = y and g(h(x, z)) = (x, z) on samples
    {
      double worstHG = 0.0;
      double worstGH = 0.0;
      for (int s = 0; s < config.samples; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0x1290ull, static_cast<uint64_t>(k * 100000 + s));
        OsElement x1 = scaledToNorm(gaussianX(q.target, k, rng, true),
                                    (ball - 1.0) * rng.uniform01());
        ZMat y = zmAdd(sectionAmplified(q, eq.f, x1), kernelSample(q, eq.f, k, 1.0, rng));
        ZMat backY = applyH(eq, applyG(eq, y));
        worstHG = std::max(worstHG, zNormCert(q, zmSub(backY, y)).upper);

        OsElement x2 = scaledToNorm(gaussianX(q.target, k, rng, true),
                                    (ball - 1.0) * rng.uniform01());
        XZPair p;
        p.x = x2;
        p.z = kernelSample(q, eq.f, k, 1.0, rng);
        XZPair backP = applyG(eq, applyH(eq, p));
        NormCertificate dx = osDistance(backP.x, p.x);
        NormCertificate dz = zNormCert(q, zmSub(backP.z, p.z));
        worstGH = std::max({worstGH, dx.upper, dz.upper});
      }
      pushCheck(rep, "inverse-hg" + suffix, worstHG <= 1e-9, 1e-9 - worstHG,
                "max residual " + formatDouble(worstHG));
      pushCheck(rep, "inverse-gh" + suffix, worstGH <= 1e-9, 1e-9 - worstGH,
                "max residual " + formatDouble(worstGH));
    }

    // displacement window of g on the e^k-ball: <= 2 d + 1 and >= d/2 - 3/2
    {
      double slackUpper = std::numeric_limits<double>::infinity();
      double slackLower = std::numeric_limits<double>::infinity();
      for (int s = 0; s < config.samples; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0xD15Bull, static_cast<uint64_t>(k * 100000 + s));
        OsElement x1 = scaledToNorm(gaussianX(q.target, k, rng, true),
                                    (ball - 1.0) * rng.uniform01());
        OsElement x2 = scaledToNorm(gaussianX(q.target, k, rng, true),
                                    (ball - 1.0) * rng.uniform01());
        ZMat y = zmAdd(sectionAmplified(q, eq.f, x1), kernelSample(q, eq.f, k, 1.0, rng));
        ZMat z = zmAdd(sectionAmplified(q, eq.f, x2), kernelSample(q, eq.f, k, 1.0, rng));
        NormCertificate dist = zNormCert(q, zmSub(y, z));
        XZPair gy = applyG(eq, y);
        XZPair gz = applyG(eq, z);
        XZPair diff;
        diff.x = elemSub(gy.x, gz.x);
        diff.z = zmSub(gy.z, gz.z);
        NormCertificate disp = xzNormCert(q, diff);
        slackUpper = std::min(slackUpper, 2.0 * dist.lower + 1.0 - disp.upper);
        slackLower = std::min(slackLower, disp.lower - (0.5 * dist.upper - 1.5));
      }
      const double margin = std::min(slackUpper, slackLower);
      pushCheck(rep, "g-displacement" + suffix, margin >= -1e-9, margin,
                "min slack upper " + formatDouble(slackUpper) + ", lower " +
                    formatDouble(slackLower));
    }

    // coarse Lipschitz consequence of a verified eps-norm bound
    {
      const double r = 0.7, sPad = 0.4;
      const double radius = r * std::exp(static_cast<double>(k)) + sPad;
      EpsNormReport e = epsNormLower(q, eq.f, k, eq.eps, radius, config.samples,
                                     config.seed ^ 0x11FF2ull);
      const double cap = std::max(1.0, e.conservative);
      double slack = std::numeric_limits<double>::infinity();
      for (int s = 0; s < config.samples; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0x5C0Full, static_cast<uint64_t>(k * 100000 + s));
        OsElement x = scaledToNorm(gaussianX(q.target, k, rng, true), radius * rng.uniform01());
        OsElement y = scaledToNorm(gaussianX(q.target, k, rng, true), radius * rng.uniform01());
        NormCertificate num =
            zNormCert(q, zmSub(sectionAmplified(q, eq.f, x), sectionAmplified(q, eq.f, y)));
        NormCertificate d = osDistance(x, y);
        slack = std::min(slack, cap * d.lower + cap * (r + sPad) - num.upper);
      }
      pushCheck(rep, "coarse-lipschitz" + suffix, slack >= -1e-9, slack,
                "min slack " + formatDouble(slack) + " at bound " + formatDouble(cap));
    }

    // Z-norm sandwich consistency on random multi-summand elements
    {
      bool ok = true;
      std::string detail = "sandwich and projection bounds hold";
      for (int s = 0; s < config.samples && ok; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0x5A4Dull, static_cast<uint64_t>(k * 100000 + s));
        ZMat z;
        z.k = k;
        const int nParts = 1 + static_cast<int>(rng.uniform01() * 3.0);
        for (int pIdx = 0; pIdx < nParts; ++pIdx) {
          const int m = 1 + static_cast<int>(rng.uniform01() * 8.0);
          OsElement e = gaussianX(q.source, k, rng, false);
          auto it = z.parts.find(m);
          if (it == z.parts.end())
            z.parts.emplace(m, e);
          else
            it->second = elemAdd(it->second, e);
        }
        NormCertificate c = zNormCert(q, z);
        if (c.lower > c.upper + 1e-12) {
          ok = false;
          detail = "sandwich inverted at sample " + std::to_string(s);
        }
        if (z.parts.size() == 1 && !zNormCert(q, z).exact &&
            ymNormCert(q, z.parts.begin()->first, z.parts.begin()->second).exact) {
          ok = false;
          detail = "single-summand exactness lost at sample " + std::to_string(s);
        }
        for (const auto& [m, e] : z.parts)
          if (ymNormCert(q, m, e).lower > c.upper + 1e-12) {
            ok = false;
            detail = "projection bound failed at sample " + std::to_string(s);
          }
      }
      pushCheck(rep, "z-sandwich" + suffix, ok, ok ? 0.0 : -1.0, detail);
    }
  }

  // glued family checks at a fixed level
  {
    const int k = std::max(2, config.kMin);
    NodeFamily fam = interpolateFamily(q, k, config.glueTMax);
    GluedMap glued = glueSpherical(fam, 1.0);
    const double outer = std::exp(4.0);

    double worstSection = 0.0;
    double slackGlue = std::numeric_limits<double>::infinity();
    for (int s = 0; s < config.gluePairs; ++s) {
      Rng rng = Rng::forSlot(config.seed ^ 0x615EULL, static_cast<uint64_t>(s));
      OsElement x = scaledToNorm(gaussianX(q.target, k, rng, true), outer * rng.uniform01());
      OsElement y = scaledToNorm(gaussianX(q.target, k, rng, true), outer * rng.uniform01());
      ZMat fx = gluedEval(glued, x);
      ZMat fy = gluedEval(glued, y);
      worstSection = std::max(worstSection,
                              osNorm(elemSub(quotientTilde(q, fx), x)).upper);
      NormCertificate d = osDistance(x, y);
      NormCertificate disp = zNormCert(q, zmSub(fx, fy));
      slackGlue = std::min(slackGlue, 2.0 * d.lower + 1.0 - disp.upper);
    }
    pushCheck(rep, "glued-section", worstSection <= 1e-9, 1e-9 - worstSection,
              "max residual " + formatDouble(worstSection) + " over " +
                  std::to_string(config.gluePairs) + " points");
    pushCheck(rep, "glued-displacement", slackGlue >= -1e-9, slackGlue,
              "min slack " + formatDouble(slackGlue) + " over " +
                  std::to_string(config.gluePairs) + " pairs");

    // restriction to a sphere equals the frozen-parameter amplification
    {
      double worst = 0.0;
      for (int s = 0; s < 20; ++s) {
        Rng rng = Rng::forSlot(config.seed ^ 0x5F4E4Eull, static_cast<uint64_t>(s));
        const double r = std::exp(rng.uniform(0.0, 4.0));
        OsElement x = scaledToNorm(gaussianX(q.target, k, rng, false), r);
        const double t = std::clamp(std::log(osNorm(x).upper), 0.0,
                                    static_cast<double>(config.glueTMax));
        ZMat frozen = amplifyToZ([&](const VecC& v) { return familyEval(fam, t, v); }, q, x);
        NormCertificate dev = zNormCert(q, zmSub(gluedEval(glued, x), frozen));
        worst = std::max(worst, dev.upper);
      }
      pushCheck(rep, "sphere-restriction", worst <= 1e-12, 1e-12 - worst,
                "max deviation " + formatDouble(worst));
    }

    // corner uniqueness: untouched and outside-modified maps agree, an
    // in-ball perturbation is detected
    for (int k2 : {2, 3}) {
      if (k2 > config.kMax + 1) continue;
      NodeFamily famK = interpolateFamily(q, k2, config.glueTMax);
      GluedMap A = glueSpherical(famK, 1.0);
      std::vector<double> radii = {std::exp(0.5), std::exp(1.5), std::exp(3.0)};

      NodeFamily famOut = famK;
      VecC bump(static_cast<size_t>(q.source.dim), cplx(0.0, 0.0));
      bump[0] = 0.37;
      // the node serving the sphere of radius e^t is only ever consulted at
      // fibers of norm <= e^t, so a modification beyond its segment's outer
      // radius e^{n+1} must be invisible to the glued map
      for (size_t ni = 0; ni < famOut.nodes.size(); ++ni)
        famOut.nodes[ni] =
            modifyOutsideBall(famOut.nodes[ni], std::exp(static_cast<double>(ni) + 1.0), bump);
      GluedMap B = glueSpherical(famOut, 1.0);
      UniquenessReport same = sphericalUniquenessCheck(A, B, k2, radii, 10,
                                                        config.seed ^ 0x2B2Bull);

      NodeFamily famBad = famK;
      for (auto& node : famBad.nodes) node = perturbMap(node, 0.05);
      GluedMap C = glueSpherical(famBad, 1.0);
      UniquenessReport detect = sphericalUniquenessCheck(A, C, k2, radii, 10,
                                                          config.seed ^ 0x2B2Bull, 1e-6);

      const std::string name = "uniqueness-k" + std::to_string(k2);
      const bool pass = same.agree && !detect.agree;
      pushCheck(rep, name, pass, same.agree ? -std::log10(same.maxDeviation + 1e-300) : -1.0,
                "agreement deviation " + formatDouble(same.maxDeviation) +
                    "; perturbation detected: " + (detect.agree ? "no" : "yes"));
    }
  }

  return rep;
}

std::string kaltonReportJson(const KaltonReport& report, int indent) {
  nlohmann::json j;
  j["quotient_size"] = report.config.nTarget;
  j["k_min"] = report.config.kMin;
  j["k_max"] = report.config.kMax;
  j["samples"] = report.config.samples;
  j["seed"] = report.config.seed;
  j["glue_t_max"] = report.config.glueTMax;
  j["glue_pairs"] = report.config.gluePairs;
  j["all_pass"] = report.allPass;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["margin"] = c.margin;
    cj["detail"] = c.detail;
    checks.push_back(std::move(cj));
  }
  j["checks"] = std::move(checks);
  return indent >= 0 ? j.dump(indent) : j.dump();
}

}  // namespace oplab
