// Quotient constructions and spherical gluing: pinned sign-vector quotients,
// weighted-summand norms, exact nonlinear sections, the equivalence pair and
// its inverses, node families, glued evaluation, and corner uniqueness with
// positive and negative controls.

#include <cmath>
#include <complex>
#include <cstdio>

#include <json.hpp>

#include "oplab/kalton.hpp"
#include "oplab/rng.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

using namespace oplab;

namespace {

// level-1 element of desc holding the coordinate vector v
OsElement levelOne(const OsDescriptor& desc, const VecC& v) {
  OsElement e = makeZeroElement(desc, 1);
  for (size_t a = 0; a < v.size(); ++a) e.coords[a].a[0] = v[a];
  return e;
}

OsElement randomElem(const OsDescriptor& desc, int n, Rng& rng, bool realOnly = false) {
  OsElement x = makeZeroElement(desc, n);
  for (auto& m : x.coords)
    for (auto& z : m.a) z = realOnly ? cplx(rng.gaussian(), 0.0) : rng.gaussianC();
  return x;
}

OsElement withNorm(const OsElement& x, double target) {
  const double u = osNorm(x).upper;
  return u > 0.0 ? elemScale(x, target / u) : x;
}

bool samePartKeys(const ZMat& z, const std::vector<int>& keys) {
  if (z.parts.size() != keys.size()) return false;
  size_t i = 0;
  for (const auto& [m, e] : z.parts)
    if (m != keys[i++]) return false;
  return true;
}

double maxEntryGap(const OsElement& a, const OsElement& b) {
  double dev = 0.0;
  for (size_t c = 0; c < a.coords.size(); ++c)
    for (size_t p = 0; p < a.coords[c].a.size(); ++p)
      dev = std::max(dev, std::abs(a.coords[c].a[p] - b.coords[c].a[p]));
  return dev;
}

}  // namespace

int main() {
  const QuotientMapData q3 = signVectorQuotient(3);

  testkit::section("sign-vector quotient data");
  {
    REQUIRE(q3.q.rows == 3);
    REQUIRE(q3.q.cols == 4);
    REQUIRE(q3.source.kind == SpaceKind::MinL1);
    REQUIRE(q3.source.dim == 4);
    REQUIRE(q3.target.kind == SpaceKind::MinLinf);
    REQUIRE(q3.target.dim == 3);
    REQUIRE(q3.delta == 1.0);
    REQUIRE(q3.c == 1.0);
    for (int j = 0; j < 4; ++j) {
      REQUIRE(q3.q.at(0, j) == cplx(1.0));
      for (int t = 1; t < 3; ++t) {
        const cplx v = q3.q.at(t, j);
        REQUIRE(v == cplx(1.0) || v == cplx(-1.0));
      }
    }
    // all columns are distinct sign patterns
    for (int j = 0; j < 4; ++j)
      for (int j2 = j + 1; j2 < 4; ++j2) {
        bool differ = false;
        for (int t = 0; t < 3; ++t)
          if (q3.q.at(t, j) != q3.q.at(t, j2)) differ = true;
        REQUIRE(differ);
      }
    QuotientMapData q1 = signVectorQuotient(1);
    REQUIRE(q1.q.rows == 1);
    REQUIRE(q1.q.cols == 1);
    REQUIRE(q1.q.at(0, 0) == cplx(1.0));
    REQUIRE_THROWS_KIND(signVectorQuotient(0), ErrKind::Input);
    REQUIRE_THROWS_KIND(signVectorQuotient(21), ErrKind::Input);

    // column j of the matrix is the image of the j-th basis vector
    VecC e0(4, cplx(0.0));
    e0[0] = 1.0;
    VecC img = applyQuotient(q3, e0);
    for (int t = 0; t < 3; ++t) REQUIRE(img[static_cast<size_t>(t)] == q3.q.at(t, 0));
    REQUIRE_THROWS_KIND(applyQuotient(q3, VecC(3, cplx(0.0))), ErrKind::Shape);

    // level-k application places signed copies of the coordinate matrix
    Rng rng = Rng::forSlot(3, 0);
    OsElement y = makeZeroElement(q3.source, 2);
    for (auto& z : y.coords[2].a) z = rng.gaussianC();
    OsElement out = applyQuotientMat(q3, y);
    for (size_t p = 0; p < y.coords[2].a.size(); ++p) {
      REQUIRE(out.coords[0].a[p] == y.coords[2].a[p]);
      REQUIRE(out.coords[1].a[p] == y.coords[2].a[p]);
      REQUIRE(out.coords[2].a[p] == -y.coords[2].a[p]);
    }
  }

  testkit::section("weighted summand norms");
  {
    // this vector has l1 norm 8 and quotient image (0.5, 0, 0), so the
    // weight 2^-3 makes both terms visible: max(1, 0.5) = 1
    VecC v = {cplx(2.125), cplx(-1.875), cplx(-1.875), cplx(2.125)};
    VecC img = applyQuotient(q3, v);
    REQUIRE_CLOSE(std::abs(img[0]), 0.5, 1e-12);
    REQUIRE(std::abs(img[1]) <= 1e-12);
    REQUIRE(std::abs(img[2]) <= 1e-12);
    OsElement y = levelOne(q3.source, v);
    NormCertificate c = ymNormCert(q3, 3, y);
    REQUIRE(c.exact);
    REQUIRE_CLOSE(c.upper, 1.0, 1e-12);

    // a kernel vector leaves only the weighted source term
    VecC kv = {cplx(2.0), cplx(-2.0), cplx(-2.0), cplx(2.0)};
    VecC kimg = applyQuotient(q3, kv);
    for (const auto& z : kimg) REQUIRE(std::abs(z) <= 1e-12);
    OsElement ky = levelOne(q3.source, kv);
    REQUIRE_CLOSE(ymNormCert(q3, 3, ky).upper, 1.0, 1e-12);
    REQUIRE_CLOSE(ymNormCert(q3, 1, ky).upper, 4.0, 1e-12);
    REQUIRE_THROWS_KIND(ymNormCert(q3, 0, ky), ErrKind::Input);
  }

  testkit::section("summand arithmetic and the l1 sandwich");
  {
    Rng rng = Rng::forSlot(17, 0);
    ZMat za;
    za.k = 2;
    za.parts.emplace(1, randomElem(q3.source, 2, rng));
    za.parts.emplace(4, randomElem(q3.source, 2, rng));
    ZMat zb;
    zb.k = 2;
    zb.parts.emplace(4, randomElem(q3.source, 2, rng));
    zb.parts.emplace(7, randomElem(q3.source, 2, rng));

    ZMat sum = zmAdd(za, zb);
    REQUIRE(samePartKeys(sum, {1, 4, 7}));
    REQUIRE(maxEntryGap(sum.parts.at(4),
                        elemAdd(za.parts.at(4), zb.parts.at(4))) == 0.0);
    REQUIRE(zmSub(sum, sum).parts.empty());
    REQUIRE(zmScale(za, cplx(0.0)).parts.empty());
    REQUIRE(zmZero(q3, 3).k == 3);
    REQUIRE(zmZero(q3, 3).parts.empty());
    ZMat zc;
    zc.k = 3;
    REQUIRE_THROWS_KIND(zmAdd(za, zc), ErrKind::Shape);

    // empty elements have exact zero norm; single summands inherit their
    // certificate; multiple summands bracket between max and sum
    NormCertificate zero = zNormCert(q3, zmZero(q3, 2));
    REQUIRE(zero.exact);
    REQUIRE(zero.upper == 0.0);
    ZMat single;
    single.k = 2;
    single.parts.emplace(4, za.parts.at(4));
    NormCertificate sc = zNormCert(q3, single);
    NormCertificate yc = ymNormCert(q3, 4, za.parts.at(4));
    REQUIRE(sc.lower == yc.lower);
    REQUIRE(sc.upper == yc.upper);
    REQUIRE(sc.exact == yc.exact);
    NormCertificate both = zNormCert(q3, za);
    NormCertificate y1 = ymNormCert(q3, 1, za.parts.at(1));
    NormCertificate y4 = ymNormCert(q3, 4, za.parts.at(4));
    REQUIRE_CLOSE(both.lower, std::max(y1.lower, y4.lower), 1e-15);
    REQUIRE_CLOSE(both.upper, y1.upper + y4.upper, 1e-15);
    REQUIRE(both.lower <= both.upper + 1e-15);

    // vector-level arithmetic mirrors the matrix level
    ZVec va;
    va.parts.emplace(2, VecC{cplx(1.0), cplx(2.0), cplx(0.0), cplx(0.0)});
    ZVec vb;
    vb.parts.emplace(2, VecC{cplx(0.5), cplx(-2.0), cplx(0.0), cplx(1.0)});
    vb.parts.emplace(5, VecC{cplx(0.0), cplx(0.0), cplx(3.0), cplx(0.0)});
    ZVec vs = zvAdd(va, vb);
    REQUIRE(vs.parts.size() == 2);
    REQUIRE(vs.parts.at(2)[0] == cplx(1.5));
    REQUIRE(vs.parts.at(2)[1] == cplx(0.0));
    REQUIRE(zvScale(vb, cplx(2.0)).parts.at(5)[2] == cplx(6.0));
    ZVec bad;
    bad.parts.emplace(2, VecC{cplx(1.0)});
    REQUIRE_THROWS_KIND(zvAdd(va, bad), ErrKind::Shape);

    // the induced quotient sums the summand images
    VecC t2 = quotientTildeVec(q3, vs);
    VecC direct = applyQuotient(q3, vs.parts.at(2));
    VecC more = applyQuotient(q3, vs.parts.at(5));
    for (size_t t = 0; t < t2.size(); ++t)
      REQUIRE(std::abs(t2[t] - direct[t] - more[t]) <= 1e-15);
  }

  testkit::section("summand selection for sections");
  {
    REQUIRE(sectionSummand(1.0, 1, 1.0) == 1);
    REQUIRE(sectionSummand(1.0, 2, 8.0) == 1);
    REQUIRE(sectionSummand(1.0, 1, std::exp(-1.0)) == 3);
    REQUIRE(sectionSummand(1.0, 2, std::exp(-2.0)) == 6);
    REQUIRE(sectionSummand(1.0, 3, std::exp(-3.0)) == 9);
    REQUIRE_THROWS_KIND(sectionSummand(1.0, 1, 0.0), ErrKind::Input);
    REQUIRE_THROWS_KIND(sectionSummand(1.0, 0, 1.0), ErrKind::Input);
    REQUIRE_THROWS_KIND(sectionSummand(0.0, 1, 1.0), ErrKind::Input);
  }

  testkit::section("sections invert the quotient exactly");
  {
    HomogeneousMap f = sectionIntoZ(q3, 2, std::exp(-2.0));
    REQUIRE(f.summand == 6);
    REQUIRE(f.claimedNorm == 1.0);

    // level 1: the quotient of the section output reproduces the input
    double worst1 = 0.0;
    for (int s = 0; s < 50; ++s) {
      Rng rng = Rng::forSlot(23, static_cast<uint64_t>(s));
      VecC v(3);
      for (auto& z : v) z = rng.gaussianC();
      VecC back = applyQuotient(q3, f.eval(v));
      for (size_t t = 0; t < v.size(); ++t) worst1 = std::max(worst1, std::abs(back[t] - v[t]));
    }
    REQUIRE_MSG(worst1 <= 1e-12, "level-1 section residual");

    // level 2, complex data, 200 samples through the amplified path
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      Rng rng = Rng::forSlot(29, static_cast<uint64_t>(s));
      OsElement x = withNorm(randomElem(q3.target, 2, rng), std::exp(2.0) * rng.uniform01());
      ZMat z = sectionAmplified(q3, f, x);
      REQUIRE(z.parts.size() <= 1);
      worst = std::max(worst, osNorm(elemSub(quotientTilde(q3, z), x)).upper);
    }
    REQUIRE_MSG(worst <= 1e-9, "level-2 section residual over 200 samples");

    // positive homogeneity: bit-exact for powers of two, tight otherwise
    Rng rng = Rng::forSlot(31, 0);
    VecC v(3);
    for (auto& z : v) z = rng.gaussianC();
    VecC fv = f.eval(v);
    for (double pot : {0.25, 2.0, 8.0}) {
      VecC scaled = v;
      for (auto& z : scaled) z *= pot;
      VecC fs = f.eval(scaled);
      for (size_t i = 0; i < fv.size(); ++i) REQUIRE(fs[i] == pot * fv[i]);
    }
    VecC scaled = v;
    for (auto& z : scaled) z *= 3.7;
    VecC fs = f.eval(scaled);
    for (size_t i = 0; i < fv.size(); ++i)
      REQUIRE(std::abs(fs[i] - 3.7 * fv[i]) <= 1e-12 * (1.0 + std::abs(fv[i])));
    REQUIRE(f.eval(VecC(3, cplx(0.0))) == VecC(4, cplx(0.0)));

    // maps that do not land in a single summand cannot be scattered
    REQUIRE_THROWS_KIND(
        sectionAmplified(q3, identityHomogeneous(q3.target), makeZeroElement(q3.target, 2)),
        ErrKind::Input);
  }

  testkit::section("homogeneous map builders");
  {
    REQUIRE_THROWS_KIND(homogeneousExtension(nullptr, q3.target, q3.source), ErrKind::Input);
    HomogeneousMap broken = homogeneousExtension(
        [](const VecC&) { return VecC(2, cplx(0.0)); }, q3.target, q3.source);
    VecC probe(3, cplx(1.0));
    bool threw = false;
    try {
      broken.eval(probe);
    } catch (const Error& e) {
      threw = e.kind == ErrKind::Input;
    }
    REQUIRE_MSG(threw, "wrong-size rule output is rejected at evaluation");

    VecC dir = {cplx(0.0), cplx(2.0), cplx(0.0), cplx(0.0)};
    HomogeneousMap cd = constantDirectionMap(q3.target, q3.source, dir);
    REQUIRE_CLOSE(cd.claimedNorm, 2.0, 1e-12);
    VecC w = cd.eval(VecC{cplx(3.0), cplx(0.0), cplx(0.0)});  // norm 3 input
    REQUIRE_CLOSE(std::abs(w[1]), 6.0, 1e-12);
    REQUIRE_THROWS_KIND(constantDirectionMap(q3.target, q3.source, VecC(2, cplx(0.0))),
                        ErrKind::Shape);

    Rng rng = Rng::forSlot(37, 0);
    OsElement x = randomElem(q3.target, 3, rng);
    OsElement same = amplifyHomogeneous(identityHomogeneous(q3.target), x);
    REQUIRE(maxEntryGap(same, x) == 0.0);
    OsElement wrong = makeZeroElement(q3.source, 2);
    REQUIRE_THROWS_KIND(amplifyHomogeneous(identityHomogeneous(q3.target), wrong),
                        ErrKind::Shape);
  }

  testkit::section("equivalence pair inverts on samples");
  {
    EquivalencePair eq = equivalenceMaps(q3, 2);
    REQUIRE(eq.k == 2);
    REQUIRE_CLOSE(eq.eps, std::exp(-2.0), 1e-15);
    REQUIRE(eq.f.summand == 6);
    REQUIRE_THROWS_KIND(equivalenceMaps(q3, 0), ErrKind::Input);

    double worstKer = 0.0;
    double worstHG = 0.0;
    double worstGH = 0.0;
    for (int s = 0; s < 40; ++s) {
      Rng rng = Rng::forSlot(41, static_cast<uint64_t>(s));
      // a generic single-summand element
      ZMat y;
      y.k = 2;
      y.parts.emplace(eq.f.summand, withNorm(randomElem(q3.source, 2, rng, true),
                                             2.0 * rng.uniform01()));
      XZPair p = applyG(eq, y);
      worstKer = std::max(worstKer, kernelResidual(q3, p.z));
      worstHG = std::max(worstHG, zNormCert(q3, zmSub(applyH(eq, p), y)).upper);

      // a kernel element paired with an independent base point
      ZMat w;
      w.k = 2;
      w.parts.emplace(eq.f.summand, randomElem(q3.source, 2, rng, true));
      XZPair p2;
      p2.x = withNorm(randomElem(q3.target, 2, rng, true), 3.0 * rng.uniform01());
      p2.z = zmSub(w, sectionAmplified(q3, eq.f, quotientTilde(q3, w)));
      XZPair back = applyG(eq, applyH(eq, p2));
      worstGH = std::max({worstGH, osDistance(back.x, p2.x).upper,
                          zNormCert(q3, zmSub(back.z, p2.z)).upper});
    }
    REQUIRE_MSG(worstKer <= 1e-9, "g lands in the kernel");
    REQUIRE_MSG(worstHG <= 1e-9, "h undoes g");
    REQUIRE_MSG(worstGH <= 1e-9, "g undoes h on kernel pairs");

    // the max-sum norm really is the max of the two components
    XZPair p;
    Rng prng = Rng::forSlot(41, 999);
    p.x = withNorm(randomElem(q3.target, 2, prng), 2.0);
    p.z = zmZero(q3, 2);
    NormCertificate c = xzNormCert(q3, p);
    REQUIRE_CLOSE(c.upper, 2.0, 1e-12);
  }

  testkit::section("node families and evaluation");
  {
    NodeFamily fam = interpolateFamily(q3, 2, 3);
    REQUIRE(fam.nodes.size() == 4);
    REQUIRE(fam.slideConstant == 2.0);
    std::vector<int> expected = {6, 9, 12, 15};
    for (size_t i = 0; i < fam.nodes.size(); ++i)
      REQUIRE(fam.nodes[i].summand == expected[i]);
    REQUIRE_THROWS_KIND(interpolateFamily(q3, 2, -1), ErrKind::Input);

    Rng rng = Rng::forSlot(43, 0);
    VecC v(3);
    for (auto& z : v) z = rng.gaussianC();

    // integer parameters give a single summand, the node's own output
    ZVec at2 = familyEval(fam, 2.0, v);
    REQUIRE(at2.parts.size() == 1);
    REQUIRE(at2.parts.begin()->first == 12);
    VecC node2 = fam.nodes[2].eval(v);
    for (size_t i = 0; i < node2.size(); ++i)
      REQUIRE(at2.parts.at(12)[i] == node2[i]);

    // midpoints split the weight across the two neighbors
    ZVec mid = familyEval(fam, 1.5, v);
    REQUIRE(mid.parts.size() == 2);
    VecC node1 = fam.nodes[1].eval(v);
    node2 = fam.nodes[2].eval(v);
    for (size_t i = 0; i < node1.size(); ++i) {
      REQUIRE(mid.parts.at(9)[i] == 0.5 * node1[i]);
      REQUIRE(mid.parts.at(12)[i] == 0.5 * node2[i]);
    }

    // parameters clamp to the node range
    ZVec low = familyEval(fam, -3.0, v);
    ZVec zero = familyEval(fam, 0.0, v);
    REQUIRE(low.parts.size() == 1);
    REQUIRE(low.parts.begin()->first == 6);
    for (size_t i = 0; i < v.size(); ++i)
      REQUIRE(low.parts.at(6)[i] == zero.parts.at(6)[i]);
    ZVec high = familyEval(fam, 99.0, v);
    REQUIRE(high.parts.size() == 1);
    REQUIRE(high.parts.begin()->first == 15);

    REQUIRE_THROWS_KIND(familyEval(NodeFamily(), 0.0, v), ErrKind::EmptyInput);
  }

  testkit::section("glued evaluation");
  {
    NodeFamily fam = interpolateFamily(q3, 2, 3);
    GluedMap glued = glueSpherical(fam, 1.0);
    REQUIRE_THROWS_KIND(glueSpherical(NodeFamily(), 1.0), ErrKind::EmptyInput);
    REQUIRE_THROWS_KIND(glueSpherical(fam, 0.0), ErrKind::Input);

    // zero maps to zero
    ZMat atZero = gluedEval(glued, makeZeroElement(q3.target, 2));
    REQUIRE(atZero.parts.empty());
    REQUIRE(atZero.k == 2);

    // inside the unit ball the first node acts alone
    Rng rng = Rng::forSlot(47, 0);
    OsElement xin = withNorm(randomElem(q3.target, 2, rng), 0.8);
    ZMat zin = gluedEval(glued, xin);
    ZMat direct = sectionAmplified(q3, fam.nodes[0], xin);
    REQUIRE(samePartKeys(zin, {6}));
    REQUIRE(maxEntryGap(zin.parts.at(6), direct.parts.at(6)) == 0.0);

    // outside, the log-radius parameter blends the two adjacent nodes, and
    // the result coincides with the frozen-parameter amplification
    OsElement xout = withNorm(randomElem(q3.target, 2, rng), std::exp(1.5));
    ZMat zout = gluedEval(glued, xout);
    REQUIRE(samePartKeys(zout, {9, 12}));
    const double t = std::log(osNorm(xout).upper);
    ZMat frozen = amplifyToZ([&](const VecC& w) { return familyEval(fam, t, w); }, q3, xout);
    REQUIRE(zNormCert(q3, zmSub(zout, frozen)).upper <= 1e-15);
    REQUIRE(!*glued.hypothesisViolation);

    // displacement functor agrees with a direct computation
    PairDisplacement disp = gluedDisplacement(glued);
    NormCertificate d1 = disp(xin, xout);
    NormCertificate d2 = zNormCert(q3, zmSub(gluedEval(glued, xin), gluedEval(glued, xout)));
    REQUIRE(d1.lower == d2.lower);
    REQUIRE(d1.upper == d2.upper);

    OsElement wrongSpace = makeZeroElement(q3.source, 2);
    REQUIRE_THROWS_KIND(gluedEval(glued, wrongSpace), ErrKind::Shape);
  }

  testkit::section("corner uniqueness with controls");
  {
    NodeFamily fam = interpolateFamily(q3, 2, 3);
    GluedMap a = glueSpherical(fam, 1.0);
    const std::vector<double> radii = {std::exp(0.5), std::exp(2.5)};

    // modifications beyond each node's outer working radius are invisible
    VecC bump(4, cplx(0.0));
    bump[0] = 0.37;
    NodeFamily famOut = fam;
    for (size_t ni = 0; ni < famOut.nodes.size(); ++ni)
      famOut.nodes[ni] =
          modifyOutsideBall(famOut.nodes[ni], std::exp(static_cast<double>(ni) + 1.0), bump);
    GluedMap b = glueSpherical(famOut, 1.0);
    UniquenessReport same = sphericalUniquenessCheck(a, b, 2, radii, 6, 51);
    REQUIRE(same.agree);
    REQUIRE(same.maxDeviation <= 1e-12);
    REQUIRE(same.checked == 12);

    // a modification inside the working radii is spotted
    NodeFamily famIn = fam;
    for (auto& node : famIn.nodes) node = modifyOutsideBall(node, 0.05, bump);
    GluedMap bIn = glueSpherical(famIn, 1.0);
    UniquenessReport caughtIn = sphericalUniquenessCheck(a, bIn, 2, radii, 6, 51);
    REQUIRE(!caughtIn.agree);

    // a genuine perturbation of the node maps is spotted as well
    NodeFamily famBad = fam;
    for (auto& node : famBad.nodes) node = perturbMap(node, 0.05);
    GluedMap c = glueSpherical(famBad, 1.0);
    UniquenessReport caught = sphericalUniquenessCheck(a, c, 2, radii, 6, 51);
    REQUIRE(!caught.agree);
    REQUIRE(!caught.witness.empty());
    REQUIRE(caught.maxDeviation > 1e-6);

    REQUIRE_THROWS_KIND(sphericalUniquenessCheck(a, b, 1, radii, 6, 51), ErrKind::Input);
    REQUIRE_THROWS_KIND(sphericalUniquenessCheck(a, b, 2, {}, 6, 51), ErrKind::EmptyInput);
    REQUIRE_THROWS_KIND(sphericalUniquenessCheck(a, b, 2, {-1.0}, 6, 51), ErrKind::Input);
    REQUIRE_THROWS_KIND(sphericalUniquenessCheck(a, b, 2, radii, 0, 51), ErrKind::Input);
  }

  testkit::section("witness modifiers");
  {
    HomogeneousMap f = identityHomogeneous(q3.target);
    VecC bump(3, cplx(0.0));
    bump[0] = 0.37;
    HomogeneousMap mod = modifyOutsideBall(f, 1.0, bump);
    REQUIRE(!mod.claimsHomogeneous);
    VecC inside = {cplx(0.5), cplx(0.25), cplx(0.0)};
    REQUIRE(mod.eval(inside) == f.eval(inside));
    VecC outside = {cplx(2.0), cplx(0.0), cplx(0.0)};
    VecC bumped = mod.eval(outside);
    REQUIRE(bumped[0] == cplx(2.37));
    REQUIRE_THROWS_KIND(modifyOutsideBall(f, 1.0, VecC(2, cplx(0.0))), ErrKind::Shape);

    HomogeneousMap pert = perturbMap(f, 0.1);
    VecC pv = pert.eval(outside);  // norm-2 input perturbs the first slot by 0.2
    REQUIRE_CLOSE(std::abs(pv[0] - cplx(2.0)), 0.2, 1e-12);
  }

  testkit::section("sampled eps-norms");
  {
    // the identity moves points by exactly their distance, which the
    // eps-denominator can only enlarge
    HomogeneousMap f = identityHomogeneous(q3.target);
    EpsNormReport rep = epsNormLower(q3, f, 2, 0.5, 4.0, 40, 53);
    REQUIRE(rep.samples > 0);
    REQUIRE(rep.strict <= rep.conservative + 1e-15);
    REQUIRE(rep.conservative <= 1.0 + 1e-9);
    REQUIRE(rep.strict > 0.5);
    REQUIRE_THROWS_KIND(epsNormLower(q3, f, 0, 0.5, 4.0, 10, 1), ErrKind::Input);
    REQUIRE_THROWS_KIND(epsNormLower(q3, f, 2, 0.0, 4.0, 10, 1), ErrKind::Input);
    REQUIRE_THROWS_KIND(epsNormLower(q3, f, 2, 0.5, 0.0, 10, 1), ErrKind::Input);
    REQUIRE_THROWS_KIND(epsNormLower(q3, f, 2, 0.5, 4.0, 0, 1), ErrKind::Input);
  }

  testkit::section("verification sweep");
  {
    KaltonConfig cfg;
    cfg.nTarget = 3;
    cfg.kMin = 1;
    cfg.kMax = 2;
    cfg.samples = 8;
    cfg.seed = 5;
    cfg.glueTMax = 3;
    cfg.gluePairs = 12;
    KaltonReport rep = runKaltonChecks(cfg);
    for (const auto& c : rep.checks)
      if (!c.pass)
        std::printf("        failed: %s (%s)\n", c.name.c_str(), c.detail.c_str());
    REQUIRE(rep.allPass);
    REQUIRE(rep.checks.size() >= 16);

    auto j = nlohmann::json::parse(kaltonReportJson(rep, 2));
    REQUIRE(j["all_pass"].get<bool>());
    REQUIRE(j["quotient_size"].get<int>() == 3);
    REQUIRE(j["samples"].get<int>() == 8);
    REQUIRE(j["checks"].is_array());
    REQUIRE(j["checks"].size() == rep.checks.size());
    REQUIRE(j["checks"][0].contains("name"));
    REQUIRE(j["checks"][0].contains("pass"));
    REQUIRE(j["checks"][0].contains("margin"));
    REQUIRE(j["checks"][0].contains("detail"));

    KaltonConfig bad = cfg;
    bad.kMin = 0;
    REQUIRE_THROWS_KIND(runKaltonChecks(bad), ErrKind::Input);
    bad = cfg;
    bad.kMax = 0;
    REQUIRE_THROWS_KIND(runKaltonChecks(bad), ErrKind::Input);
    bad = cfg;
    bad.samples = 0;
    REQUIRE_THROWS_KIND(runKaltonChecks(bad), ErrKind::Input);
  }

  return testkit::finish("test_kalton");
}
