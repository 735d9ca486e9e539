#pragma once

// Homogeneous maps, quotient sections, the weighted summand spaces Y_m and
// their l1-direct sum Z(Q), the induced quotient Qtilde : Z(Q) -> X with its
// nonlinear sections, the coarse equivalence pair between Z(Q) and the
// max-sum X (+) ker(Qtilde), and the spherical gluing of a section family.
//
// Conventions used throughout:
//   * X = MinLinf(N) is the quotient target, Y = MinL1(M) the source.
//   * The concrete quotient has one column per antipodal pair of sign
//     vectors in {-1,+1}^N (first entry normalized to +1), so M = 2^(N-1).
//     Every real point of the unit cube is a convex combination of sign
//     vectors, which makes the map an exact metric surjection with
//     quotient constant delta = 1 and section bound C = 1.
//   * Complex inputs are handled by splitting into real and imaginary
//     parts; the sharp constants above are certified for real data, so
//     verification sweeps that test them sample real matrices.
//   * All multi-summand Z(Q) matrix norms are certified brackets; the
//     verification sweeps always consume the conservative side.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "oplab/cmatrix.hpp"
#include "oplab/coarse.hpp"
#include "oplab/opspaces.hpp"

namespace oplab {

// ---------------------------------------------------------------------------
// quotient data

struct QuotientMapData {
  CMatrix q;           // nTarget x mSource coordinate matrix, entries in [-1, 1]
  OsDescriptor source; // MinL1(mSource)
  OsDescriptor target; // MinLinf(nTarget)
  double delta = 1.0;  // certified quotient constant
  double c = 1.0;      // certified section bound on the unit sphere
};

// Columns enumerate the sign vectors of {-1,+1}^nTarget with first entry +1.
// Construction certifies, via the LP preimage, that every sign vector has an
// l1-preimage of norm <= 1 + 1e-9 and that all entries lie in [-1, 1].
QuotientMapData signVectorQuotient(int nTarget);

// level-1 application x_t = sum_j q(t,j) y_j
VecC applyQuotient(const QuotientMapData& q, const VecC& y);

// level-k application: B_t = sum_j q(t,j) A_j on the coordinate matrices
OsElement applyQuotientMat(const QuotientMapData& q, const OsElement& y);

// ---------------------------------------------------------------------------
// homogeneous maps

struct EpsClaim {
  int k = 1;
  double eps = 1.0;
  double bound = 1.0;
};

// A positively homogeneous map between coordinate spaces, evaluated at
// level 1 and amplified entrywise at higher levels. When `summand` is
// positive the map is read as landing in the summand Y_summand of Z(Q).
struct HomogeneousMap {
  std::function<VecC(const VecC&)> eval;
  OsDescriptor source;
  OsDescriptor target;
  int summand = -1;
  bool claimsHomogeneous = true;
  double claimedNorm = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpsClaim> claimedEps;
  std::string name;
};

// f(x) = ||x|| * rule(x / ||x||), f(0) = 0. Exactly homogeneous by
// construction: the rule only ever sees unit vectors.
HomogeneousMap homogeneousExtension(std::function<VecC(const VecC&)> sphereRule,
                                    const OsDescriptor& source, const OsDescriptor& target,
                                    int summand = -1, const std::string& name = "");

HomogeneousMap identityHomogeneous(const OsDescriptor& space);
HomogeneousMap constantDirectionMap(const OsDescriptor& source, const OsDescriptor& target,
                                    const VecC& v);  // x -> ||x|| v

// Entrywise amplification of f to a level-k element over f.source.
OsElement amplifyHomogeneous(const HomogeneousMap& f, const OsElement& x);

// ---------------------------------------------------------------------------
// Z(Q) elements

// level-1 element of Z(Q): finitely supported m -> Y coordinate vector
struct ZVec {
  std::map<int, VecC> parts;
};

// level-k element of Z(Q): finitely supported m -> M_k(Y) element
struct ZMat {
  int k = 1;
  std::map<int, OsElement> parts;
};

ZVec zvAdd(const ZVec& a, const ZVec& b);
ZVec zvScale(const ZVec& a, cplx s);
ZMat zmAdd(const ZMat& a, const ZMat& b);
ZMat zmSub(const ZMat& a, const ZMat& b);
ZMat zmScale(const ZMat& a, cplx s);
ZMat zmZero(const QuotientMapData& q, int k);

// scatter a level-1 map's outputs entrywise into a ZMat
ZMat amplifyToZ(const std::function<ZVec(const VecC&)>& f, const QuotientMapData& q,
                const OsElement& x);

// ||y||_{Y_m} = max{ 2^{-m} ||y||_{M_k(Y)}, ||Q(y)||_{M_k(X)} }; the source
// term is a bracket, the quotient term is exact, and the result is exact
// whenever the binding term is.
NormCertificate ymNormCert(const QuotientMapData& q, int m, const OsElement& y);

// l1-sum sandwich: lower = max over summands (coordinate projections are
// complete contractions), upper = sum over summands (triangle inequality
// through the isometric inclusions); exact only for single-summand support.
NormCertificate zNormCert(const QuotientMapData& q, const ZMat& z);

// Qtilde(z) = sum_m Q(z_m), a complete metric surjection Z(Q) -> X
OsElement quotientTilde(const QuotientMapData& q, const ZMat& z);
VecC quotientTildeVec(const QuotientMapData& q, const ZVec& z);

// ---------------------------------------------------------------------------
// sections

// Homogeneous section of Qtilde landing in the single summand Y_m with the
// smallest m such that 2^{-m+1} C k^2 <= eps; on the unit sphere it places
// the deterministic least-l1 preimage in that summand.
HomogeneousMap sectionIntoZ(const QuotientMapData& q, int k, double eps);

// smallest admissible summand index for the given data
int sectionSummand(double c, int k, double eps);

// apply a section entrywise at level k
ZMat sectionAmplified(const QuotientMapData& q, const HomogeneousMap& f, const OsElement& x);

// ---------------------------------------------------------------------------
// eps-norms

struct EpsNormReport {
  double conservative = 0.0;  // max of upper(numerator) / lower(denominator)
  double strict = 0.0;        // max of lower(numerator) / upper(denominator)
  long samples = 0;
};

// Sampled lower estimate of ||f_k||^eps over random real matrix pairs in the
// given ball. Pairs whose denominator vanishes are skipped.
EpsNormReport epsNormLower(const QuotientMapData& q, const HomogeneousMap& f, int k, double eps,
                           double radius, int samples, uint64_t seed);

// ---------------------------------------------------------------------------
// equivalence pair (max-sum X (+) ker Qtilde vs Z(Q))

struct XZPair {
  OsElement x;  // over the quotient target
  ZMat z;       // kernel part
};

struct EquivalencePair {
  QuotientMapData q;
  int k = 1;
  double eps = 1.0;      // e^{-k}
  HomogeneousMap f;      // section built for that eps
};

EquivalencePair equivalenceMaps(const QuotientMapData& q, int k);

// g(y) = (Qtilde y, y - f(Qtilde y)); the second component lies in ker Qtilde
XZPair applyG(const EquivalencePair& e, const ZMat& y);

// h(x, z) = z + f(x); inverse of g on X (+) ker Qtilde
ZMat applyH(const EquivalencePair& e, const XZPair& p);

// max-sum norm on X (+) Z
NormCertificate xzNormCert(const QuotientMapData& q, const XZPair& p);

// residual of the kernel constraint ||Qtilde z||
double kernelResidual(const QuotientMapData& q, const ZMat& z);

// ---------------------------------------------------------------------------
// node families and spherical gluing

struct NodeFamily {
  QuotientMapData q;
  std::vector<HomogeneousMap> nodes;  // f^0 .. f^T
  double slideConstant = 2.0;         // ||f^t - f^s|| <= slideConstant |t-s| on the sphere
};

// Sections at integer nodes 0..tMax with the schedule eps_n = e^{-2(n+1)},
// which keeps ||f^t_k||^{e^{-2t}} <= 1 across each segment.
NodeFamily interpolateFamily(const QuotientMapData& q, int k, int tMax);

// f^t = (n+1-t) f^n + (t-n) f^{n+1} on the segment [n, n+1]; t is clamped to
// the node range.
ZVec familyEval(const NodeFamily& family, double t, const VecC& v);

// Piecewise rule glued over spheres: 0 at 0, the f^0 amplification on the
// closed unit ball, the f^{log||x||} amplification outside. The flag records
// any sampled violation of the gluing hypotheses seen during evaluation;
// evaluation always proceeds.
struct GluedMap {
  NodeFamily family;
  double constantK = 1.0;
  std::shared_ptr<bool> hypothesisViolation;  // set by evaluations, never cleared
};

GluedMap glueSpherical(const NodeFamily& family, double constantK);
ZMat gluedEval(const GluedMap& glued, const OsElement& x);

// displacement functor ||F(x) - F(y)||_Z for the coarse moduli engine
PairDisplacement gluedDisplacement(const GluedMap& glued);

// ---------------------------------------------------------------------------
// spherical uniqueness

struct UniquenessReport {
  bool agree = true;
  double maxDeviation = 0.0;
  long checked = 0;
  std::string witness;  // description of the first disagreement, if any
};

// For sampled x in the r-ball at level k > 1, embeds x as the top corner of a
// diagonal element with a norm-r companion and compares the two glued maps on
// that corner. Restriction to each sphere is determined by such corners.
UniquenessReport sphericalUniquenessCheck(const GluedMap& a, const GluedMap& b, int k,
                                          const std::vector<double>& radii, int samples,
                                          uint64_t seed, double tol = 1e-9);

// witness map modified only at points of norm > threshold (agreement must
// survive) or perturbed everywhere (disagreement must be detected)
HomogeneousMap modifyOutsideBall(const HomogeneousMap& f, double threshold, const VecC& bump);
HomogeneousMap perturbMap(const HomogeneousMap& f, double magnitude);

// ---------------------------------------------------------------------------
// verification sweep

struct KaltonCheck {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // slack of the binding inequality (>= 0 iff pass)
  std::string detail;
};

struct KaltonConfig {
  int nTarget = 3;
  int kMin = 1;
  int kMax = 3;
  int samples = 50;
  uint64_t seed = 1;
  int glueTMax = 8;
  int gluePairs = 500;
  SolveBudget budget;
};

struct KaltonReport {
  KaltonConfig config;
  std::vector<KaltonCheck> checks;
  bool allPass = true;
};

KaltonReport runKaltonChecks(const KaltonConfig& config);
std::string kaltonReportJson(const KaltonReport& report, int indent = -1);

}  // namespace oplab
