#pragma once

// Certified numerical complex interpolation for finite-dimensional norm
// couples. Upper bounds come from explicit analytic candidates on the unit
// strip (a polynomial in the strip-to-disk map times a scalar exponential
// twist, both admissible), evaluated on boundary grids with a Lipschitz
// safety margin, so every reported upper bound is honest. Lower bounds come
// from dual functionals via the interpolation duality inequality. Hilbertian
// couples (both endpoint norms quadratic) additionally get an exact
// congruence-diagonalization route.

#include <functional>
#include <string>
#include <vector>

#include "oplab/cmatrix.hpp"
#include "oplab/opspaces.hpp"

namespace oplab {

struct NormCouple {
  int dim = 0;
  std::function<double(const VecC&)> norm0, norm1;
  // norming functionals: N(y) = Re<nf(y), y> with |<nf(y), z>| <= N(z) for all z
  std::function<VecC(const VecC&)> nf0, nf1;
  // exact dual norms and their norming functionals (empty when unavailable)
  std::function<double(const VecC&)> dual0, dual1;
  std::function<VecC(const VecC&)> dualNf0, dualNf1;
  // quadratic endpoints: norm_e(x)^2 = x* gram_e x (enables the exact route)
  bool quadratic = false;
  CMatrix gram0, gram1;
  std::string label0 = "norm0", label1 = "norm1";

  bool hasDuals() const { return static_cast<bool>(dual0) && static_cast<bool>(dual1); }
  bool hasDualSolver() const { return static_cast<bool>(dualNf0) && static_cast<bool>(dualNf1); }
};

// couple whose endpoint norms are the dual norms of `c` (used to refine the
// denominator of dual lower bounds)
NormCouple dualCouple(const NormCouple& c);

NormCouple coupleRowColumn(int n, int d);
NormCouple coupleRowRowOp(int n, int d);
NormCouple coupleFromGrams(const CMatrix& g0, const CMatrix& g1);
NormCouple coupleWeightedL2(const std::vector<double>& w0, const std::vector<double>& w1);
NormCouple coupleConstant(const CMatrix& g);  // norm0 == norm1, quadratic

// strip-to-disk boundary grids: midpoint angles of the two boundary arcs of
// the conformal image (edge 1 <-> angles in (0, 2 pi theta), edge 0 <-> the
// complement)
std::vector<double> boundaryAngles(double theta, int edge, int count);
cplx diskPoint(double psi);

struct AnalyticCandidate {
  double theta = 0.5;
  double twist = 0.0;           // scalar factor exp(twist*(theta - z))
  std::vector<VecC> coeff;      // coeff[0] = x (the value at theta), powers 1..P
};

// value of the polynomial part at a boundary point of the disk (the twist
// contributes only a per-edge constant to the modulus and is handled by the
// caller)
VecC candidateBoundaryValue(const AnalyticCandidate& c, cplx zeta);

double upperGeometric(const VecC& x, const NormCouple& couple, double theta);

struct CalderonResult {
  double value = 0.0;       // certified upper bound (includes the grid margin)
  double rawValue = 0.0;    // grid objective before the margin
  double margin = 0.0;
  bool fallbackGeometric = false;
  bool quadraticRoute = false;
  AnalyticCandidate candidate;
  int evaluations = 0;
  // filled on the exact route: the gram matrices actually used, whether they
  // came with the couple or were reconstructed from its norm callbacks
  CMatrix gram0, gram1;
};

CalderonResult upperCalderon(const VecC& x, const NormCouple& couple, double theta,
                             const SolveBudget& budget = SolveBudget(), uint64_t seed = 1);

struct DualCertificate {
  VecC xi;
  double pairing = 0.0;  // |<xi, x>|
  double dual0 = 0.0;
  double dual1 = 0.0;
  double lower = 0.0;    // pairing / (dual0^(1-theta) dual1^theta)
};

DualCertificate lowerDual(const VecC& x, const NormCouple& couple, double theta, const VecC& xi);

struct BracketResult {
  double theta = 0.5;
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  std::string upperKind = "calderon";  // "geometric" | "calderon" | "endpoint"
  double margin = 0.0;
  bool widened = false;                // diagnostics: lower/upper crossed and were clamped
  DualCertificate bestDual;
  double refinedDenominator = 0.0;     // certified upper bound on the dual-couple norm of xi
};

BracketResult bracket(const VecC& x, const NormCouple& couple, double theta,
                      const SolveBudget& budget = SolveBudget(), uint64_t seed = 1);

NormCertificate bracketToCertificate(const BracketResult& b);
std::string bracketToJson(const BracketResult& b);  // pinned certificate schema

// Closed-form interpolated norm of a Hilbertian couple:
// (x* S_theta x)^{1/2} with S_theta = S0^{1/2} (S0^{-1/2} S1 S0^{-1/2})^theta S0^{1/2}.
CMatrix hilbertGramTheta(const CMatrix& s0, const CMatrix& s1, double theta);
double hilbertCoupleExact(const CMatrix& s0, const CMatrix& s1, double theta, const VecC& x);

// norm engine for the interpolated row/column family (delegated from osNorm)
NormCertificate interpNormRC(const OsElement& x, const SolveBudget& budget);

}  // namespace oplab
