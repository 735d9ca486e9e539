#pragma once

// Quantitative growth obstructions for amplified maps between matricial
// norms: the special disjointly-supported matrices whose sums stack into a
// single column, the exact interpolated norms of the column-of-basis element
// with its optimal dual functional, the crossover inequality D n^{gamma/2} >
// 2 L r n^{theta/2} + L, and the divergence table that plays a candidate map
// against the square-root growth of the stacked column.

#include <functional>
#include <string>
#include <vector>

#include "oplab/opspaces.hpp"

namespace oplab {

struct SpecialMatrices {
  int n = 0;
  double r = 1.0;
  std::vector<OsElement> a, b;  // a[j-1], b[j-1] for j = 1..n
  OsElement c, d;               // c = sum a_j, d = sum b_j
};

// a_j carries r at coordinate 2j-1 in outer position (j,1); b_j likewise at
// coordinate 2j. Needs descriptor dimension >= 2n. For Row descriptors the
// construction self-checks its pinned norms.
SpecialMatrices buildSpecial(int n, double r, const OsDescriptor& desc);

struct Lemma32Row {
  int n = 0;
  double theta = 0.0;
  double target = 0.0;     // n^(theta/2)
  double dualLower = 0.0;  // bound from the explicit optimal functional
  double upper = 0.0;      // certified interpolation upper bound
  double width = 0.0;      // upper minus best lower
};

// Exact values of the column-of-basis element in the (row, opposite-row)
// interpolation family. Throws when a bracket fails to contain the target.
std::vector<Lemma32Row> lemma32Table(int nMin, int nMax, const std::vector<double>& thetas,
                                     const SolveBudget& budget = SolveBudget());

struct ObstructionRow {
  long n = 0;
  double lhs = 0.0;  // D n^(gamma/2)
  double rhs = 0.0;  // 2 L r n^(theta/2) + L
  bool violated = false;
};

struct ObstructionTable {
  std::vector<ObstructionRow> rows;
  long nStar = -1;              // least n with n > ((2Lr+L)/D)^(2/(gamma-theta))
  long firstTrueViolation = 0;  // least violated n in the scanned range, 0 if none
  double bFormula = 0.0;        // ((2Lr+L)/D)^(2/(gamma-theta))
  bool violationInRange = false;
  bool symmetricReduction = false;  // true when (theta,gamma) was mapped to (1-theta,1-gamma)
  double thetaUsed = 0.0;
  double gammaUsed = 0.0;
};

ObstructionTable growthObstruction(double theta, double gamma, double r, double D, double L,
                                   long nMin, long nMax);

// A single-vector map between coordinate spaces; amplifications apply it to
// every matrix entry's coordinate fiber.
struct XMap {
  std::function<VecC(const VecC&)> eval;
  int srcDim = 0;
  int tgtDim = 0;
  std::string name;
};

XMap xmapTranspose(int dim);                      // identity on coordinates
XMap xmapCollapse(int dim);                       // sends each even direction onto its odd partner
XMap xmapScaledTranspose(int dim, double scale);  // identity scaled by a constant

OsElement amplifyXMap(const XMap& f, const OsElement& x, const OsDescriptor& target);

struct DivergenceRow {
  int n = 0;
  double rhoWitness = 0.0;  // least displacement among the (a_j, b_j) pairs
  double stacked = 0.0;     // (sum_j ||f(r e_{2j-1}) - f(r e_{2j})||^2)^(1/2)
  double omegaValue = 0.0;  // displacement of the (c, d) pair
};

std::vector<DivergenceRow> prop31Divergence(int nMin, int nMax, double r, const XMap& f);

std::string lemma32Csv(const std::vector<Lemma32Row>& rows);
std::string obstructionCsv(const ObstructionTable& table);
std::string divergenceCsv(const std::vector<DivergenceRow>& rows);

}  // namespace oplab
