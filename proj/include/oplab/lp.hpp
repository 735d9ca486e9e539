#pragma once

// Deterministic linear programming: a dense two-phase simplex with Bland's
// rule (entering = lowest eligible index, leaving = lowest basic index among
// ratio ties) and the minimum-l1 preimage built on top of it. Determinism and
// exact positive homogeneity of the selected vertex are part of the contract.

#include <vector>

#include "oplab/cmatrix.hpp"

namespace oplab {

struct LpResult {
  std::vector<double> z;  // primal solution, length = #columns
  double value = 0.0;
  std::vector<int> basis;
};

// Minimize c.z subject to A z = b, z >= 0. Rows of `a` must be independent.
// Throws NoPreimage when infeasible.
LpResult simplexSolve(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                      const std::vector<double>& c);

struct PreimageResult {
  VecC y;        // preimage, length = q.cols
  double l1;     // sum_j (|Re y_j| + |Im y_j|); the exact l1 norm for real data
  double check;  // plain-cost optimum used to validate the tie-broken vertex
};

// Least-l1 preimage of x under the surjection q (q y = x). Deterministic: ties
// between optimal vertices are broken toward support on the earliest
// coordinates via an infinitesimally graded cost, then validated against the
// ungraded optimum. Positively homogeneous by construction (the pivot path
// does not depend on the scale of x).
PreimageResult minL1Preimage(const CMatrix& q, const VecC& x);

}  // namespace oplab
