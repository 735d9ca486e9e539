#pragma once

// Norm oracles for finite truncations of concrete matricial norm structures
// on coordinate spans: row/column spans of matrix units, their opposites,
// the operator Hilbert space, minimal structures over l-infinity and l1
// coordinates, the row/column intersection, and the interpolated family.
// Elements of M_n over a d-dimensional span are stored as d coordinate
// matrices A_1..A_d of size n x n: the element [x_ij] has
// x_ij = sum_k (A_k)_ij e_k.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oplab/cmatrix.hpp"

namespace oplab {

enum class SpaceKind {
  Row,
  Column,
  RowOp,
  ColumnOp,
  Oh,
  MinLinf,
  MinL1,
  IntersectRC,
  InterpRC,
};

const char* spaceKindName(SpaceKind k);
SpaceKind spaceKindFromName(const std::string& name);

struct OsDescriptor {
  SpaceKind kind = SpaceKind::Row;
  int dim = 1;          // coordinate dimension (d, N or M depending on the kind)
  double theta = 0.5;   // InterpRC only

  std::string label() const;
};

OsDescriptor makeDescriptor(SpaceKind kind, int dim, double theta = 0.5);

struct OsElement {
  OsDescriptor space;
  int n = 1;
  std::vector<CMatrix> coords;
};

OsElement makeZeroElement(const OsDescriptor& d, int n);
void validateElement(const OsElement& x);
OsElement elemSub(const OsElement& x, const OsElement& y);
OsElement elemAdd(const OsElement& x, const OsElement& y);
OsElement elemScale(const OsElement& x, cplx s);

// flattened coordinates, layout index = (k*n + i)*n + j
VecC flattenElement(const OsElement& x);
OsElement unflattenElement(const OsDescriptor& d, int n, const VecC& flat);

struct NormCertificate {
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  std::string method;
};

NormCertificate exactCert(double v, const std::string& method);

// Solver budget shared with the interpolation module.
struct SolveBudget {
  int degree = 6;     // polynomial degree of analytic candidates
  int grid = 64;      // boundary points per strip edge
  int restarts = 8;   // optimizer restarts
  int steps = 2000;   // subgradient steps per restart
};

// block embeddings of the coordinate list (the workhorse behind Row/Column)
CMatrix blockRowEmbed(const std::vector<CMatrix>& coords);   // n x (n d)
CMatrix blockColEmbed(const std::vector<CMatrix>& coords);   // (n d) x n
std::vector<CMatrix> transposeCoords(const std::vector<CMatrix>& coords);

NormCertificate osNorm(const OsElement& x, const SolveBudget& budget = SolveBudget());

// exact dual norms over the full matrix spaces (Row/Column families only)
NormCertificate osDualNorm(const OsElement& functional, const OsDescriptor& base);

NormCertificate osDistance(const OsElement& x, const OsElement& y,
                           const SolveBudget& budget = SolveBudget());

// MinL1 sandwich: lower via multi-start phase ascent, upper via the triangle
// inequality over coordinates.
NormCertificate minL1Cert(const std::vector<CMatrix>& coords);

struct CbNormEstimate {
  double value = 0.0;       // lower bound for the completely bounded norm
  bool exactEngines = true; // false when either endpoint norm is a bracket
  std::vector<double> perLevel;
};

// Linear coordinate map given by matrix T (target dim x source dim), applied
// entrywise-linearly to coordinates. Estimates sup over k <= kMax of the
// amplification norm by sampling plus local ascent (a lower bound).
CbNormEstimate cbNormTruncated(const CMatrix& t, const OsDescriptor& src,
                               const OsDescriptor& tgt, int kMax, uint64_t seed = 1,
                               int samplesPerLevel = 64);

// JSON serialization (schema: {"space": {...}, "n": int, "coords": [[[re,im],...],...]})
std::string elementToJson(const OsElement& x, int indent = -1);
OsElement elementFromJson(const std::string& text);
std::string certificateToJson(const NormCertificate& c);

}  // namespace oplab
