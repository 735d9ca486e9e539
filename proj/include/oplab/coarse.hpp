#pragma once

// Empirical one-sided estimation of coarse moduli for maps between truncated
// matricial spaces. omega is estimated from below (max displacement among
// pairs certified to lie within distance t), rho from above (min displacement
// among pairs certified to be at least t apart), so every reported number is
// a sound bound witnessed by a recorded pair. Qualification uses the
// certificate sides and a 1e-9 relative slack.

#include <functional>
#include <string>
#include <vector>

#include "oplab/obstruction.hpp"
#include "oplab/opspaces.hpp"

namespace oplab {

struct DomainSampler {
  OsDescriptor space;
  int n = 1;
  double radius = 1.0;
  std::string strategy = "uniform-ball";  // uniform-ball | sphere | structured
  uint64_t seed = 1;
  int count = 512;  // default pairs per grid cell
};

using OsMap = std::function<OsElement(const OsElement&)>;

// displacement certificate of an input pair (the distance of the images,
// however the map's target measures it)
using PairDisplacement = std::function<NormCertificate(const OsElement&, const OsElement&)>;

OsMap identityOsMap();
OsMap constantOsMap(const OsElement& value);
OsMap amplifiedOsMap(const XMap& f, const OsDescriptor& target);
OsMap normScalingOsMap();  // x -> ||x|| * x, quadratic growth

struct SampledPair {
  long id = -1;
  OsElement x, y;
  NormCertificate dist;
  NormCertificate disp;
};

struct ModuliReport {
  int n = 0;
  std::vector<double> grid;
  std::vector<double> omegaLower;    // per grid point; witnessed lower bound for omega
  std::vector<double> rhoUpper;      // per grid point; +infinity when no pair qualifies
  std::vector<long> omegaWitness;    // pair id per grid point, -1 when none
  std::vector<long> rhoWitness;
  std::vector<SampledPair> pairs;
  long sampleCount = 0;
};

std::vector<double> defaultModuliGrid();  // {0.25, 0.5, 1, 2, 4, 8}

// generalized engine: pairs are produced by the sampler strategy, distance is
// certified in the source space, displacement by the supplied functor
ModuliReport estimateModuliPairs(const PairDisplacement& disp, const DomainSampler& sampler,
                                 const std::vector<double>& grid, int pairsPerCell = 0,
                                 const SolveBudget& budget = SolveBudget());

ModuliReport estimateModuli(const OsMap& f, const DomainSampler& sampler,
                            const std::vector<double>& grid, int pairsPerCell = 0,
                            const SolveBudget& budget = SolveBudget());

struct AffineCheck {
  double l = 0.0;
  std::vector<int> violations;  // grid indices where omegaLower(t) > l*t + l
};

// With no override, l is read off the report at t = 1 (which must be on the
// grid). A nonnegative override checks the supplied constant instead.
AffineCheck affineBoundCheck(const ModuliReport& report, double overrideL = -1.0);

struct EquiModuliReport {
  std::vector<ModuliReport> perN;
  std::vector<double> grid;
  std::vector<double> omegaLower;  // pointwise max over the family
  std::vector<double> rhoUpper;    // pointwise min over the family
};

EquiModuliReport aggregateEqui(const std::vector<ModuliReport>& reports);

struct ExpansionWitness {
  bool expanding = false;  // rho_upper(r) > 0: no collapse observed at scale r
  double margin = 0.0;     // the rho_upper value itself (an upper bound for rho at r)
};

ExpansionWitness expansionWitness(const EquiModuliReport& equi, double r);

// recompute each witnessed pair and compare against the stored certificates
bool verifyWitnesses(const ModuliReport& report, const PairDisplacement& disp,
                     const SolveBudget& budget = SolveBudget(), double tol = 1e-9);

// CSV columns: n,t,omega_lower,rho_upper,witness_id (the omega witness; rho
// witnesses live in the JSON sidecar; infinite rho prints as "inf")
std::string moduliCsv(const ModuliReport& report);
std::string equiModuliCsv(const EquiModuliReport& equi);
std::string witnessesJson(const ModuliReport& report, int indent = -1);

}  // namespace oplab
