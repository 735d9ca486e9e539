#include "oplab/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "oplab/par.hpp"
#include "oplab/rng.hpp"
#include "oplab/textio.hpp"

namespace oplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double slack(double t) { return 1e-9 * std::max(1.0, t); }

OsElement gaussianElement(const OsDescriptor& desc, int n, Rng& rng) {
  OsElement x = makeZeroElement(desc, n);
  for (auto& m : x.coords)
    for (auto& v : m.a) v = rng.gaussianC();
  return x;
}

// scale an element so its certified norm upper bound equals `target`
OsElement scaleToNorm(const OsElement& x, double target, bool requireExact) {
  NormCertificate c = osNorm(x);
  if (requireExact && !c.exact)
    throw Error(ErrKind::UnsupportedDescriptor,
                "sphere sampling needs an exact norm engine for this descriptor");
  if (c.upper <= 0.0) return x;  // zero element stays zero
  return elemScale(x, target / c.upper);
}

struct PairSlot {
  bool used = false;
  bool failed = false;
  ErrKind kind = ErrKind::Input;
  std::string err;
  SampledPair pair;
};

void evalPair(PairSlot& slot, const PairDisplacement& disp, const SolveBudget& budget,
              double cellT) {
  try {
    slot.pair.dist = osDistance(slot.pair.x, slot.pair.y, budget);
    slot.pair.disp = disp(slot.pair.x, slot.pair.y);
    slot.used = true;
  } catch (const Error& e) {
    slot.failed = true;
    slot.kind = e.kind;
    slot.err = std::string(e.what()) + " (pair sampled for t=" + formatDouble(cellT) + ")";
  } catch (const std::exception& e) {
    slot.failed = true;
    slot.kind = ErrKind::Input;
    slot.err = std::string("map evaluation failed: ") + e.what();
  }
}

nlohmann::json certJson(const NormCertificate& c) {
  nlohmann::json j;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  j["exact"] = c.exact;
  j["method"] = c.method;
  return j;
}

}  // namespace

OsMap identityOsMap() {
  return [](const OsElement& x) { return x; };
}

OsMap constantOsMap(const OsElement& value) {
  return [value](const OsElement&) { return value; };
}

OsMap amplifiedOsMap(const XMap& f, const OsDescriptor& target) {
  return [f, target](const OsElement& x) { return amplifyXMap(f, x, target); };
}

OsMap normScalingOsMap() {
  return [](const OsElement& x) { return elemScale(x, osNorm(x).upper); };
}

std::vector<double> defaultModuliGrid() { return {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}; }

ModuliReport estimateModuliPairs(const PairDisplacement& disp, const DomainSampler& sampler,
                                 const std::vector<double>& grid, int pairsPerCell,
                                 const SolveBudget& budget) {
  if (!disp) throw Error(ErrKind::Input, "no displacement functor supplied");
  if (grid.empty()) throw Error(ErrKind::Grid, "empty distance grid");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
      throw Error(ErrKind::Grid, "grid points must be positive and finite");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw Error(ErrKind::Grid, "grid points must be strictly increasing");
  }
  if (sampler.n < 1) throw Error(ErrKind::Input, "sampler truncation level must be >= 1");
  if (!(sampler.radius > 0.0) || !std::isfinite(sampler.radius))
    throw Error(ErrKind::Input, "sampler radius must be positive");
  const int perCell = pairsPerCell > 0 ? pairsPerCell : sampler.count;
  if (perCell < 1) throw Error(ErrKind::Input, "pairs per cell must be >= 1");

  const int n = sampler.n;
  const OsDescriptor desc = sampler.space;
  std::vector<PairSlot> slots;

  if (sampler.strategy == "structured") {
    if (desc.kind != SpaceKind::Row)
      throw Error(ErrKind::UnsupportedDescriptor,
                  "the structured sampler emits row-space matrices");
    for (double t : grid) {
      const double r = t / std::sqrt(2.0);
      if (r > sampler.radius * (1.0 + 1e-12)) continue;
      SpecialMatrices s = buildSpecial(n, r, desc);
      for (int jj = 0; jj < n; ++jj) {
        PairSlot slot;
        slot.pair.x = s.a[jj];
        slot.pair.y = s.b[jj];
        evalPair(slot, disp, budget, t);
        slots.push_back(std::move(slot));
      }
      PairSlot slot;
      slot.pair.x = s.c;
      slot.pair.y = s.d;
      evalPair(slot, disp, budget, t);
      slots.push_back(std::move(slot));
    }
  } else if (sampler.strategy == "uniform-ball" || sampler.strategy == "sphere") {
    const bool sphere = sampler.strategy == "sphere";
    slots.resize(grid.size() * static_cast<size_t>(perCell));
    parallelFor(slots.size(), [&](size_t si) {
      const size_t cell = si / static_cast<size_t>(perCell);
      const size_t j = si % static_cast<size_t>(perCell);
      const double t = grid[cell];
      Rng rng = Rng::forSlot(sampler.seed, si);
      OsElement g = gaussianElement(desc, n, rng);
      OsElement h = gaussianElement(desc, n, rng);
      const double ur = rng.uniform01();
      const double us = rng.uniform01();
      const double s = t * ((j % 2 == 0) ? 1.0 : us);
      PairSlot& slot = slots[si];
      try {
        OsElement dir = scaleToNorm(h, 1.0, sphere);
        if (sphere) {
          OsElement x = scaleToNorm(g, sampler.radius, true);
          OsElement y0 = elemAdd(x, elemScale(dir, s));
          if (osNorm(y0).upper <= 0.0) y0 = elemScale(x, -1.0);
          OsElement y = scaleToNorm(y0, sampler.radius, true);
          slot.pair.x = std::move(x);
          slot.pair.y = std::move(y);
        } else {
          if (s > 2.0 * sampler.radius * (1.0 + 1e-12)) return;  // cannot fit in the ball
          const double cRad = std::max(0.0, sampler.radius - 0.5 * s) * ur;
          OsElement center = scaleToNorm(g, cRad, false);
          OsElement half = elemScale(dir, 0.5 * s);
          slot.pair.x = elemSub(center, half);
          slot.pair.y = elemAdd(center, half);
        }
        evalPair(slot, disp, budget, t);
      } catch (const Error& e) {
        slot.failed = true;
        slot.kind = e.kind;
        slot.err = e.what();
      }
    });
  } else {
    throw Error(ErrKind::Input, "unknown sampler strategy: " + sampler.strategy);
  }

  ModuliReport rep;
  rep.n = n;
  rep.grid = grid;
  for (auto& slot : slots) {
    if (slot.failed) throw Error(slot.kind, slot.err);
    if (!slot.used) continue;
    slot.pair.id = static_cast<long>(rep.pairs.size());
    rep.pairs.push_back(std::move(slot.pair));
  }
  rep.sampleCount = static_cast<long>(rep.pairs.size());

  rep.omegaLower.assign(grid.size(), 0.0);
  rep.rhoUpper.assign(grid.size(), kInf);
  rep.omegaWitness.assign(grid.size(), -1);
  rep.rhoWitness.assign(grid.size(), -1);
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    const double t = grid[gi];
    for (const auto& p : rep.pairs) {
      if (p.dist.upper <= t + slack(t) && p.disp.lower > rep.omegaLower[gi]) {
        rep.omegaLower[gi] = p.disp.lower;
        rep.omegaWitness[gi] = p.id;
      }
      if (p.dist.lower >= t - slack(t) && p.disp.upper < rep.rhoUpper[gi]) {
        rep.rhoUpper[gi] = p.disp.upper;
        rep.rhoWitness[gi] = p.id;
      }
    }
  }
  return rep;
}

ModuliReport estimateModuli(const OsMap& f, const DomainSampler& sampler,
                            const std::vector<double>& grid, int pairsPerCell,
                            const SolveBudget& budget) {
  if (!f) throw Error(ErrKind::Input, "no map supplied");
  PairDisplacement disp = [f, budget](const OsElement& x, const OsElement& y) {
    return osDistance(f(x), f(y), budget);
  };
  return estimateModuliPairs(disp, sampler, grid, pairsPerCell, budget);
}

AffineCheck affineBoundCheck(const ModuliReport& report, double overrideL) {
  AffineCheck out;
  if (overrideL >= 0.0) {
    out.l = overrideL;
  } else {
    size_t idx = report.grid.size();
    for (size_t i = 0; i < report.grid.size(); ++i)
      if (std::abs(report.grid[i] - 1.0) <= 1e-12) idx = i;
    if (idx == report.grid.size())
      throw Error(ErrKind::Grid, "affine bound check needs t = 1 on the grid");
    out.l = report.omegaLower[idx];
  }
  for (size_t i = 0; i < report.grid.size(); ++i) {
    const double bound = out.l * report.grid[i] + out.l;
    if (report.omegaLower[i] > bound + 1e-12 * std::max(1.0, bound))
      out.violations.push_back(static_cast<int>(i));
  }
  return out;
}

EquiModuliReport aggregateEqui(const std::vector<ModuliReport>& reports) {
  if (reports.empty()) throw Error(ErrKind::EmptyInput, "no per-level reports to aggregate");
  EquiModuliReport equi;
  equi.grid = reports[0].grid;
  for (const auto& r : reports)
    if (r.grid != equi.grid)
      throw Error(ErrKind::Grid, "per-level reports use different distance grids");
  equi.perN = reports;
  equi.omegaLower.assign(equi.grid.size(), 0.0);
  equi.rhoUpper.assign(equi.grid.size(), kInf);
  for (const auto& r : reports) {
    for (size_t i = 0; i < equi.grid.size(); ++i) {
      equi.omegaLower[i] = std::max(equi.omegaLower[i], r.omegaLower[i]);
      equi.rhoUpper[i] = std::min(equi.rhoUpper[i], r.rhoUpper[i]);
    }
  }
  return equi;
}

ExpansionWitness expansionWitness(const EquiModuliReport& equi, double r) {
  size_t idx = equi.grid.size();
  for (size_t i = 0; i < equi.grid.size(); ++i)
    if (std::abs(equi.grid[i] - r) <= 1e-12 * std::max(1.0, r)) idx = i;
  if (idx == equi.grid.size())
    throw Error(ErrKind::Grid, "expansion scale r is not a grid point");
  ExpansionWitness w;
  w.margin = equi.rhoUpper[idx];
  w.expanding = w.margin > 0.0;
  return w;
}

bool verifyWitnesses(const ModuliReport& report, const PairDisplacement& disp,
                     const SolveBudget& budget, double tol) {
  auto close = [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
  auto checkPair = [&](long id) {
    if (id < 0) return true;
    if (id >= static_cast<long>(report.pairs.size())) return false;
    const SampledPair& p = report.pairs[static_cast<size_t>(id)];
    NormCertificate dist = osDistance(p.x, p.y, budget);
    NormCertificate dsp = disp(p.x, p.y);
    return close(dist.lower, p.dist.lower) && close(dist.upper, p.dist.upper) &&
           close(dsp.lower, p.disp.lower) && close(dsp.upper, p.disp.upper);
  };
  for (size_t gi = 0; gi < report.grid.size(); ++gi) {
    if (!checkPair(report.omegaWitness[gi])) return false;
    if (!checkPair(report.rhoWitness[gi])) return false;
    const long ow = report.omegaWitness[gi];
    if (ow >= 0 && !close(report.pairs[static_cast<size_t>(ow)].disp.lower, report.omegaLower[gi]))
      return false;
    const long rw = report.rhoWitness[gi];
    if (rw >= 0 && !close(report.pairs[static_cast<size_t>(rw)].disp.upper, report.rhoUpper[gi]))
      return false;
  }
  return true;
}

namespace {

void moduliCsvRows(std::ostringstream& out, const ModuliReport& r, int nColumn) {
  for (size_t i = 0; i < r.grid.size(); ++i) {
    out << nColumn << ',' << formatDouble(r.grid[i]) << ',' << formatDouble(r.omegaLower[i])
        << ',';
    if (std::isinf(r.rhoUpper[i]))
      out << "inf";
    else
      out << formatDouble(r.rhoUpper[i]);
    out << ',' << r.omegaWitness[i] << '\n';
  }
}

}  // namespace

std::string moduliCsv(const ModuliReport& report) {
  std::ostringstream out;
  out << "n,t,omega_lower,rho_upper,witness_id\n";
  moduliCsvRows(out, report, report.n);
  return out.str();
}

// aggregate rows carry n = 0
std::string equiModuliCsv(const EquiModuliReport& equi) {
  std::ostringstream out;
  out << "n,t,omega_lower,rho_upper,witness_id\n";
  for (const auto& r : equi.perN) moduliCsvRows(out, r, r.n);
  for (size_t i = 0; i < equi.grid.size(); ++i) {
    out << 0 << ',' << formatDouble(equi.grid[i]) << ',' << formatDouble(equi.omegaLower[i])
        << ',';
    if (std::isinf(equi.rhoUpper[i]))
      out << "inf";
    else
      out << formatDouble(equi.rhoUpper[i]);
    out << ",-1\n";
  }
  return out.str();
}

std::string witnessesJson(const ModuliReport& report, int indent) {
  nlohmann::json j;
  j["n"] = report.n;
  j["grid"] = report.grid;
  j["omega_lower"] = report.omegaLower;
  nlohmann::json rho = nlohmann::json::array();
  for (double v : report.rhoUpper) {
    if (std::isinf(v))
      rho.push_back(nullptr);
    else
      rho.push_back(v);
  }
  j["rho_upper"] = rho;
  j["omega_witness"] = report.omegaWitness;
  j["rho_witness"] = report.rhoWitness;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    nlohmann::json pj;
    pj["id"] = p.id;
    pj["dist"] = certJson(p.dist);
    pj["disp"] = certJson(p.disp);
    pj["x"] = nlohmann::json::parse(elementToJson(p.x));
    pj["y"] = nlohmann::json::parse(elementToJson(p.y));
    pairs.push_back(std::move(pj));
  }
  j["pairs"] = std::move(pairs);
  return indent >= 0 ? j.dump(indent) : j.dump();
}

}  // namespace oplab
