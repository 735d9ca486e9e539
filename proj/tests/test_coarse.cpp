// Coarse moduli estimation: the identity map pins both moduli to the grid,
// structured sampling reproduces the disjoint-matrix geometry, witnesses
// survive recomputation, and tampered reports are caught.

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "oplab/coarse.hpp"
#include "oplab/rng.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

using namespace oplab;

namespace {

DomainSampler rowSampler(int dim, int n, double radius, uint64_t seed, int count) {
  DomainSampler s;
  s.space = makeDescriptor(SpaceKind::Row, dim);
  s.n = n;
  s.radius = radius;
  s.seed = seed;
  s.count = count;
  return s;
}

PairDisplacement mapDisplacement(const OsMap& f) {
  return [f](const OsElement& x, const OsElement& y) { return osDistance(f(x), f(y)); };
}

}  // namespace

int main() {
  const std::vector<double> grid = {0.25, 0.5, 1.0, 2.0};

  testkit::section("identity map pins both moduli to the grid");
  ModuliReport idRep;
  {
    DomainSampler s = rowSampler(3, 2, 1.0, 7, 32);
    idRep = estimateModuli(identityOsMap(), s, grid);
    REQUIRE(idRep.sampleCount > 0);
    for (size_t i = 0; i < grid.size(); ++i) {
      // each cell plants pairs at distance exactly t, and the identity map
      // moves them by exactly that much
      REQUIRE_CLOSE(idRep.omegaLower[i], grid[i], 1e-9);
      REQUIRE_CLOSE(idRep.rhoUpper[i], grid[i], 1e-9);
      REQUIRE(idRep.omegaWitness[i] >= 0);
      REQUIRE(idRep.rhoWitness[i] >= 0);
    }
    REQUIRE(verifyWitnesses(idRep, mapDisplacement(identityOsMap())));

    AffineCheck ac = affineBoundCheck(idRep);
    REQUIRE_CLOSE(ac.l, 1.0, 1e-9);
    REQUIRE(ac.violations.empty());
    // a deliberately tiny constant is violated on the whole grid, a large
    // one nowhere
    REQUIRE(affineBoundCheck(idRep, 0.05).violations.size() == grid.size());
    REQUIRE(affineBoundCheck(idRep, 5.0).violations.empty());

    DomainSampler s2 = rowSampler(3, 2, 1.0, 7, 8);
    ModuliReport off = estimateModuli(identityOsMap(), s2, {0.5, 2.0});
    REQUIRE_THROWS_KIND(affineBoundCheck(off), ErrKind::Grid);
  }

  testkit::section("constant map crushes every displacement");
  {
    Rng rng = Rng::forSlot(11, 0);
    OsElement v = makeZeroElement(makeDescriptor(SpaceKind::Row, 3), 2);
    for (auto& m : v.coords)
      for (auto& z : m.a) z = rng.gaussianC();
    DomainSampler s = rowSampler(3, 2, 1.0, 13, 16);
    ModuliReport rep = estimateModuli(constantOsMap(v), s, grid);
    for (size_t i = 0; i < grid.size(); ++i) {
      REQUIRE(rep.omegaLower[i] == 0.0);
      REQUIRE(rep.rhoUpper[i] <= 1e-12);
    }
    REQUIRE(verifyWitnesses(rep, mapDisplacement(constantOsMap(v))));
    // cross-wired displacement functors are detected
    REQUIRE(!verifyWitnesses(idRep, mapDisplacement(constantOsMap(v))));
    AffineCheck ac = affineBoundCheck(rep);
    REQUIRE(ac.l == 0.0);
    REQUIRE(ac.violations.empty());
  }

  testkit::section("scaled displacement flows through the generalized engine");
  {
    PairDisplacement disp = [](const OsElement& x, const OsElement& y) {
      return osDistance(elemScale(x, 3.0), elemScale(y, 3.0));
    };
    DomainSampler s = rowSampler(2, 2, 1.0, 17, 16);
    ModuliReport rep = estimateModuliPairs(disp, s, grid);
    for (size_t i = 0; i < grid.size(); ++i) {
      REQUIRE_CLOSE(rep.omegaLower[i], 3.0 * grid[i], 1e-9);
      REQUIRE_CLOSE(rep.rhoUpper[i], 3.0 * grid[i], 1e-9);
    }
    REQUIRE(verifyWitnesses(rep, disp));
  }

  testkit::section("structured sampler reproduces the divergence geometry");
  {
    const std::vector<double> g2 = {1.0, 2.0};
    DomainSampler s = rowSampler(6, 3, 2.0, 1, 4);
    s.strategy = "structured";
    ModuliReport rep = estimateModuli(identityOsMap(), s, g2);
    // n disjoint pairs plus the summed pair per grid cell
    REQUIRE(rep.sampleCount == 8);
    for (size_t i = 0; i < g2.size(); ++i) {
      REQUIRE_CLOSE(rep.omegaLower[i], g2[i], 1e-9);
      REQUIRE_CLOSE(rep.rhoUpper[i], g2[i], 1e-9);
    }

    // under the amplified transpose the summed pair lands in one column of
    // the target, so omega grows like sqrt(n) while rho stays put
    DomainSampler s4 = rowSampler(8, 4, 2.0, 1, 4);
    s4.strategy = "structured";
    OsMap tmap = amplifiedOsMap(xmapTranspose(8), makeDescriptor(SpaceKind::Column, 8));
    ModuliReport trep = estimateModuli(tmap, s4, g2);
    for (size_t i = 0; i < g2.size(); ++i) {
      REQUIRE_CLOSE(trep.omegaLower[i], 2.0 * g2[i], 1e-9);
      REQUIRE_CLOSE(trep.rhoUpper[i], g2[i], 1e-9);
    }
    REQUIRE(verifyWitnesses(trep, mapDisplacement(tmap)));

    // cells whose construction scale exceeds the sampling radius are skipped
    DomainSampler tight = rowSampler(8, 4, 0.9, 1, 4);
    tight.strategy = "structured";
    ModuliReport clipped = estimateModuli(identityOsMap(), tight, g2);
    REQUIRE(clipped.sampleCount == 5);
    REQUIRE(std::isinf(clipped.rhoUpper[1]));
    REQUIRE(clipped.rhoWitness[1] == -1);

    DomainSampler wrong = tight;
    wrong.space = makeDescriptor(SpaceKind::Column, 8);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), wrong, g2),
                        ErrKind::UnsupportedDescriptor);
  }

  testkit::section("sphere sampling stays on the sphere");
  {
    DomainSampler s = rowSampler(2, 2, 1.5, 23, 24);
    s.strategy = "sphere";
    ModuliReport rep = estimateModuli(identityOsMap(), s, {0.5, 1.0});
    REQUIRE(rep.sampleCount > 0);
    for (const auto& p : rep.pairs) {
      REQUIRE_CLOSE(osNorm(p.x).upper, 1.5, 1e-9);
      REQUIRE_CLOSE(osNorm(p.y).upper, 1.5, 1e-9);
    }
    REQUIRE(rep.omegaLower[0] <= rep.omegaLower[1] + 1e-15);
    REQUIRE(verifyWitnesses(rep, mapDisplacement(identityOsMap())));

    // descriptors whose norm engine only brackets cannot be projected to a
    // sphere honestly, so the sampler refuses
    DomainSampler vague = s;
    vague.space = makeDescriptor(SpaceKind::MinL1, 2);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), vague, {0.5, 1.0}),
                        ErrKind::UnsupportedDescriptor);
  }

  testkit::section("aggregation takes the outer envelope");
  {
    const std::vector<double> g2 = {1.0, 2.0};
    OsMap tmap = amplifiedOsMap(xmapTranspose(8), makeDescriptor(SpaceKind::Column, 8));
    std::vector<ModuliReport> reports;
    for (int n : {2, 4}) {
      DomainSampler s = rowSampler(8, n, 2.0, 1, 4);
      s.strategy = "structured";
      reports.push_back(estimateModuli(tmap, s, g2));
    }
    EquiModuliReport equi = aggregateEqui(reports);
    REQUIRE(equi.perN.size() == 2);
    for (size_t i = 0; i < g2.size(); ++i) {
      // omega takes the worst expansion over the family (n = 4), rho the
      // tightest compression (the disjoint pairs, shared by both levels)
      REQUIRE_CLOSE(equi.omegaLower[i], 2.0 * g2[i], 1e-9);
      REQUIRE_CLOSE(equi.rhoUpper[i], g2[i], 1e-9);
    }
    ExpansionWitness w = expansionWitness(equi, 1.0);
    REQUIRE(w.expanding);
    REQUIRE_CLOSE(w.margin, 1.0, 1e-9);
    REQUIRE_THROWS_KIND(expansionWitness(equi, 0.33), ErrKind::Grid);

    REQUIRE_THROWS_KIND(aggregateEqui({}), ErrKind::EmptyInput);
    std::vector<ModuliReport> mixed = reports;
    mixed[1].grid = {1.0, 4.0};
    REQUIRE_THROWS_KIND(aggregateEqui(mixed), ErrKind::Grid);
  }

  testkit::section("tampered reports fail verification");
  {
    ModuliReport bent = idRep;
    bent.omegaLower[0] += 0.125;
    REQUIRE(!verifyWitnesses(bent, mapDisplacement(identityOsMap())));
    ModuliReport forged = idRep;
    forged.pairs[static_cast<size_t>(forged.omegaWitness[0])].dist.upper *= 2.0;
    REQUIRE(!verifyWitnesses(forged, mapDisplacement(identityOsMap())));
  }

  testkit::section("report formats");
  {
    DomainSampler s = rowSampler(2, 1, 1.0, 29, 8);
    ModuliReport rep = estimateModuli(identityOsMap(), s, {1.0, 16.0});
    const std::string csv = moduliCsv(rep);
    REQUIRE(csv.rfind("n,t,omega_lower,rho_upper,witness_id", 0) == 0);
    // no pair can be 16 apart inside a unit ball, so that cell prints inf
    REQUIRE(std::isinf(rep.rhoUpper[1]));
    REQUIRE(csv.find(",inf,") != std::string::npos);

    const std::string js = witnessesJson(rep, 2);
    auto j = nlohmann::json::parse(js);
    REQUIRE(j["n"].get<int>() == 1);
    REQUIRE(j["rho_upper"][1].is_null());
    REQUIRE(!j["rho_upper"][0].is_null());
    REQUIRE(j["pairs"].is_array());
    REQUIRE(!j["pairs"].empty());
    // stored pair elements survive the JSON detour bit for bit
    OsElement back = elementFromJson(j["pairs"][0]["x"].dump());
    const OsElement& orig = rep.pairs[0].x;
    REQUIRE(back.n == orig.n);
    for (size_t k = 0; k < orig.coords.size(); ++k)
      for (size_t p = 0; p < orig.coords[k].a.size(); ++p)
        REQUIRE(back.coords[k].a[p] == orig.coords[k].a[p]);

    EquiModuliReport equi = aggregateEqui({rep});
    const std::string ecsv = equiModuliCsv(equi);
    REQUIRE(ecsv.rfind("n,t,omega_lower,rho_upper,witness_id", 0) == 0);
    REQUIRE(ecsv.find("\n0,") != std::string::npos);

    // the whole pipeline is deterministic for a fixed seed
    ModuliReport again = estimateModuli(identityOsMap(), s, {1.0, 16.0});
    REQUIRE(moduliCsv(again) == csv);
    REQUIRE(witnessesJson(again, 2) == js);
  }

  testkit::section("input validation");
  {
    DomainSampler s = rowSampler(2, 2, 1.0, 1, 8);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), s, {}), ErrKind::Grid);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), s, {-1.0}), ErrKind::Grid);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), s, {1.0, 1.0}), ErrKind::Grid);
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), s, {2.0, 1.0}), ErrKind::Grid);
    DomainSampler badN = s;
    badN.n = 0;
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), badN, grid), ErrKind::Input);
    DomainSampler badR = s;
    badR.radius = -2.0;
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), badR, grid), ErrKind::Input);
    DomainSampler badStrat = s;
    badStrat.strategy = "banana";
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), badStrat, grid), ErrKind::Input);
    DomainSampler badCount = s;
    badCount.count = 0;
    REQUIRE_THROWS_KIND(estimateModuli(identityOsMap(), badCount, grid), ErrKind::Input);
    REQUIRE_THROWS_KIND(estimateModuli(OsMap(), s, grid), ErrKind::Input);
    REQUIRE_THROWS_KIND(estimateModuliPairs(PairDisplacement(), s, grid), ErrKind::Input);
  }

  return testkit::finish("test_coarse");
}
