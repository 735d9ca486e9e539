// Command-line front end for the operator-space laboratory. Every command
// reads an explicit seed, writes CSV tables and/or JSON certificates into the
// output directory, and embeds its resolved configuration, seed and code
// version in each report so runs are reproducible byte for byte.
//
// Exit codes: 0 success, 2 a verification or certificate check failed,
// 3 malformed input, 4 the requested range exhausts the configured
// truncation or resolution budget.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oplab/coarse.hpp"
#include "oplab/interpolation.hpp"
#include "oplab/kalton.hpp"
#include "oplab/obstruction.hpp"
#include "oplab/opspaces.hpp"
#include "oplab/rng.hpp"
#include "oplab/textio.hpp"
#include "oplab/version.hpp"

using namespace oplab;
using ojson = nlohmann::ordered_json;

namespace {

// resolved configuration echoed into every report, in insertion order
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

int exitCodeFor(ErrKind kind) {
  switch (kind) {
    case ErrKind::DegenerateCertificate:
    case ErrKind::DegenerateQuotient:
    case ErrKind::NoPreimage:
      return 2;
    case ErrKind::Truncation:
      return 4;
    default:
      return 3;
  }
}

std::pair<int, int> parseRange(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw Error(ErrKind::Input, "range must be written a:b, got '" + s + "'");
  try {
    const int a = std::stoi(s.substr(0, colon));
    const int b = std::stoi(s.substr(colon + 1));
    return {a, b};
  } catch (const std::exception&) {
    throw Error(ErrKind::Input, "range endpoints must be integers, got '" + s + "'");
  }
}

std::vector<double> parseDoubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrKind::Input, "expected a comma-separated number list, got '" + s + "'");
    }
  }
  if (out.empty()) throw Error(ErrKind::Input, "empty number list");
  return out;
}

SolveBudget parseBudget(const std::string& s) {
  std::vector<double> v = parseDoubles(s);
  if (v.size() != 4)
    throw Error(ErrKind::Input, "budget must be degree,grid,restarts,steps, got '" + s + "'");
  SolveBudget b;
  b.degree = static_cast<int>(v[0]);
  b.grid = static_cast<int>(v[1]);
  b.restarts = static_cast<int>(v[2]);
  b.steps = static_cast<int>(v[3]);
  if (b.degree < 1 || b.grid < 4 || b.restarts < 1 || b.steps < 1)
    throw Error(ErrKind::Input, "budget components out of range in '" + s + "'");
  return b;
}

// shared flags; each subcommand owns a copy so config-file keys stay flat
struct Common {
  uint64_t seed = 1;
  std::string out = ".";
  std::string format = "both";
  std::string budget = "6,64,8,2000";
  std::string configFile;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random seed (reports never default to wall-clock)")
        ->capture_default_str();
    cmd->add_option("--out", out, "output directory")->capture_default_str();
    cmd->add_option("--format", format, "which reports to write")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
    cmd->add_option("--budget", budget, "solver budget degree,grid,restarts,steps")
        ->capture_default_str();
    cmd->add_option("--config", configFile,
                    "key=value file with the same keys as the flags; flags given on the "
                    "command line win");
  }
  bool wantCsv() const { return format != "json"; }
  bool wantJson() const { return format != "csv"; }
};

std::string trimmed(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

// Flat key=value config support: the file's pairs become --key=value tokens
// spliced in right after the subcommand name, so every option set later on
// the actual command line wins under the take-last policy.
std::vector<std::string> expandConfigFile(const std::vector<std::string>& raw,
                                          const std::vector<std::string>& commands) {
  size_t subIdx = raw.size();
  for (size_t i = 0; i < raw.size() && subIdx == raw.size(); ++i)
    for (const auto& c : commands)
      if (raw[i] == c) subIdx = i;
  if (subIdx == raw.size()) return raw;

  std::string file;
  for (size_t i = subIdx + 1; i < raw.size(); ++i) {
    if (raw[i] == "--config" && i + 1 < raw.size())
      file = raw[i + 1];
    else if (raw[i].rfind("--config=", 0) == 0)
      file = raw[i].substr(9);
  }
  if (file.empty()) return raw;

  std::ifstream f(file);
  if (!f) throw Error(ErrKind::Input, "cannot read config file " + file);
  std::vector<std::string> tokens;
  std::string line;
  int lineNo = 0;
  while (std::getline(f, line)) {
    ++lineNo;
    const std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    const std::string key = eq == std::string::npos ? std::string() : trimmed(t.substr(0, eq));
    if (key.empty())
      throw Error(ErrKind::Input,
                  file + ":" + std::to_string(lineNo) + ": expected key=value");
    tokens.push_back("--" + key + "=" + trimmed(t.substr(eq + 1)));
  }

  std::vector<std::string> out(raw.begin(), raw.begin() + static_cast<long>(subIdx) + 1);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), raw.begin() + static_cast<long>(subIdx) + 1, raw.end());
  return out;
}

void writeFile(const std::string& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrKind::Input, "cannot open output file " + path);
  f << content;
  f.close();
  std::printf("wrote %s\n", path.c_str());
}

ojson envelope(const std::string& command, uint64_t seed, const ConfigEcho& cfg) {
  ojson j;
  j["command"] = command;
  j["version"] = versionHash();
  j["seed"] = seed;
  ojson c = ojson::object();
  for (const auto& [k, v] : cfg) c[k] = v;
  j["config"] = c;
  return j;
}

std::string csvComment(const std::string& command, uint64_t seed, const ConfigEcho& cfg) {
  std::ostringstream os;
  os << "# command=" << command << " version=" << versionHash() << " seed=" << seed;
  for (const auto& [k, v] : cfg) os << ' ' << k << '=' << v;
  os << '\n';
  return os.str();
}

OsElement gaussianElement(const OsDescriptor& desc, int n, Rng& rng) {
  OsElement x = makeZeroElement(desc, n);
  for (auto& m : x.coords)
    for (auto& z : m.a) z = rng.gaussianC();
  return x;
}

OsElement scaledTo(const OsElement& x, double target) {
  const double u = osNorm(x).upper;
  return u > 0.0 ? elemScale(x, target / u) : x;
}

// 1-based line and column of a byte offset, for parse diagnostics
std::pair<size_t, size_t> lineColAt(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

ojson certJson(const NormCertificate& c) {
  ojson j;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  j["exact"] = c.exact;
  j["method"] = c.method;
  return j;
}

// ---------------------------------------------------------------------------
// norm: certificate for one element, from a builtin family or a JSON file

struct NormOpts {
  Common common;
  std::string builtin = "lemma32-b";
  std::string elementFile;
  std::string space = "row";
  int dim = 6;
  int level = 3;
  double r = 1.0;
  double spaceTheta = 0.5;
};

int runNorm(const NormOpts& o) {
  OsElement x;
  std::string sourceDesc;
  if (!o.elementFile.empty()) {
    std::ifstream f(o.elementFile, std::ios::binary);
    if (!f) throw Error(ErrKind::Input, "cannot read element file " + o.elementFile);
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string text = buf.str();
    try {
      const auto probe = nlohmann::json::parse(text);
      (void)probe;
    } catch (const nlohmann::json::parse_error& e) {
      const auto [line, col] = lineColAt(text, e.byte > 0 ? e.byte - 1 : 0);
      throw Error(ErrKind::Input, o.elementFile + ":" + std::to_string(line) + ":" +
                                      std::to_string(col) + ": " + e.what());
    }
    x = elementFromJson(text);
    sourceDesc = "file " + o.elementFile;
  } else {
    const OsDescriptor desc = makeDescriptor(spaceKindFromName(o.space), o.dim, o.spaceTheta);
    if (o.builtin == "zero") {
      x = makeZeroElement(desc, o.level);
    } else if (o.builtin == "random") {
      Rng rng = Rng::forSlot(o.common.seed, 0);
      x = gaussianElement(desc, o.level, rng);
    } else if (o.builtin == "lemma32-a" || o.builtin == "lemma32-b") {
      SpecialMatrices s = buildSpecial(o.level, o.r, desc);
      x = (o.builtin == "lemma32-a") ? s.c : s.d;
    } else {
      throw Error(ErrKind::Input, "unknown builtin family '" + o.builtin + "'");
    }
    sourceDesc = "builtin " + o.builtin;
  }

  const NormCertificate cert = osNorm(x, parseBudget(o.common.budget));

  ConfigEcho cfg = {{"source", sourceDesc},
                    {"space", x.space.label()},
                    {"level", std::to_string(x.n)},
                    {"r", formatDouble(o.r)},
                    {"budget", o.common.budget}};
  if (o.common.wantJson()) {
    ojson j = envelope("norm", o.common.seed, cfg);
    j["certificate"] = certJson(cert);
    writeFile(o.common.out, "norm.json", j.dump(2) + "\n");
  }
  if (o.common.wantCsv()) {
    std::ostringstream csv;
    csv << csvComment("norm", o.common.seed, cfg);
    csv << "lower,upper,exact,method\n";
    csv << formatDouble(cert.lower) << ',' << formatDouble(cert.upper) << ','
        << formatBool(cert.exact) << ',' << cert.method << '\n';
    writeFile(o.common.out, "norm.csv", csv.str());
  }
  std::printf("norm in [%s, %s] (%s)\n", formatDouble(cert.lower).c_str(),
              formatDouble(cert.upper).c_str(), cert.method.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// interp: certified brackets for a seeded vector across a theta list

struct InterpOpts {
  Common common;
  std::string couple = "row-column";
  int n = 2;
  int truncation = 2;
  int dim = 4;  // weighted couple only
  std::string thetas = "0,0.25,0.5,0.75,1";
};

int runInterp(const InterpOpts& o) {
  NormCouple couple;
  size_t vecSize = 0;
  if (o.couple == "row-column") {
    couple = coupleRowColumn(o.n, o.truncation);
    vecSize = static_cast<size_t>(o.n) * o.n * o.truncation;
  } else if (o.couple == "row-rowop") {
    couple = coupleRowRowOp(o.n, o.truncation);
    vecSize = static_cast<size_t>(o.n) * o.n * o.truncation;
  } else if (o.couple == "weighted") {
    std::vector<double> w0(static_cast<size_t>(o.dim)), w1(static_cast<size_t>(o.dim));
    for (int i = 0; i < o.dim; ++i) {
      w0[static_cast<size_t>(i)] = 1.0 + i;
      w1[static_cast<size_t>(i)] = static_cast<double>(o.dim - i);
    }
    couple = coupleWeightedL2(w0, w1);
    vecSize = static_cast<size_t>(o.dim);
  } else {
    throw Error(ErrKind::Input, "unknown couple '" + o.couple + "'");
  }

  const SolveBudget budget = parseBudget(o.common.budget);
  const std::vector<double> thetas = parseDoubles(o.thetas);
  Rng rng = Rng::forSlot(o.common.seed, 0);
  VecC x(vecSize);
  for (auto& z : x) z = rng.gaussianC();

  std::vector<BracketResult> results;
  for (double theta : thetas) results.push_back(bracket(x, couple, theta, budget, o.common.seed));

  ConfigEcho cfg = {{"couple", o.couple},
                    {"n", std::to_string(o.n)},
                    {"truncation", std::to_string(o.truncation)},
                    {"theta", o.thetas},
                    {"budget", o.common.budget}};
  if (o.common.wantJson()) {
    ojson j = envelope("interp", o.common.seed, cfg);
    ojson arr = ojson::array();
    for (const auto& b : results) arr.push_back(ojson::parse(bracketToJson(b)));
    j["brackets"] = arr;
    writeFile(o.common.out, "interp.json", j.dump(2) + "\n");
  }
  if (o.common.wantCsv()) {
    std::ostringstream csv;
    csv << csvComment("interp", o.common.seed, cfg);
    csv << "theta,lower,upper,width,exact,upper_kind\n";
    for (const auto& b : results)
      csv << formatDouble(b.theta) << ',' << formatDouble(b.lower) << ','
          << formatDouble(b.upper) << ',' << formatDouble(b.upper - b.lower) << ','
          << formatBool(b.exact) << ',' << b.upperKind << '\n';
    writeFile(o.common.out, "interp.csv", csv.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// lemma32: the basis-column interpolation table against its exact target

struct SweepOpts {
  Common common;
  std::string nRange = "1:4";
  std::string thetas = "0,0.25,0.5,0.75,1";
};

int runLemma32(const SweepOpts& o) {
  const auto [nMin, nMax] = parseRange(o.nRange);
  const std::vector<Lemma32Row> rows =
      lemma32Table(nMin, nMax, parseDoubles(o.thetas), parseBudget(o.common.budget));

  ConfigEcho cfg = {{"n-range", o.nRange}, {"theta", o.thetas}, {"budget", o.common.budget}};
  if (o.common.wantCsv())
    writeFile(o.common.out, "lemma32.csv",
              csvComment("lemma32", o.common.seed, cfg) + lemma32Csv(rows));
  if (o.common.wantJson()) {
    ojson j = envelope("lemma32", o.common.seed, cfg);
    ojson arr = ojson::array();
    for (const auto& r : rows) {
      ojson row;
      row["n"] = r.n;
      row["theta"] = r.theta;
      row["target"] = r.target;
      row["dual_lower"] = r.dualLower;
      row["upper"] = r.upper;
      row["width"] = r.width;
      arr.push_back(row);
    }
    j["rows"] = arr;
    writeFile(o.common.out, "lemma32.json", j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// obstruction: growth comparison table and its crossover index

struct ObstructionOpts {
  Common common;
  double theta = 0.5;
  double gamma = 1.0;
  double r = 1.0;
  double bigD = 1.0;
  double bigL = 1.0;
  std::string nRange = "1:64";
};

int runObstruction(const ObstructionOpts& o) {
  const auto [nMin, nMax] = parseRange(o.nRange);
  const ObstructionTable table =
      growthObstruction(o.theta, o.gamma, o.r, o.bigD, o.bigL, nMin, nMax);

  ConfigEcho cfg = {{"theta", formatDouble(o.theta)}, {"gamma", formatDouble(o.gamma)},
                    {"r", formatDouble(o.r)},         {"big-d", formatDouble(o.bigD)},
                    {"big-l", formatDouble(o.bigL)},  {"n-range", o.nRange}};
  if (o.common.wantCsv())
    writeFile(o.common.out, "obstruction.csv",
              csvComment("obstruction", o.common.seed, cfg) + obstructionCsv(table));
  if (o.common.wantJson()) {
    ojson j = envelope("obstruction", o.common.seed, cfg);
    j["n_star"] = table.nStar;
    j["b_formula"] = table.bFormula;
    j["first_true_violation"] = table.firstTrueViolation;
    j["violation_in_range"] = table.violationInRange;
    j["symmetric_reduction"] = table.symmetricReduction;
    j["theta_used"] = table.thetaUsed;
    j["gamma_used"] = table.gammaUsed;
    ojson arr = ojson::array();
    for (const auto& r : table.rows) {
      ojson row;
      row["n"] = r.n;
      row["lhs"] = r.lhs;
      row["rhs"] = r.rhs;
      row["violated"] = r.violated;
      arr.push_back(row);
    }
    j["rows"] = arr;
    writeFile(o.common.out, "obstruction.json", j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// prop31: divergence table for a candidate coordinate map

struct Prop31Opts {
  Common common;
  std::string nRange = "1:6";
  double r = 1.0;
  int truncation = 0;  // 0 = two directions per n, the minimum
  std::string map = "transpose";
  double scale = 1.0;
};

int runProp31(const Prop31Opts& o) {
  const auto [nMin, nMax] = parseRange(o.nRange);
  const int dim = o.truncation > 0 ? o.truncation : 2 * nMax;
  XMap f;
  if (o.map == "transpose") {
    f = xmapTranspose(dim);
  } else if (o.map == "collapse") {
    f = xmapCollapse(dim);
  } else if (o.map == "scaled") {
    f = xmapScaledTranspose(dim, o.scale);
  } else {
    throw Error(ErrKind::Input, "unknown candidate map '" + o.map + "'");
  }
  const std::vector<DivergenceRow> rows = prop31Divergence(nMin, nMax, o.r, f);

  ConfigEcho cfg = {{"n-range", o.nRange},
                    {"r", formatDouble(o.r)},
                    {"truncation", std::to_string(dim)},
                    {"map", f.name}};
  if (o.common.wantCsv())
    writeFile(o.common.out, "prop31.csv",
              csvComment("prop31", o.common.seed, cfg) + divergenceCsv(rows));
  if (o.common.wantJson()) {
    ojson j = envelope("prop31", o.common.seed, cfg);
    ojson arr = ojson::array();
    for (const auto& r : rows) {
      ojson row;
      row["n"] = r.n;
      row["rho_witness"] = r.rhoWitness;
      row["stacked"] = r.stacked;
      row["omega_value"] = r.omegaValue;
      arr.push_back(row);
    }
    j["rows"] = arr;
    writeFile(o.common.out, "prop31.json", j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// kalton: the full quotient verification sweep, with an optional injected
// fault that must be caught (negative control)

struct KaltonOpts {
  Common common;
  int nTarget = 3;
  int kMin = 1;
  int kMax = 3;
  int samples = 50;
  int glueTMax = 8;
  int gluePairs = 500;
  bool injectFault = false;
};

int runKalton(const KaltonOpts& o) {
  if (o.nTarget > 6)
    throw Error(ErrKind::Input, "quotient target dimension capped at 6 (32 sign columns)");
  if (o.kMax > 4) throw Error(ErrKind::Input, "matrix level capped at 4");

  KaltonConfig cfg;
  cfg.nTarget = o.nTarget;
  cfg.kMin = o.kMin;
  cfg.kMax = o.kMax;
  cfg.samples = o.samples;
  cfg.seed = o.common.seed;
  cfg.glueTMax = o.glueTMax;
  cfg.gluePairs = o.gluePairs;
  cfg.budget = parseBudget(o.common.budget);
  KaltonReport rep = runKaltonChecks(cfg);

  if (o.injectFault) {
    // break the section on purpose; the residual check must report it
    const QuotientMapData q = signVectorQuotient(o.nTarget);
    EquivalencePair eq = equivalenceMaps(q, o.kMin);
    HomogeneousMap bad = perturbMap(eq.f, 0.05);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
      Rng rng = Rng::forSlot(o.common.seed ^ 0x5151ull, static_cast<uint64_t>(s));
      OsElement x = scaledTo(gaussianElement(q.target, 2, rng), 1.0 + rng.uniform01());
      ZMat z = sectionAmplified(q, bad, x);
      worst = std::max(worst, osNorm(elemSub(quotientTilde(q, z), x)).upper);
    }
    KaltonCheck check;
    check.name = "injected-section-residual";
    check.pass = worst <= 1e-9;
    check.margin = 1e-9 - worst;
    check.detail = "deliberately perturbed section leaves residual " + formatDouble(worst);
    rep.checks.push_back(check);
    rep.allPass = rep.allPass && check.pass;
  }

  ConfigEcho cfg2 = {{"n-target", std::to_string(o.nTarget)},
                     {"k-min", std::to_string(o.kMin)},
                     {"k-max", std::to_string(o.kMax)},
                     {"samples", std::to_string(o.samples)},
                     {"glue-tmax", std::to_string(o.glueTMax)},
                     {"glue-pairs", std::to_string(o.gluePairs)},
                     {"inject-fault", o.injectFault ? "1" : "0"}};
  if (o.common.wantJson()) {
    ojson j = envelope("kalton", o.common.seed, cfg2);
    j["report"] = ojson::parse(kaltonReportJson(rep, 2));
    writeFile(o.common.out, "kalton.json", j.dump(2) + "\n");
  }
  if (o.common.wantCsv()) {
    std::ostringstream csv;
    csv << csvComment("kalton", o.common.seed, cfg2);
    csv << "name,pass,margin\n";
    for (const auto& c : rep.checks)
      csv << c.name << ',' << formatBool(c.pass) << ',' << formatDouble(c.margin) << '\n';
    writeFile(o.common.out, "kalton.csv", csv.str());
  }
  std::printf("%s: %zu checks, %s\n", rep.allPass ? "PASS" : "FAIL", rep.checks.size(),
              rep.allPass ? "all inequalities hold" : "at least one check failed");
  return rep.allPass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// sphere-glue: build the glued map and verify its working properties

struct GlueOpts {
  Common common;
  int nTarget = 3;
  int k = 2;
  int tMax = 4;
  int pairs = 100;
  int samples = 40;
};

int runSphereGlue(const GlueOpts& o) {
  const QuotientMapData q = signVectorQuotient(o.nTarget);
  const NodeFamily fam = interpolateFamily(q, o.k, o.tMax);
  const GluedMap glued = glueSpherical(fam, 1.0);

  // section property of the glued map across the whole working range
  double maxResidual = 0.0;
  for (int s = 0; s < o.samples; ++s) {
    Rng rng = Rng::forSlot(o.common.seed, static_cast<uint64_t>(s));
    OsElement x = scaledTo(gaussianElement(q.target, o.k, rng),
                           std::exp(static_cast<double>(o.tMax)) * rng.uniform01());
    ZMat z = gluedEval(glued, x);
    maxResidual = std::max(maxResidual, osNorm(elemSub(quotientTilde(q, z), x)).upper);
  }

  // displacement bound ||F(x) - F(y)|| <= 2 d(x,y) + 1
  long dispViolations = 0;
  double worstGap = -1e300;
  for (int s = 0; s < o.pairs; ++s) {
    Rng rng = Rng::forSlot(o.common.seed ^ 0xA5A5ull, static_cast<uint64_t>(s));
    OsElement x = scaledTo(gaussianElement(q.target, o.k, rng),
                           std::exp(static_cast<double>(o.tMax)) * rng.uniform01());
    OsElement y = scaledTo(gaussianElement(q.target, o.k, rng),
                           std::exp(static_cast<double>(o.tMax)) * rng.uniform01());
    NormCertificate d = osDistance(x, y);
    NormCertificate disp = zNormCert(q, zmSub(gluedEval(glued, x), gluedEval(glued, y)));
    const double gap = disp.lower - (2.0 * d.upper + 1.0);
    worstGap = std::max(worstGap, gap);
    if (gap > 1e-9) ++dispViolations;
  }

  // on each sphere the glued map agrees with the frozen-parameter blend
  double maxSphereDev = 0.0;
  for (int s = 0; s < 10; ++s) {
    Rng rng = Rng::forSlot(o.common.seed ^ 0xC3C3ull, static_cast<uint64_t>(s));
    const double t = rng.uniform01() * o.tMax;
    OsElement x = scaledTo(gaussianElement(q.target, o.k, rng), std::exp(t));
    const double tx = std::log(osNorm(x).upper);
    ZMat frozen = amplifyToZ([&](const VecC& w) { return familyEval(fam, tx, w); }, q, x);
    maxSphereDev =
        std::max(maxSphereDev, zNormCert(q, zmSub(gluedEval(glued, x), frozen)).upper);
  }

  const bool residualOk = maxResidual <= 1e-9;
  const bool dispOk = dispViolations == 0;
  const bool sphereOk = maxSphereDev <= 1e-12;
  const bool hypothesisOk = !*glued.hypothesisViolation;
  const bool pass = residualOk && dispOk && sphereOk && hypothesisOk;

  ConfigEcho cfg = {{"n-target", std::to_string(o.nTarget)},
                    {"k", std::to_string(o.k)},
                    {"t-max", std::to_string(o.tMax)},
                    {"pairs", std::to_string(o.pairs)},
                    {"samples", std::to_string(o.samples)}};
  if (o.common.wantJson()) {
    ojson j = envelope("sphere-glue", o.common.seed, cfg);
    j["max_section_residual"] = maxResidual;
    j["displacement_violations"] = dispViolations;
    j["worst_displacement_gap"] = worstGap;
    j["max_sphere_deviation"] = maxSphereDev;
    j["hypothesis_violation"] = !hypothesisOk;
    j["pass"] = pass;
    writeFile(o.common.out, "sphere_glue.json", j.dump(2) + "\n");
  }
  if (o.common.wantCsv()) {
    std::ostringstream csv;
    csv << csvComment("sphere-glue", o.common.seed, cfg);
    csv << "check,value,pass\n";
    csv << "section_residual," << formatDouble(maxResidual) << ',' << formatBool(residualOk)
        << '\n';
    csv << "displacement_violations," << dispViolations << ',' << formatBool(dispOk) << '\n';
    csv << "sphere_deviation," << formatDouble(maxSphereDev) << ',' << formatBool(sphereOk)
        << '\n';
    csv << "hypothesis_flag," << formatBool(!hypothesisOk) << ',' << formatBool(hypothesisOk)
        << '\n';
    writeFile(o.common.out, "sphere_glue.csv", csv.str());
  }
  std::printf("%s: residual %s, %ld displacement violations, sphere deviation %s\n",
              pass ? "PASS" : "FAIL", formatDouble(maxResidual).c_str(), dispViolations,
              formatDouble(maxSphereDev).c_str());
  return pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// moduli: empirical compression/expansion bounds for a chosen map

struct ModuliOpts {
  Common common;
  std::string space = "row";
  int dim = 4;
  int n = 2;
  double radius = 1.0;
  std::string strategy = "uniform-ball";
  int count = 64;
  std::string grid = "0.25,0.5,1,2,4,8";
  std::string map = "identity";
};

int runModuli(const ModuliOpts& o) {
  DomainSampler sampler;
  sampler.space = makeDescriptor(spaceKindFromName(o.space), o.dim);
  sampler.n = o.n;
  sampler.radius = o.radius;
  sampler.strategy = o.strategy;
  sampler.seed = o.common.seed;
  sampler.count = o.count;

  OsMap f;
  if (o.map == "identity") {
    f = identityOsMap();
  } else if (o.map == "norm-scaling") {
    f = normScalingOsMap();
  } else if (o.map == "transpose") {
    f = amplifiedOsMap(xmapTranspose(o.dim), sampler.space);
  } else {
    throw Error(ErrKind::Input, "unknown map '" + o.map + "'");
  }

  const ModuliReport report =
      estimateModuli(f, sampler, parseDoubles(o.grid), 0, parseBudget(o.common.budget));

  ConfigEcho cfg = {{"space", sampler.space.label()},
                    {"n", std::to_string(o.n)},
                    {"radius", formatDouble(o.radius)},
                    {"strategy", o.strategy},
                    {"count", std::to_string(o.count)},
                    {"grid", o.grid},
                    {"map", o.map}};
  if (o.common.wantCsv())
    writeFile(o.common.out, "moduli.csv",
              csvComment("moduli", o.common.seed, cfg) + moduliCsv(report));
  if (o.common.wantJson()) {
    ojson j = envelope("moduli", o.common.seed, cfg);
    j["witnesses"] = ojson::parse(witnessesJson(report));
    writeFile(o.common.out, "moduli.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"operator-space laboratory: norms, interpolation brackets, growth "
               "obstructions, quotient constructions and coarse moduli"};
  app.require_subcommand(1);
  // repeated options keep the last value, which lets command-line flags
  // override config-file tokens spliced in ahead of them
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  NormOpts normOpts;
  CLI::App* normCmd = app.add_subcommand("norm", "certify the norm of one element");
  normOpts.common.attach(normCmd);
  normCmd->add_option("--builtin", normOpts.builtin, "builtin family: lemma32-a, lemma32-b, zero, random")
      ->capture_default_str();
  normCmd->add_option("--element", normOpts.elementFile, "element JSON file (overrides --builtin)");
  normCmd->add_option("--space", normOpts.space, "descriptor kind")->capture_default_str();
  normCmd->add_option("--dim", normOpts.dim, "coordinate dimension")->capture_default_str();
  normCmd->add_option("--level", normOpts.level, "matrix level n")->capture_default_str();
  normCmd->add_option("--r", normOpts.r, "scale of the builtin construction")
      ->capture_default_str();
  normCmd->add_option("--space-theta", normOpts.spaceTheta, "parameter for interp_rc descriptors")
      ->capture_default_str();

  InterpOpts interpOpts;
  CLI::App* interpCmd = app.add_subcommand("interp", "certified interpolation brackets");
  interpOpts.common.attach(interpCmd);
  interpCmd->add_option("--couple", interpOpts.couple, "row-column, row-rowop or weighted")
      ->capture_default_str();
  interpCmd->add_option("--n", interpOpts.n, "matrix size")->capture_default_str();
  interpCmd->add_option("--truncation", interpOpts.truncation, "coordinate dimension")
      ->capture_default_str();
  interpCmd->add_option("--dim", interpOpts.dim, "vector size for the weighted couple")
      ->capture_default_str();
  interpCmd->add_option("--theta", interpOpts.thetas, "comma-separated parameter list")
      ->capture_default_str();

  SweepOpts lemmaOpts;
  CLI::App* lemmaCmd = app.add_subcommand("lemma32", "basis-column bracket table");
  lemmaOpts.common.attach(lemmaCmd);
  lemmaCmd->add_option("--n-range", lemmaOpts.nRange, "matrix sizes a:b")->capture_default_str();
  lemmaCmd->add_option("--theta", lemmaOpts.thetas, "comma-separated parameter list")
      ->capture_default_str();

  ObstructionOpts obsOpts;
  CLI::App* obsCmd = app.add_subcommand("obstruction", "growth comparison table");
  obsOpts.common.attach(obsCmd);
  obsCmd->add_option("--theta", obsOpts.theta, "compression exponent")->capture_default_str();
  obsCmd->add_option("--gamma", obsOpts.gamma, "expansion exponent")->capture_default_str();
  obsCmd->add_option("--r", obsOpts.r, "pair scale")->capture_default_str();
  obsCmd->add_option("-D,--big-d", obsOpts.bigD, "expansion constant")->capture_default_str();
  obsCmd->add_option("-L,--big-l", obsOpts.bigL, "coarse Lipschitz constant")
      ->capture_default_str();
  obsCmd->add_option("--n-range", obsOpts.nRange, "scan range a:b")->capture_default_str();

  Prop31Opts propOpts;
  CLI::App* propCmd = app.add_subcommand("prop31", "divergence table for a candidate map");
  propOpts.common.attach(propCmd);
  propCmd->add_option("--n-range", propOpts.nRange, "matrix sizes a:b")->capture_default_str();
  propCmd->add_option("--r", propOpts.r, "pair scale")->capture_default_str();
  propCmd->add_option("--truncation", propOpts.truncation,
                      "coordinate dimension (0 = minimal for the range)")
      ->capture_default_str();
  propCmd->add_option("--map", propOpts.map, "transpose, collapse or scaled")
      ->capture_default_str();
  propCmd->add_option("--scale", propOpts.scale, "factor for the scaled map")
      ->capture_default_str();

  KaltonOpts kaltonOpts;
  CLI::App* kaltonCmd = app.add_subcommand("kalton", "quotient verification sweep");
  kaltonOpts.common.attach(kaltonCmd);
  kaltonCmd->add_option("--n-target", kaltonOpts.nTarget, "quotient target dimension (<= 6)")
      ->capture_default_str();
  kaltonCmd->add_option("--k-min", kaltonOpts.kMin, "first matrix level")->capture_default_str();
  kaltonCmd->add_option("--k-max", kaltonOpts.kMax, "last matrix level (<= 4)")
      ->capture_default_str();
  kaltonCmd->add_option("--samples", kaltonOpts.samples, "samples per check")
      ->capture_default_str();
  kaltonCmd->add_option("--glue-tmax", kaltonOpts.glueTMax, "last gluing node")
      ->capture_default_str();
  kaltonCmd->add_option("--glue-pairs", kaltonOpts.gluePairs, "pairs for the glued bounds")
      ->capture_default_str();
  kaltonCmd->add_flag("--inject-fault", kaltonOpts.injectFault,
                      "perturb a section on purpose; the sweep must catch it");

  GlueOpts glueOpts;
  CLI::App* glueCmd = app.add_subcommand("sphere-glue", "build and check the glued map");
  glueOpts.common.attach(glueCmd);
  glueCmd->add_option("--n-target", glueOpts.nTarget, "quotient target dimension")
      ->capture_default_str();
  glueCmd->add_option("--k", glueOpts.k, "matrix level")->capture_default_str();
  glueCmd->add_option("--t-max", glueOpts.tMax, "last gluing node")->capture_default_str();
  glueCmd->add_option("--pairs", glueOpts.pairs, "pairs for the displacement bound")
      ->capture_default_str();
  glueCmd->add_option("--samples", glueOpts.samples, "samples for the section residual")
      ->capture_default_str();

  ModuliOpts moduliOpts;
  CLI::App* moduliCmd = app.add_subcommand("moduli", "empirical coarse moduli");
  moduliOpts.common.attach(moduliCmd);
  moduliCmd->add_option("--space", moduliOpts.space, "descriptor kind")->capture_default_str();
  moduliCmd->add_option("--dim", moduliOpts.dim, "coordinate dimension")->capture_default_str();
  moduliCmd->add_option("--n", moduliOpts.n, "matrix level")->capture_default_str();
  moduliCmd->add_option("--radius", moduliOpts.radius, "sampling radius")->capture_default_str();
  moduliCmd->add_option("--strategy", moduliOpts.strategy,
                        "uniform-ball, sphere or structured")
      ->capture_default_str();
  moduliCmd->add_option("--count", moduliOpts.count, "pairs per grid cell")
      ->capture_default_str();
  moduliCmd->add_option("--grid", moduliOpts.grid, "comma-separated distance grid")
      ->capture_default_str();
  moduliCmd->add_option("--map", moduliOpts.map, "identity, norm-scaling or transpose")
      ->capture_default_str();

  int rc = 0;
  normCmd->callback([&]() { rc = runNorm(normOpts); });
  interpCmd->callback([&]() { rc = runInterp(interpOpts); });
  lemmaCmd->callback([&]() { rc = runLemma32(lemmaOpts); });
  obsCmd->callback([&]() { rc = runObstruction(obsOpts); });
  propCmd->callback([&]() { rc = runProp31(propOpts); });
  kaltonCmd->callback([&]() { rc = runKalton(kaltonOpts); });
  glueCmd->callback([&]() { rc = runSphereGlue(glueOpts); });
  moduliCmd->callback([&]() { rc = runModuli(moduliOpts); });

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expandConfigFile(
        args, {"norm", "interp", "lemma32", "obstruction", "prop31", "kalton", "sphere-glue",
               "moduli"});
    std::reverse(args.begin(), args.end());  // the vector overload consumes back to front
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exitCodeFor(e.kind);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return rc;
}
