#include "delayflock/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "delayflock/certificates.hpp"
#include "delayflock/diagnostics.hpp"
#include "delayflock/errors.hpp"
#include "delayflock/spectral.hpp"
#include "numfmt.hpp"

namespace delayflock {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config reading with line-anchored errors

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  std::size_t lineOf(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    for (const auto& key : path) {
      const std::size_t p = text_.find("\"" + key + "\"", pos);
      if (p == std::string::npos) break;
      found = p;
      pos = p + key.size() + 2;
    }
    if (found == std::string::npos) return 0;
    return lineAt(found);
  }

  std::size_t lineAt(std::size_t offset) const {
    offset = std::min(offset, text_.size());
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
  }

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    failAtLine(lineOf(path), what);
  }

  [[noreturn]] void failAtLine(std::size_t line, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (line > 0) os << ':' << line;
    os << ": " << what;
    throw ConfigError(os.str());
  }

  void allowOnly(const json& obj, const std::vector<std::string>& path, std::initializer_list<const char*> keys) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown key '" + it.key() + "'");
      }
    }
  }

  const json& object(const json& parent, const std::vector<std::string>& path, const char* key) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) fail(path, std::string("missing object '") + key + "'");
    if (!parent.at(key).is_object()) fail(p, std::string("'") + key + "' must be an object");
    return parent.at(key);
  }

  double number(const json& parent, const std::vector<std::string>& path, const char* key,
                std::optional<double> fallback = std::nullopt) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) {
      if (fallback) return *fallback;
      fail(path, std::string("missing number '") + key + "'");
    }
    if (!parent.at(key).is_number()) fail(p, std::string("'") + key + "' must be a number");
    const double v = parent.at(key).get<double>();
    if (!std::isfinite(v)) fail(p, std::string("'") + key + "' must be finite");
    return v;
  }

  std::uint64_t count(const json& parent, const std::vector<std::string>& path, const char* key,
                      std::optional<std::uint64_t> fallback = std::nullopt) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) {
      if (fallback) return *fallback;
      fail(path, std::string("missing integer '") + key + "'");
    }
    if (!parent.at(key).is_number_unsigned()) fail(p, std::string("'") + key + "' must be a nonnegative integer");
    return parent.at(key).get<std::uint64_t>();
  }

  bool flag(const json& parent, const std::vector<std::string>& path, const char* key, bool fallback) const {
    if (!parent.contains(key)) return fallback;
    auto p = path;
    p.push_back(key);
    if (!parent.at(key).is_boolean()) fail(p, std::string("'") + key + "' must be true or false");
    return parent.at(key).get<bool>();
  }

  std::string string(const json& parent, const std::vector<std::string>& path, const char* key,
                     std::optional<std::string> fallback = std::nullopt) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) {
      if (fallback) return *fallback;
      fail(path, std::string("missing string '") + key + "'");
    }
    if (!parent.at(key).is_string()) fail(p, std::string("'") + key + "' must be a string");
    return parent.at(key).get<std::string>();
  }

  std::vector<double> vector(const json& parent, const std::vector<std::string>& path, const char* key) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) fail(path, std::string("missing array '") + key + "'");
    return numbers(parent.at(key), p);
  }

  std::vector<double> numbers(const json& arr, const std::vector<std::string>& path) const {
    if (!arr.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : arr) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) fail(path, "expected an array of finite numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  std::vector<std::vector<double>> matrix(const json& parent, const std::vector<std::string>& path,
                                          const char* key) const {
    auto p = path;
    p.push_back(key);
    if (!parent.contains(key)) fail(path, std::string("missing array '") + key + "'");
    const json& arr = parent.at(key);
    if (!arr.is_array()) fail(p, std::string("'") + key + "' must be an array of arrays");
    std::vector<std::vector<double>> out;
    for (const auto& row : arr) out.push_back(numbers(row, p));
    return out;
  }

 private:
  const std::string& text_;
  std::string source_;
};

ModelKind parseKind(const ConfigReader& r, const std::string& s) {
  if (s == "first-order") return ModelKind::FirstOrder;
  if (s == "second-order") return ModelKind::SecondOrder;
  r.fail({"model", "kind"}, "model.kind must be 'first-order' or 'second-order'");
}

void checkShape(const ConfigReader& r, const std::vector<std::string>& path,
                const std::vector<std::vector<double>>& rows, std::size_t n, std::size_t d, const char* what) {
  if (rows.size() != n) r.fail(path, std::string(what) + " needs one row per agent");
  for (const auto& row : rows) {
    if (row.size() != d) r.fail(path, std::string(what) + " rows need d entries");
  }
}

}  // namespace

RunConfig parseRunConfig(const std::string& text, const std::string& source) {
  ConfigReader r(text, source);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    r.failAtLine(r.lineAt(e.byte == 0 ? 0 : e.byte - 1), std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) r.failAtLine(1, "configuration must be a JSON object");
  r.allowOnly(root, {}, {"model", "history", "sim", "analysis", "seed", "output"});

  RunConfig cfg;
  const json& model = r.object(root, {}, "model");
  const std::vector<std::string> mp{"model"};
  r.allowOnly(model, mp, {"kind", "N", "d", "sigma", "tau", "influence"});
  cfg.model.kind = parseKind(r, r.string(model, mp, "kind", std::string("first-order")));
  cfg.model.agents = r.count(model, mp, "N");
  cfg.model.dim = r.count(model, mp, "d", 1);
  cfg.model.sigma = r.number(model, mp, "sigma");
  cfg.model.tau = r.number(model, mp, "tau");
  if (model.contains("influence")) {
    try {
      cfg.model.influence = model.at("influence").get<InfluenceFunction>();
    } catch (const ConfigError& e) {
      r.fail({"model", "influence"}, e.what());
    } catch (const json::exception& e) {
      r.fail({"model", "influence"}, e.what());
    }
  }
  try {
    cfg.model.validate();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.find("sigma") != std::string::npos) r.fail({"model", "sigma"}, what);
    if (what.find("agent") != std::string::npos) r.fail({"model", "N"}, what);
    if (what.find("dimension") != std::string::npos) r.fail({"model", "d"}, what);
    r.fail({"model"}, what);
  }
  const std::size_t n = cfg.model.agents;
  const std::size_t d = cfg.model.dim;
  const bool second = cfg.model.kind == ModelKind::SecondOrder;

  if (root.contains("history")) {
    const json& h = r.object(root, {}, "history");
    const std::vector<std::string> hp{"history"};
    HistorySpec& hs = cfg.history;
    hs.type = r.string(h, hp, "type");
    if (hs.type == "random-box") {
      r.allowOnly(h, hp, {"type", "low", "high", "velocityLow", "velocityHigh", "knots"});
      hs.box.low = r.number(h, hp, "low", -1.0);
      hs.box.high = r.number(h, hp, "high", 1.0);
      hs.box.velocityLow = r.number(h, hp, "velocityLow", -1.0);
      hs.box.velocityHigh = r.number(h, hp, "velocityHigh", 1.0);
      hs.box.knots = r.count(h, hp, "knots", 8);
      if (hs.box.low > hs.box.high) r.fail({"history", "low"}, "history.low must not exceed history.high");
      if (hs.box.velocityLow > hs.box.velocityHigh) {
        r.fail({"history", "velocityLow"}, "history.velocityLow must not exceed history.velocityHigh");
      }
      if (hs.box.knots < 2) r.fail({"history", "knots"}, "history.knots must be at least 2");
    } else if (hs.type == "constant") {
      r.allowOnly(h, hp, {"type", "positions", "velocities"});
      hs.positions = r.matrix(h, hp, "positions");
      checkShape(r, {"history", "positions"}, hs.positions, n, d, "history.positions");
      if (second) {
        hs.velocities = h.contains("velocities") ? r.matrix(h, hp, "velocities")
                                                 : std::vector<std::vector<double>>(n, std::vector<double>(d, 0.0));
        checkShape(r, {"history", "velocities"}, hs.velocities, n, d, "history.velocities");
        for (const auto& row : hs.velocities) {
          for (double v : row) {
            if (v != 0.0) {
              r.fail({"history", "velocities"},
                     "constant second-order history needs zero velocities; use the 'linear' preset");
            }
          }
        }
      } else if (h.contains("velocities")) {
        r.fail({"history", "velocities"}, "velocities only apply to second-order models");
      }
    } else if (hs.type == "preset") {
      hs.preset = r.string(h, hp, "name");
      if (hs.preset == "sine") {
        r.allowOnly(h, hp, {"type", "name", "amplitude", "frequency"});
        hs.amplitude = r.number(h, hp, "amplitude", 1.0);
        hs.frequency = r.number(h, hp, "frequency", 1.0);
      } else if (hs.preset == "linear") {
        r.allowOnly(h, hp, {"type", "name", "positions", "velocities"});
        hs.positions = r.matrix(h, hp, "positions");
        hs.velocities = r.matrix(h, hp, "velocities");
        checkShape(r, {"history", "positions"}, hs.positions, n, d, "history.positions");
        checkShape(r, {"history", "velocities"}, hs.velocities, n, d, "history.velocities");
      } else {
        r.fail({"history", "name"}, "unknown preset '" + hs.preset + "' (expected sine or linear)");
      }
    } else if (hs.type == "tabulated") {
      r.allowOnly(h, hp, {"type", "times", "values"});
      hs.times = r.vector(h, hp, "times");
      hs.values = r.matrix(h, hp, "values");
      const std::size_t width = n * (second ? 2 * d : d);
      if (hs.times.empty() || hs.times.size() != hs.values.size()) {
        r.fail({"history", "values"}, "history.times and history.values need the same nonzero length");
      }
      for (const auto& row : hs.values) {
        if (row.size() != width) r.fail({"history", "values"}, "each history.values row needs N * components entries");
      }
      for (std::size_t k = 1; k < hs.times.size(); ++k) {
        if (!(hs.times[k] > hs.times[k - 1])) r.fail({"history", "times"}, "history.times must increase strictly");
      }
      const double slack = 1e-12 * std::max(1.0, cfg.model.tau);
      if (hs.times.front() > -cfg.model.tau + slack || hs.times.back() < -slack) {
        r.fail({"history", "times"}, "history.times must cover [-tau, 0]");
      }
    } else {
      r.fail({"history", "type"}, "unknown history type '" + hs.type + "'");
    }
  }

  if (root.contains("sim")) {
    const json& s = r.object(root, {}, "sim");
    const std::vector<std::string> sp{"sim"};
    r.allowOnly(s, sp, {"h", "T", "outputEvery"});
    cfg.h = r.number(s, sp, "h", cfg.h);
    cfg.T = r.number(s, sp, "T", cfg.T);
    cfg.outputEvery = r.count(s, sp, "outputEvery", 1);
    if (!(cfg.h > 0.0)) r.fail({"sim", "h"}, "sim.h must be positive");
    if (!(cfg.T > 0.0)) r.fail({"sim", "T"}, "sim.T must be positive");
    if (cfg.outputEvery == 0) r.fail({"sim", "outputEvery"}, "sim.outputEvery must be at least 1");
    const double slack = 1.0 + 1e-12;
    if (cfg.model.sigma > 0.0) {
      if (cfg.h > 0.5 * cfg.model.sigma * slack) r.fail({"sim", "h"}, "sim.h must satisfy h <= sigma/2");
      if (cfg.model.tau > cfg.model.sigma && cfg.h > 0.5 * (cfg.model.tau - cfg.model.sigma) * slack) {
        r.fail({"sim", "h"}, "sim.h must satisfy h <= (tau - sigma)/2");
      }
    } else if (cfg.model.tau > 0.0 && cfg.h > cfg.model.tau * slack) {
      r.fail({"sim", "h"}, "sim.h must satisfy h <= tau when sigma = 0");
    }
  }

  if (root.contains("analysis")) {
    const json& a = r.object(root, {}, "analysis");
    const std::vector<std::string> ap{"analysis"};
    r.allowOnly(a, ap, {"beta", "certificate", "lemmaCheck"});
    if (a.contains("beta") && !a.at("beta").is_null()) {
      cfg.beta = r.number(a, ap, "beta");
      if (!(*cfg.beta > 0.0)) r.fail({"analysis", "beta"}, "analysis.beta must be positive");
    }
    cfg.certificate = r.flag(a, ap, "certificate", true);
    cfg.lemmaCheck = r.flag(a, ap, "lemmaCheck", true);
  }
  cfg.seed = r.count(root, {}, "seed", 0);
  cfg.output = r.string(root, {}, "output", cfg.output);
  return cfg;
}

RunConfig loadRunConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseRunConfig(buf.str(), path);
}

InitialHistory buildHistory(const RunConfig& cfg) {
  const ModelSpec& spec = cfg.model;
  const HistorySpec& hs = cfg.history;
  const std::size_t n = spec.agents;
  const std::size_t d = spec.dim;
  const bool second = spec.kind == ModelKind::SecondOrder;
  if (hs.type == "random-box") return randomHistory(spec, hs.box, cfg.seed);
  if (hs.type == "constant") {
    std::vector<std::vector<double>> states(n);
    for (std::size_t i = 0; i < n; ++i) {
      states[i] = hs.positions[i];
      if (second) states[i].insert(states[i].end(), d, 0.0);
    }
    return InitialHistory::constant(std::move(states));
  }
  if (hs.type == "preset" && hs.preset == "sine") {
    const double a = hs.amplitude;
    const double w = hs.frequency;
    const double total = static_cast<double>(n * d);
    return InitialHistory::analytic(n, second ? 2 * d : d, [=](std::size_t i, double t, std::span<double> out) {
      for (std::size_t c = 0; c < d; ++c) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i * d + c) / total;
        out[c] = a * std::sin(w * t + phase);
        if (second) out[d + c] = a * w * std::cos(w * t + phase);
      }
    });
  }
  if (hs.type == "preset" && hs.preset == "linear") {
    const auto p = hs.positions;
    const auto v = hs.velocities;
    return InitialHistory::analytic(n, second ? 2 * d : d, [=](std::size_t i, double t, std::span<double> out) {
      for (std::size_t c = 0; c < d; ++c) {
        out[c] = p[i][c] + v[i][c] * t;
        if (second) out[d + c] = v[i][c];
      }
    });
  }
  if (hs.type == "tabulated") return InitialHistory::tabulated(hs.times, hs.values, n);
  throw ConfigError("unsupported history type '" + hs.type + "'");
}

InfluenceFunction parseInfluenceShorthand(const std::string& text) {
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  const bool hasArg = colon != std::string::npos;
  double arg = 0.0;
  if (hasArg) {
    try {
      std::size_t used = 0;
      arg = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("cannot parse influence parameter in '" + text + "'");
    }
  }
  if (family == "constant") return InfluenceFunction::constant(hasArg ? arg : 1.0);
  if (family == "power" || family == "power-law") {
    if (!hasArg) throw ConfigError("power-law influence needs an exponent, e.g. power:0.5");
    return InfluenceFunction::powerLaw(arg);
  }
  throw ConfigError("unknown influence '" + text + "' (expected constant[:c] or power:alpha)");
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

void writeFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void ensureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

template <typename J>
std::string dumpJson(const J& j) {
  return j.dump(2) + "\n";
}

double defaultBeta(double tau) {
  if (tau == 0.0) return 1.0;
  if (2.0 * std::exp(-2.0 * tau) - 1.0 > 0.0) return betaMin(tau);
  return 1.0;
}

int cmdSimulate(const std::string& configPath, const std::optional<std::string>& outDir,
                const std::optional<std::uint64_t>& seed, bool trace, std::ostream& out) {
  RunConfig cfg = loadRunConfig(configPath);
  if (outDir) cfg.output = *outDir;
  if (seed) cfg.seed = *seed;
  const ModelSpec& spec = cfg.model;
  const bool second = spec.kind == ModelKind::SecondOrder;

  const InitialHistory history = buildHistory(cfg);
  const ValidationReport valid = validateInitialData(spec, history);
  if (!valid.valid) throw ConfigError(configPath + ": invalid initial history: " + valid.message);

  const Trajectory traj = simulate(spec, history, cfg.h, cfg.T);
  const fs::path dir(cfg.output);
  ensureDirectory(dir);

  {
    std::ostringstream os;
    traj.writeCsv(os, cfg.outputEvery);
    writeFile(dir / "trajectory.csv", os.str());
  }

  const double deltaX0 = initialSpread(traj, Component::Position);
  const double deltaV0 = second ? initialSpread(traj, Component::Velocity) : 0.0;
  const double dx0 = positionDiameter(spec, traj.knotState(0));

  std::optional<Certificate> cert;
  if (cfg.certificate) {
    ScanOptions opt;
    opt.betaOverride = cfg.beta;
    opt.trace = trace;
    cert = second ? certifyFlocking(spec.sigma, spec.tau, deltaX0, deltaV0, spec.influence, opt, dx0)
                  : certifyConsensus(spec.sigma, spec.tau, deltaX0, spec.influence, opt);
    writeFile(dir / "certificate.json", dumpJson(toJson(*cert)));
  }
  double beta = cfg.beta.value_or(defaultBeta(spec.tau));
  if (!cfg.beta && cert && cert->beta > 0.0) beta = cert->beta;

  const auto dx = sampleDiameter(traj, Component::Position, 1);
  const Component main = second ? Component::Velocity : Component::Position;
  const LyapunovFunctional functional(traj, beta, main);
  auto thin = [&](const ObservableSeries& s) {
    if (cfg.outputEvery == 1) return s;
    ObservableSeries t;
    t.label = s.label;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      if (k % cfg.outputEvery == 0 || k + 1 == s.times.size()) {
        t.times.push_back(s.times[k]);
        t.values.push_back(s.values[k]);
      }
    }
    return t;
  };
  auto emit = [&](const ObservableSeries& s, const std::string& name) {
    std::ostringstream os;
    writeSeriesCsv(os, s);
    writeFile(dir / name, os.str());
  };
  emit(thin(dx), "d_x.csv");
  std::optional<ObservableSeries> dv;
  if (second) {
    dv = sampleDiameter(traj, Component::Velocity, 1);
    emit(thin(*dv), "d_v.csv");
  }
  emit(sampleFunctional(functional, traj, cfg.outputEvery), second ? "G.csv" : "F.csv");
  emit(sampleMinWeight(traj, cfg.outputEvery), "min_weight.csv");
  {
    ObservableSeries speed = sampleMaxRate(traj, Component::Position, cfg.outputEvery);
    speed.label = "max_speed";
    emit(speed, "max_speed.csv");
  }

  ordered summary;
  summary["kind"] = second ? "second-order" : "first-order";
  summary["agents"] = spec.agents;
  summary["dim"] = spec.dim;
  summary["sigma"] = spec.sigma;
  summary["tau"] = spec.tau;
  summary["h"] = traj.step();
  summary["T"] = traj.horizon();
  summary["seed"] = cfg.seed;
  summary["initialDiameter"] = dx.values.front();
  summary["finalDiameter"] = dx.values.back();
  summary["maxDiameter"] = *std::max_element(dx.values.begin(), dx.values.end());
  if (second) {
    summary["initialVelocityDiameter"] = dv->values.front();
    summary["finalVelocityDiameter"] = dv->values.back();
  }
  summary["deltaX0"] = deltaX0;
  if (second) summary["deltaV0"] = deltaV0;
  summary["beta"] = beta;
  try {
    summary["fittedRate"] = decayRateFit(second ? *dv : dx);
  } catch (const DomainError&) {
    summary["fittedRate"] = nullptr;
  }

  if (cfg.lemmaCheck) {
    const LemmaReport report = verifyLemmaInequalities(traj, beta);
    ordered checks = ordered::object();
    for (const auto& c : report.checks) {
      checks[c.name] = {{"maxViolation", c.maxViolation},
                       {"worstTime", c.worstTime},
                       {"maxRatio", c.maxRatio},
                       {"samples", c.samples}};
    }
    summary["lemmaChecks"] = checks;
  }

  if (cert) {
    summary["verdict"] = toString(cert->verdict);
    if (cert->certified()) {
      std::size_t violations = 0;
      const auto& series = second ? *dv : dx;
      const double onset = cert->envelope.onset;
      for (std::size_t k = 0; k < series.times.size(); ++k) {
        const double t = series.times[k];
        if (t < onset) continue;
        const double bound = cert->envelope.amplitude * std::exp(-cert->envelope.rate * (t - onset)) * (1.0 + 1e-3);
        if (series.values[k] > bound) ++violations;
        if (second && dx.values[k] > cert->positionExcursion * (1.0 + 1e-3)) ++violations;
      }
      summary["envelopeViolations"] = violations;
    } else {
      summary["envelopeViolations"] = nullptr;
    }
  }
  writeFile(dir / "summary.json", dumpJson(summary));
  out << "wrote " << dir.string() << " (final diameter " << detail::shortest(dx.values.back()) << ")\n";
  return kExitOk;
}

struct CertifyArgs {
  std::optional<double> sigma;
  std::optional<double> tau;
  std::optional<double> deltaX;
  std::optional<double> deltaV;
  std::optional<double> beta;
  std::string psi;
  std::string psiJson;
  std::string config;
  std::string out;
  bool trace = false;
};

int cmdCertify(CertificateKind kind, const CertifyArgs& a, std::ostream& out) {
  ModelSpec spec;
  double deltaX = 0.0, deltaV = 0.0, dx0 = -1.0;
  bool haveSpread = false;
  if (!a.config.empty()) {
    const RunConfig cfg = loadRunConfig(a.config);
    spec = cfg.model;
    const InitialHistory history = buildHistory(cfg);
    const HermiteTable sampled = sampleHistory(spec, history, cfg.h);
    deltaX = initialSpread(spec, sampled, Component::Position);
    if (spec.kind == ModelKind::SecondOrder) {
      deltaV = initialSpread(spec, sampled, Component::Velocity);
      dx0 = positionDiameter(spec, sampled.value(sampled.size() - 1));
    }
    haveSpread = true;
  }
  if (a.sigma) spec.sigma = *a.sigma;
  if (a.tau) spec.tau = *a.tau;
  if (!a.config.empty() || a.sigma || a.tau) {
    if (!a.sigma && a.config.empty()) throw ConfigError("--sigma is required");
    if (!a.tau && a.config.empty()) throw ConfigError("--tau is required");
  } else {
    throw ConfigError("--sigma and --tau (or --config) are required");
  }
  if (!a.psiJson.empty()) {
    try {
      spec.influence = json::parse(a.psiJson).get<InfluenceFunction>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("--psi-json: ") + e.what());
    }
  } else if (!a.psi.empty()) {
    spec.influence = parseInfluenceShorthand(a.psi);
  }
  if (a.deltaX) deltaX = *a.deltaX;
  else if (!haveSpread) throw ConfigError("--delta-x is required");
  if (kind == CertificateKind::Flocking) {
    if (a.deltaV) deltaV = *a.deltaV;
    else if (!haveSpread) throw ConfigError("--delta-v is required");
  }
  ScanOptions opt;
  opt.trace = a.trace;
  opt.betaOverride = a.beta;
  const Certificate c = kind == CertificateKind::Consensus
                            ? certifyConsensus(spec.sigma, spec.tau, deltaX, spec.influence, opt)
                            : certifyFlocking(spec.sigma, spec.tau, deltaX, deltaV, spec.influence, opt, dx0);
  const std::string text = dumpJson(toJson(c));
  out << text;
  if (!a.out.empty()) {
    ensureDirectory(a.out);
    writeFile(fs::path(a.out) / "certificate.json", text);
  }
  switch (c.verdict) {
    case Verdict::Certified:
      return kExitOk;
    case Verdict::NotCertified:
      return kExitNotCertified;
    case Verdict::OutsideHypotheses:
      return kExitInput;
  }
  return kExitInput;
}

int cmdHalanay(double alpha, double gamma, double eta, double tau, std::ostream& out) {
  const double g = halanayGamma(alpha, gamma, eta, tau);
  out << detail::shortest(g) << ' ' << detail::shortest(halanayResidual(g, alpha, gamma, eta, tau)) << '\n';
  return kExitOk;
}

int cmdHopf(int mMax, std::size_t omegaPoints, std::size_t resolution, double tauMax, double sigmaMax,
            const std::string& outDir, std::ostream& out) {
  if (mMax < 0) throw ConfigError("--m-max must be nonnegative");
  if (omegaPoints == 0) throw ConfigError("--omega-points must be positive");
  if (resolution == 0) throw ConfigError("--resolution must be positive");
  const auto omegas = defaultOmegaGrid(omegaPoints);
  const StabilityGrid grid = stabilityGrid(tauMax, sigmaMax, resolution, omegas);
  const fs::path dir(outDir);
  ensureDirectory(dir);
  for (int m = 0; m <= mMax; ++m) {
    const auto curve = hopfCurve(m, omegas);
    std::ostringstream os;
    writeCurveCsv(os, curve);
    const std::string name = "hopf_m" + std::to_string(m) + ".csv";
    writeFile(dir / name, os.str());
    out << name << ": " << curve.size() << " points\n";
  }
  std::ostringstream os;
  writeGridCsv(os, grid);
  writeFile(dir / "stability_grid.csv", os.str());
  out << "stability_grid.csv: " << grid.cells.size() << " cells\n";
  return kExitOk;
}

int cmdToy(double tau, double sigma, double h, double T, const std::string& history, const std::string& outDir,
           std::ostream& out) {
  std::function<double(double)> u;
  if (history == "constant") {
    u = [](double) { return 1.0; };
  } else if (history == "exp") {
    u = [](double t) { return std::exp(t); };
  } else if (history == "cos") {
    u = [](double t) { return std::cos(t); };
  } else {
    throw ConfigError("--history must be constant, exp or cos");
  }
  if (tau < 0.0 || sigma < 0.0) throw ConfigError("delays must be nonnegative");
  const Trajectory traj = simulateToy(tau, sigma, u, h, T);
  if (!outDir.empty()) {
    ensureDirectory(outDir);
    std::ostringstream os;
    os << "t,u\n";
    for (std::size_t k = 0; k < traj.knotCount(); ++k) {
      const auto y = traj.knotState(k);
      os << detail::fullPrecision(traj.knotTime(k)) << ',' << detail::fullPrecision(y[0] - y[1]) << '\n';
    }
    writeFile(fs::path(outDir) / "toy.csv", os.str());
  }
  out << "u(" << detail::shortest(traj.horizon()) << ") = " << detail::shortest(toyValue(traj, traj.horizon())) << '\n';
  return kExitOk;
}

}  // namespace

int runCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Delayed consensus and flocking laboratory"};
  app.require_subcommand(1);

  std::string configPath, outDir;
  std::uint64_t seed = 0;
  bool trace = false;
  auto* sim = app.add_subcommand("simulate", "Integrate a configured model and export observables");
  sim->add_option("--config", configPath, "Run configuration (JSON)")->required();
  auto* simOut = sim->add_option("--out", outDir, "Output directory (overrides the config)");
  auto* simSeed = sim->add_option("--seed", seed, "Random seed (overrides the config)");
  sim->add_flag("--trace", trace, "Include the parameter scan in certificate.json");

  CertifyArgs ca;
  double sigmaArg = 0, tauArg = 0, dxArg = 0, dvArg = 0, betaArg = 0;
  auto addCertifyOptions = [&](CLI::App* sub, bool flocking) {
    sub->add_option("--sigma", sigmaArg, "Reaction delay");
    sub->add_option("--tau", tauArg, "Total delay");
    sub->add_option("--delta-x", dxArg, "Initial position spread");
    if (flocking) sub->add_option("--delta-v", dvArg, "Initial velocity spread");
    sub->add_option("--beta", betaArg, "Use this beta instead of scanning");
    sub->add_option("--psi", ca.psi, "Influence: constant[:c] or power:alpha");
    sub->add_option("--psi-json", ca.psiJson, "Influence as JSON {family, params}");
    sub->add_option("--config", ca.config, "Take delays, influence and spreads from a run configuration");
    sub->add_option("--out", ca.out, "Directory for certificate.json");
    sub->add_flag("--trace", ca.trace, "Include the parameter scan");
  };
  auto* cons = app.add_subcommand("certify-consensus", "Check the consensus condition");
  addCertifyOptions(cons, false);
  auto* flock = app.add_subcommand("certify-flocking", "Check the flocking condition");
  addCertifyOptions(flock, true);

  double ha = 0, hg = 0, he = 0, ht = 0;
  auto* hal = app.add_subcommand("halanay", "Solve for the guaranteed decay rate");
  hal->add_option("alpha", ha)->required();
  hal->add_option("gamma", hg)->required();
  hal->add_option("eta", he)->required();
  hal->add_option("tau", ht)->required();

  int mMax = 0;
  std::size_t omegaPoints = 2000, resolution = 100;
  double tauMax = 4.0, sigmaMax = 4.0;
  std::string hopfOut = ".";
  auto* hopf = app.add_subcommand("hopf", "Pure-imaginary-root curves and stability grid of the toy model");
  hopf->add_option("--m-max", mMax, "Largest branch index");
  hopf->add_option("--omega-points", omegaPoints, "Frequencies in (0, 2]");
  hopf->add_option("--resolution", resolution, "Grid cells per axis");
  hopf->add_option("--tau-max", tauMax, "Grid extent in tau");
  hopf->add_option("--sigma-max", sigmaMax, "Grid extent in sigma");
  hopf->add_option("--out", hopfOut, "Output directory");

  double toyTau = 0.4, toySigma = 0.3, toyH = 1e-3, toyT = 50.0;
  std::string toyHistoryName = "constant", toyOut;
  auto* toy = app.add_subcommand("toy-simulate", "Simulate u' = -u(t - tau) - u(t - sigma)");
  toy->add_option("--tau", toyTau, "First delay");
  toy->add_option("--sigma", toySigma, "Second delay");
  toy->add_option("--step", toyH, "Step size");
  toy->add_option("--horizon", toyT, "Horizon");
  toy->add_option("--history", toyHistoryName, "constant | exp | cos");
  toy->add_option("--out", toyOut, "Directory for toy.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    if (*sim) {
      return cmdSimulate(configPath, simOut->count() ? std::optional<std::string>(outDir) : std::nullopt,
                         simSeed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, trace, out);
    }
    for (auto* sub : {cons, flock}) {
      if (!*sub) continue;
      if (sub->count("--sigma")) ca.sigma = sigmaArg;
      if (sub->count("--tau")) ca.tau = tauArg;
      if (sub->count("--delta-x")) ca.deltaX = dxArg;
      if (sub == flock && sub->count("--delta-v")) ca.deltaV = dvArg;
      if (sub->count("--beta")) ca.beta = betaArg;
      return cmdCertify(sub == cons ? CertificateKind::Consensus : CertificateKind::Flocking, ca, out);
    }
    if (*hal) return cmdHalanay(ha, hg, he, ht, out);
    if (*hopf) return cmdHopf(mMax, omegaPoints, resolution, tauMax, sigmaMax, hopfOut, out);
    if (*toy) return cmdToy(toyTau, toySigma, toyH, toyT, toyHistoryName, toyOut, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const HypothesisError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IntegrationError& e) {
    err << "integration failed at t = " << e.time() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConsistencyError& e) {
    err << "internal consistency failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace delayflock
