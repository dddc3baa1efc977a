#include "delayflock/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "delayflock/errors.hpp"
#include "delayflock/parallel.hpp"

namespace delayflock {

namespace {

constexpr double kZTolerance = 1e-10;

void requirePositiveSigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    std::ostringstream os;
    os << "amplification constants need sigma > 0, got " << sigma;
    throw DomainError(os.str());
  }
}

// 1 - (1 + 2 tau) e^{-2 tau}, accurate for small tau.
double memoryWeight(double tau) {
  return -std::expm1(-2.0 * tau) - 2.0 * tau * std::exp(-2.0 * tau);
}

}  // namespace

double zClosedForm(double sigma, std::size_t K) {
  requirePositiveSigma(sigma);
  const double root = std::sqrt(sigma * (1.0 + sigma));
  const double up = (1.0 + sigma) + root;
  const double down = (1.0 + sigma) - root;
  const double p = static_cast<double>(K + 1);
  return (std::pow(up, p) - std::pow(down, p)) / (2.0 * root);
}

std::vector<double> zSeq(double sigma, std::size_t K) {
  requirePositiveSigma(sigma);
  std::vector<double> z(K + 1);
  z[0] = 1.0;
  if (K >= 1) z[1] = 2.0 * (1.0 + sigma);
  for (std::size_t k = 2; k <= K; ++k) z[k] = (1.0 + sigma) * (2.0 * z[k - 1] - z[k - 2]);
  for (std::size_t k = 0; k <= K; ++k) {
    const double closed = zClosedForm(sigma, k);
    if (!(std::abs(closed - z[k]) <= kZTolerance * std::abs(z[k]))) {
      std::ostringstream os;
      os << "recurrence and closed form disagree at k = " << k << ": " << z[k] << " vs " << closed;
      throw ConsistencyError(os.str());
    }
  }
  return z;
}

std::size_t windowCount(double sigma, double tau) {
  requirePositiveSigma(sigma);
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  const double r = 2.0 * tau / sigma;
  const double nearest = std::round(r);
  if (std::abs(r - nearest) <= 1e-12 * std::max(1.0, r)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(r));
}

double calZ(double sigma, double tau, std::size_t K, double beta) {
  if (K < 1) throw DomainError("calZ needs K >= 1");
  if (!(beta >= 0.0)) throw DomainError("calZ needs beta >= 0");
  const auto z = zSeq(sigma, K);
  return z[K] + z[K - 1] * beta * memoryWeight(tau);
}

double calW(double sigma, std::size_t K) {
  if (K < 1) throw DomainError("calW needs K >= 1");
  const auto z = zSeq(sigma, K);
  const double formula = z[K] - (1.0 + sigma) * (z[K - 1] + 1.0);
  double sum = 0.0;
  for (std::size_t k = 1; k + 1 <= K; ++k) sum += z[k];
  const double series = sigma * sum;
  if (!(std::abs(formula - series) <= kZTolerance * std::max(1.0, z[K]))) {
    std::ostringstream os;
    os << "calW: closed expression " << formula << " disagrees with sigma * sum Z^k = " << series;
    throw ConsistencyError(os.str());
  }
  return formula;
}

// ---------------------------------------------------------------------------

double halanayResidual(double x, double alpha, double gamma, double eta, double tau) {
  const double e = std::exp(x * tau);
  return e * (e * alpha + gamma) + x - eta;
}

double halanayGamma(double alpha, double gamma, double eta, double tau) {
  if (!std::isfinite(alpha) || !std::isfinite(gamma) || !std::isfinite(eta) || !std::isfinite(tau)) {
    throw DomainError("Halanay parameters must be finite");
  }
  if (alpha < 0.0 || gamma < 0.0 || tau < 0.0) throw DomainError("alpha, gamma and tau must be nonnegative");
  if (!(alpha + gamma < eta)) {
    std::ostringstream os;
    os << "Halanay equation needs alpha + gamma < eta (alpha + gamma = " << alpha + gamma << ", eta = " << eta << ")";
    throw HypothesisError(os.str());
  }
  if (tau == 0.0) return eta - alpha - gamma;

  auto f = [&](double x) { return halanayResidual(x, alpha, gamma, eta, tau); };
  double lo = 0.0;
  double hi = eta;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    (fm < 0.0 ? lo : hi) = mid;
  }
  double x = std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
  // one Newton step from the bracketed point
  const double e = std::exp(x * tau);
  const double slope = 2.0 * alpha * tau * e * e + gamma * tau * e + 1.0;
  const double polished = x - f(x) / slope;
  if (polished > 0.0 && polished <= eta && std::abs(f(polished)) < std::abs(f(x))) x = polished;
  return x;
}

double lambertW(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("lambertW needs a finite s >= 0");
  if (s == 0.0) return 0.0;
  double w = std::log1p(s);
  for (int it = 0; it < 100; ++it) {
    const double ew = std::exp(w);
    const double step = (w * ew - s) / (ew * (w + 1.0));
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) break;
  }
  return w;
}

double betaMin(double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("betaMin needs a finite tau >= 0");
  const double denom = 2.0 * std::exp(-2.0 * tau) - 1.0;
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "no admissible beta: tau = " << tau << " >= ln(2)/2";
    throw HypothesisError(os.str());
  }
  if (tau == 0.0) return 0.0;
  double b = 4.0 * tau / denom;
  while (!(4.0 * tau <= b * denom)) b = std::nextafter(b, std::numeric_limits<double>::infinity());
  return b;
}

double linearDelayThreshold() {
  return 0.5 * (1.0 - lambertW(std::numbers::e / 2.0));
}

// ---------------------------------------------------------------------------

namespace {

bool betaAdmissible(double tau, double beta) {
  return beta > 0.0 && 4.0 * tau <= beta * (2.0 * std::exp(-2.0 * tau) - 1.0);
}

void validateDelays(double sigma, double tau) {
  if (!std::isfinite(sigma) || !std::isfinite(tau)) throw ConfigError("delays must be finite");
  if (sigma < 0.0) throw ConfigError("sigma must be nonnegative");
  if (sigma > tau) throw ConfigError("sigma must not exceed tau");
}

void validateSpread(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be a finite nonnegative number");
  }
}

// Fills the delay-dependent constants; returns false when outside the
// certified regime (sigma = 0 < tau).
bool prepare(Certificate& c) {
  if (c.sigma == 0.0 && c.tau > 0.0) {
    c.verdict = Verdict::OutsideHypotheses;
    c.reason = "sigma = 0 < tau: the window count ceil(2 tau / sigma) is undefined; outside the certified regime";
    return false;
  }
  if (c.sigma == 0.0) {
    c.K = 0;
    c.zK = 1.0;
    c.zKm1 = 0.0;
    c.calW = 0.0;
  } else {
    c.K = windowCount(c.sigma, c.tau);
    const auto z = zSeq(c.sigma, c.K);
    c.zK = z[c.K];
    c.zKm1 = c.K >= 1 ? z[c.K - 1] : 0.0;
    c.calW = c.K >= 1 ? calW(c.sigma, c.K) : 0.0;
  }
  return true;
}

double calZFor(const Certificate& c, double beta) {
  return c.zK + c.zKm1 * beta * memoryWeight(c.tau);
}

std::vector<double> betaGrid(double tau, const ScanOptions& opt) {
  if (opt.betaOverride) return {*opt.betaOverride};
  const double lo = tau == 0.0 ? 1.0 : betaMin(tau);
  const double hi = lo * opt.betaSpan;
  const std::size_t n = std::max<std::size_t>(opt.betaPoints, 1);
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
  }
  g.front() = lo;
  return g;
}

bool noAdmissibleBeta(Certificate& c) {
  if (2.0 * std::exp(-2.0 * c.tau) - 1.0 > 0.0) return false;
  c.verdict = Verdict::NotCertified;
  c.reason = "no admissible β: tau >= ln(2)/2";
  return true;
}

}  // namespace

Certificate certifyConsensus(double sigma, double tau, double deltaX0, const InfluenceFunction& psi,
                             const ScanOptions& options) {
  validateDelays(sigma, tau);
  validateSpread(deltaX0, "deltaX0");
  Certificate c;
  c.kind = CertificateKind::Consensus;
  c.sigma = sigma;
  c.tau = tau;
  c.deltaX0 = deltaX0;
  c.influence = psi;
  c.alpha = 4.0 * tau;
  if (!prepare(c) || noAdmissibleBeta(c)) return c;

  const InfluenceFunction rpsi = rearrange(psi);
  const auto grid = betaGrid(tau, options);
  std::vector<ScanEntry> scan(grid.size());
  parallelFor(grid.size(), [&](std::size_t k) {
    const double beta = grid[k];
    ScanEntry e;
    e.beta = beta;
    const double lhs = 4.0 * tau + beta * (-std::expm1(-2.0 * tau));
    const double arg = (1.0 + tau - sigma + std::exp(2.0 * tau) / beta) * calZFor(c, beta) * deltaX0;
    e.margin = lhs - rpsi(arg);
    e.feasible = betaAdmissible(tau, beta) && e.margin < 0.0;
    scan[k] = e;
  });

  const ScanEntry* chosen = nullptr;
  for (const auto& e : scan) {
    if (e.feasible) {
      chosen = &e;
      break;
    }
  }
  if (options.trace) c.trace = scan;
  if (!chosen) {
    const auto best = std::min_element(scan.begin(), scan.end(),
                                       [](const ScanEntry& a, const ScanEntry& b) { return a.margin < b.margin; });
    c.beta = best->beta;
    c.margin = best->margin;
    c.calZ = calZFor(c, c.beta);
    c.gamma = c.beta * (-std::expm1(-2.0 * tau));
    c.verdict = Verdict::NotCertified;
    c.reason = options.betaOverride && !betaAdmissible(tau, c.beta)
                   ? "beta override violates 4 tau <= beta (2 e^{-2 tau} - 1)"
                   : "condition fails for every beta on the grid";
    return c;
  }
  c.beta = chosen->beta;
  c.margin = chosen->margin;
  c.calZ = calZFor(c, c.beta);
  c.gamma = c.beta * (-std::expm1(-2.0 * tau));
  c.eta = rpsi((1.0 + tau - sigma + std::exp(2.0 * tau) / c.beta) * c.calZ * deltaX0);
  c.rate = halanayGamma(c.alpha, c.gamma, c.eta, tau);
  c.verdict = Verdict::Certified;
  c.reason = "condition holds";
  c.envelope = {c.calZ * deltaX0, c.rate, 2.0 * tau};
  return c;
}

Certificate certifyFlocking(double sigma, double tau, double deltaX0, double deltaV0, const InfluenceFunction& psi,
                            const ScanOptions& options, double positionDiameter0) {
  validateDelays(sigma, tau);
  validateSpread(deltaX0, "deltaX0");
  validateSpread(deltaV0, "deltaV0");
  Certificate c;
  c.kind = CertificateKind::Flocking;
  c.sigma = sigma;
  c.tau = tau;
  c.deltaX0 = deltaX0;
  c.deltaV0 = deltaV0;
  c.influence = psi;
  c.alpha = 4.0 * tau;
  if (!prepare(c) || noAdmissibleBeta(c)) return c;

  const InfluenceFunction rpsi = rearrange(psi);
  const double cMax = rpsi(deltaX0);
  const auto betas = betaGrid(tau, options);
  const std::size_t nc = std::max<std::size_t>(options.cPoints, 2);
  std::vector<double> cs;
  if (cMax > options.cMin) {
    for (std::size_t k = 0; k < nc; ++k) {
      cs.push_back(options.cMin * std::pow(cMax / options.cMin, static_cast<double>(k) / static_cast<double>(nc - 1)));
    }
    cs.back() = cMax;
  }

  const double gammaUnit = -std::expm1(-2.0 * tau);
  auto evaluate = [&](double beta, double C) {
    ScanEntry e;
    e.beta = beta;
    e.c = C;
    const double ect = std::exp(C * tau);
    const double lhs = ect * (4.0 * tau * ect + beta * gammaUnit) + C;
    const double cz = calZFor(c, beta);
    const double arg = deltaX0 + c.calW * deltaV0 +
                       (ect / C) * (1.0 + std::exp(2.0 * tau + C * sigma) / beta + ect * (tau - sigma)) * cz * deltaV0;
    e.margin = lhs - rpsi(arg);
    e.feasible = betaAdmissible(tau, beta) && e.margin <= 0.0;
    return e;
  };

  std::vector<ScanEntry> scan(betas.size() * cs.size());
  parallelFor(betas.size(), [&](std::size_t b) {
    for (std::size_t k = 0; k < cs.size(); ++k) scan[b * cs.size() + k] = evaluate(betas[b], cs[k]);
  });
  if (options.trace) c.trace = scan;

  // smallest feasible beta, then the largest feasible C at that beta
  const ScanEntry* chosen = nullptr;
  for (std::size_t b = 0; b < betas.size() && !chosen; ++b) {
    for (std::size_t k = cs.size(); k-- > 0;) {
      if (scan[b * cs.size() + k].feasible) {
        chosen = &scan[b * cs.size() + k];
        break;
      }
    }
  }
  if (!chosen) {
    c.verdict = Verdict::NotCertified;
    if (scan.empty()) {
      c.beta = betas.front();
      c.reason = "no positive C below psi(deltaX0)";
      c.calZ = calZFor(c, c.beta);
      return c;
    }
    const auto best = std::min_element(scan.begin(), scan.end(),
                                       [](const ScanEntry& a, const ScanEntry& b) { return a.margin < b.margin; });
    c.beta = best->beta;
    c.c = best->c;
    c.margin = best->margin;
    c.calZ = calZFor(c, c.beta);
    c.gamma = c.beta * gammaUnit;
    c.reason = options.betaOverride && !betaAdmissible(tau, c.beta)
                   ? "beta override violates 4 tau <= beta (2 e^{-2 tau} - 1)"
                   : "condition fails for every (beta, C) on the grid";
    return c;
  }
  c.beta = chosen->beta;
  c.c = chosen->c;
  c.rate = chosen->c;
  c.margin = chosen->margin;
  c.calZ = calZFor(c, c.beta);
  c.gamma = c.beta * gammaUnit;
  c.verdict = Verdict::Certified;
  c.reason = "condition holds";
  c.envelope = {c.calZ * deltaV0, c.c, 2.0 * tau};
  const double dx0 = positionDiameter0 >= 0.0 ? positionDiameter0 : deltaX0;
  c.positionExcursion = dx0 + std::exp(2.0 * c.c * tau) * c.calZ * deltaV0 / c.c;
  return c;
}

std::string toString(Verdict v) {
  switch (v) {
    case Verdict::Certified:
      return "certified";
    case Verdict::NotCertified:
      return "not-certified";
    case Verdict::OutsideHypotheses:
      return "outside-hypotheses";
  }
  return "unknown";
}

nlohmann::json toJson(const Certificate& c) {
  using nlohmann::json;
  const bool flock = c.kind == CertificateKind::Flocking;
  json inputs = {{"sigma", c.sigma}, {"tau", c.tau}, {"deltaX0", c.deltaX0}, {"influence", c.influence}};
  if (flock) inputs["deltaV0"] = c.deltaV0;
  json chosen = {{"beta", c.beta}};
  if (flock) chosen["C"] = c.c;
  json derived = {{"K", c.K},       {"Z_K", c.zK},       {"Z_Km1", c.zKm1}, {"calZ", c.calZ},
                  {"alpha", c.alpha}, {"gamma", c.gamma}};
  if (flock) {
    derived["calW"] = c.calW;
  } else {
    derived["eta"] = c.eta;
    derived["Gamma"] = c.rate;
  }
  json out = {{"kind", flock ? "flocking" : "consensus"},
              {"inputs", inputs},
              {"chosen", chosen},
              {"derived", derived},
              {"verdict", toString(c.verdict)},
              {"reason", c.reason},
              {"margin", c.margin}};
  if (c.certified()) {
    out["envelope"] = {{"amplitude", c.envelope.amplitude}, {"rate", c.envelope.rate}, {"onset", c.envelope.onset}};
    if (flock) out["positionExcursion"] = c.positionExcursion;
  }
  if (!c.trace.empty()) {
    json tr = json::array();
    for (const auto& e : c.trace) {
      json row = {{"beta", e.beta}, {"margin", e.margin}, {"feasible", e.feasible}};
      if (flock) row["C"] = e.c;
      tr.push_back(row);
    }
    out["trace"] = tr;
  }
  return out;
}

}  // namespace delayflock
