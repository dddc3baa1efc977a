#include "delayflock/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "delayflock/errors.hpp"
#include "delayflock/models.hpp"
#include "numfmt.hpp"

namespace delayflock {

double charResidual(std::complex<double> lambda, double tau, double sigma) {
  return std::abs(lambda + std::exp(-lambda * tau) + std::exp(-lambda * sigma));
}

double charResidual(double re, double im, double tau, double sigma) {
  return charResidual(std::complex<double>(re, im), tau, sigma);
}

double HopfResiduals::max() const {
  return std::max({std::abs(phase), std::abs(sineSigma), std::abs(sineTau), std::abs(cosSum), std::abs(sinSum)});
}

HopfResiduals hopfResiduals(const HopfPoint& p) {
  const double w = p.omega;
  HopfResiduals r;
  r.phase = (p.tau + p.sigma) * w - (2.0 * p.m + 1.0) * std::numbers::pi;
  r.sineSigma = 2.0 * std::sin(w * p.sigma) - w;
  r.sineTau = 2.0 * std::sin(w * p.tau) - w;
  r.cosSum = std::cos(w * p.tau) + std::cos(w * p.sigma);
  r.sinSum = std::sin(w * p.tau) + std::sin(w * p.sigma) - w;
  return r;
}

std::vector<double> defaultOmegaGrid(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 1; k <= n; ++k) g[k - 1] = 2.0 * static_cast<double>(k) / static_cast<double>(n);
  if (n > 0) g.back() = 2.0;
  return g;
}

std::vector<HopfPoint> hopfCurve(int m, std::span<const double> omegas, const HopfOptions& options) {
  if (m < 0) throw ConfigError("branch index m must be nonnegative");
  const double pi = std::numbers::pi;
  std::vector<HopfPoint> out;
  for (double w : omegas) {
    if (!(w > 0.0) || w > 2.0) continue;
    const double base = std::asin(0.5 * w);
    std::vector<double> sigmas;
    for (int k = 0; k <= options.maxBranch; ++k) {
      sigmas.push_back((base + 2.0 * pi * k) / w);
      sigmas.push_back((pi - base + 2.0 * pi * k) / w);
    }
    std::sort(sigmas.begin(), sigmas.end());
    sigmas.erase(std::unique(sigmas.begin(), sigmas.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, a); }),
                 sigmas.end());
    for (double s : sigmas) {
      HopfPoint p{(2.0 * m + 1.0) * pi / w - s, s, w, m};
      if (!(p.sigma > 0.0) || !(p.tau > 0.0)) continue;
      if (options.enforceOrder && p.sigma > p.tau * (1.0 + 1e-12)) continue;
      if (!(std::min(p.sigma, p.tau) > 0.5)) continue;
      if (hopfResiduals(p).max() > options.tolerance) continue;
      out.push_back(p);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const HopfPoint& a, const HopfPoint& b) {
    return a.omega != b.omega ? a.omega < b.omega : a.sigma < b.sigma;
  });
  return out;
}

bool guaranteedStable(double tau, double sigma) {
  return std::min(sigma, tau) <= 0.5;
}

std::string toString(StabilityClass c) {
  switch (c) {
    case StabilityClass::GuaranteedStable:
      return "guaranteed-stable";
    case StabilityClass::HopfBoundary:
      return "hopf-boundary";
    case StabilityClass::Unknown:
      return "unknown";
  }
  return "unknown";
}

StabilityGrid stabilityGrid(double tauMax, double sigmaMax, std::size_t resolution, std::span<const double> omegas) {
  if (!(tauMax > 0.0) || !(sigmaMax > 0.0) || !std::isfinite(tauMax) || !std::isfinite(sigmaMax)) {
    throw ConfigError("stability grid ranges must be positive");
  }
  if (resolution == 0) throw ConfigError("stability grid resolution must be positive");
  StabilityGrid g;
  g.tauMax = tauMax;
  g.sigmaMax = sigmaMax;
  g.resolution = resolution;
  const double dTau = tauMax / static_cast<double>(resolution);
  const double dSigma = sigmaMax / static_cast<double>(resolution);

  std::vector<char> boundary(resolution * resolution, 0);
  HopfOptions both;
  both.enforceOrder = false;
  for (const auto& p : hopfCurve(0, omegas, both)) {
    if (p.tau > tauMax || p.sigma > sigmaMax) continue;
    const auto i = std::min(resolution - 1, static_cast<std::size_t>(p.tau / dTau));
    const auto j = std::min(resolution - 1, static_cast<std::size_t>(p.sigma / dSigma));
    boundary[j * resolution + i] = 1;
  }

  g.cells.reserve(resolution * resolution);
  for (std::size_t j = 0; j < resolution; ++j) {
    for (std::size_t i = 0; i < resolution; ++i) {
      GridCell c;
      c.tau = (static_cast<double>(i) + 0.5) * dTau;
      c.sigma = (static_cast<double>(j) + 0.5) * dSigma;
      if (boundary[j * resolution + i]) {
        c.cls = StabilityClass::HopfBoundary;
      } else if (guaranteedStable(c.tau, c.sigma)) {
        c.cls = StabilityClass::GuaranteedStable;
      } else {
        c.cls = StabilityClass::Unknown;
      }
      g.cells.push_back(c);
    }
  }
  return g;
}

void writeCurveCsv(std::ostream& os, std::span<const HopfPoint> points) {
  os << "tau,sigma,omega,m\n";
  for (const auto& p : points) {
    os << detail::fullPrecision(p.tau) << ',' << detail::fullPrecision(p.sigma) << ','
       << detail::fullPrecision(p.omega) << ',' << p.m << '\n';
  }
}

void writeGridCsv(std::ostream& os, const StabilityGrid& grid) {
  os << "tau,sigma,class\n";
  for (const auto& c : grid.cells) {
    os << detail::fullPrecision(c.tau) << ',' << detail::fullPrecision(c.sigma) << ',' << toString(c.cls) << '\n';
  }
}

// ---------------------------------------------------------------------------

ModelSpec toySpec(double tau, double sigma) {
  ModelSpec spec;
  spec.agents = 2;
  spec.dim = 1;
  spec.tau = std::max(tau, sigma);
  spec.sigma = std::min(tau, sigma);
  spec.kind = ModelKind::FirstOrder;
  spec.influence = InfluenceFunction::constant(1.0);
  return spec;
}

InitialHistory toyHistory(std::function<double(double)> u) {
  return InitialHistory::analytic(2, 1, [u = std::move(u)](std::size_t i, double t, std::span<double> out) {
    const double half = 0.5 * u(t);
    out[0] = i == 0 ? half : -half;
  });
}

Trajectory simulateToy(double tau, double sigma, std::function<double(double)> u, double h, double horizon) {
  const ModelSpec spec = toySpec(tau, sigma);
  return simulate(spec, toyHistory(std::move(u)), h, horizon);
}

double toyValue(const Trajectory& traj, double t) {
  const auto y = traj.sample(t);
  return y[0] - y[1];
}

}  // namespace delayflock
