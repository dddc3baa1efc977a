#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "delayflock/dde.hpp"

namespace delayflock {

/// |lambda + e^{-lambda tau} + e^{-lambda sigma}| for the scalar toy
/// equation u' = -u(t - tau) - u(t - sigma).
double charResidual(std::complex<double> lambda, double tau, double sigma);
double charResidual(double re, double im, double tau, double sigma);

/// Delay pair where lambda = i omega solves the characteristic equation.
struct HopfPoint {
  double tau = 0.0;
  double sigma = 0.0;
  double omega = 0.0;
  int m = 0;
};

struct HopfResiduals {
  double phase = 0.0;      // (tau + sigma) omega - (2m + 1) pi
  double sineSigma = 0.0;  // 2 sin(omega sigma) - omega
  double sineTau = 0.0;    // 2 sin(omega tau) - omega
  double cosSum = 0.0;     // cos(omega tau) + cos(omega sigma)
  double sinSum = 0.0;     // sin(omega tau) + sin(omega sigma) - omega
  double max() const;
};

HopfResiduals hopfResiduals(const HopfPoint& p);

/// omega_k = 2k / n for k = 1..n, so omega = 2 is hit exactly.
std::vector<double> defaultOmegaGrid(std::size_t n = 2000);

struct HopfOptions {
  int maxBranch = 2;         // sigma branches k = 0..maxBranch
  bool enforceOrder = true;  // keep only sigma <= tau
  double tolerance = 1e-9;
};

/// Points of branch m over the given omega values (each in (0, 2]), sorted by
/// omega; candidates failing any residual check are dropped.
std::vector<HopfPoint> hopfCurve(int m, std::span<const double> omegas, const HopfOptions& options = {});

/// Sufficient stability criterion min(sigma, tau) <= 1/2.
bool guaranteedStable(double tau, double sigma);

enum class StabilityClass { GuaranteedStable, HopfBoundary, Unknown };
std::string toString(StabilityClass c);

struct GridCell {
  double tau = 0.0;    // cell centre
  double sigma = 0.0;  // cell centre
  StabilityClass cls = StabilityClass::Unknown;
};

struct StabilityGrid {
  double tauMax = 0.0;
  double sigmaMax = 0.0;
  std::size_t resolution = 0;
  std::vector<GridCell> cells;  // row-major: sigma index outer, tau index inner
};

/// Classifies resolution x resolution cells of [0, tauMax] x [0, sigmaMax].
/// A cell containing a point of the m = 0 curve (both delay orders) is
/// HopfBoundary; otherwise a cell whose centre meets the min <= 1/2
/// criterion is GuaranteedStable; everything else is Unknown.
/// Throws ConfigError for nonpositive ranges or zero resolution.
StabilityGrid stabilityGrid(double tauMax, double sigmaMax, std::size_t resolution,
                            std::span<const double> omegas);

/// CSV "tau,sigma,omega,m" and "tau,sigma,class".
void writeCurveCsv(std::ostream& os, std::span<const HopfPoint> points);
void writeGridCsv(std::ostream& os, const StabilityGrid& grid);

/// Two-agent, one-dimensional, psi == 1 system whose difference
/// u = x_1 - x_2 obeys the toy equation. The larger delay is used as tau.
ModelSpec toySpec(double tau, double sigma);

/// History x_1 = u/2, x_2 = -u/2.
InitialHistory toyHistory(std::function<double(double)> u);

Trajectory simulateToy(double tau, double sigma, std::function<double(double)> u, double h, double horizon);

/// u(t) = x_1(t) - x_2(t).
double toyValue(const Trajectory& traj, double t);

}  // namespace delayflock
