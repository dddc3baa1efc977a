#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "delayflock/dde.hpp"

namespace delayflock {

/// Largest pairwise Euclidean distance between `count` points of dimension
/// `dim` stored at stride `stride` starting at `offset`.
double diameter(std::span<const double> state, std::size_t count, std::size_t dim, std::size_t stride = 0,
                std::size_t offset = 0);

/// d_x and d_v of a full model state.
double positionDiameter(const ModelSpec& spec, std::span<const double> state);
double velocityDiameter(const ModelSpec& spec, std::span<const double> state);

enum class Component { Position, Velocity };

/// max over agent pairs (i, j) and times s, t in [-tau, 0] of
/// |y_i(s) - y_j(t)| for positions or velocities, on the history knot grid
/// refined `refine` times.
double initialSpread(const ModelSpec& spec, const HermiteTable& history, Component which,
                     std::size_t refine = 4);
double initialSpread(const Trajectory& traj, Component which, std::size_t refine = 4);

/// Spread between the window [(K-1) sigma, K sigma] and everything before
/// it back to -tau; K = 0 gives the initial spread. Throws DomainError when
/// sigma = 0 or K sigma exceeds the horizon.
double windowedSpread(const Trajectory& traj, std::size_t K, Component which = Component::Position,
                      std::size_t refine = 4);

/// Smallest off-diagonal communication rate at time t.
double minWeight(const Trajectory& traj, double t);

/// The functional d(t) + beta * int_{[t-2tau]^+}^t e^{-(t-s)} int_s^t
/// max_i |y_i'(r)| dr ds, where d is the position (F) or velocity (G)
/// diameter and y the matching component.
class LyapunovFunctional {
 public:
  LyapunovFunctional(const Trajectory& traj, double beta, Component which = Component::Position);

  double beta() const { return beta_; }

  /// Throws DomainError for t outside [0, T].
  double operator()(double t) const;

  /// Just the double-integral term (without beta).
  double memoryTerm(double t) const;

  /// max_i |y_i'| at knot k of the integration grid.
  double maxRate(std::size_t k) const { return rate_[k]; }

  /// Trapezoid integral of the max rate over [a, b] within [0, T].
  double rateIntegral(double a, double b) const { return cumulativeAt(b) - cumulativeAt(a); }

 private:
  const Trajectory& traj_;
  double beta_;
  Component which_;
  std::vector<double> rate_;        // max_i |y_i'| at knots
  std::vector<double> cumulative_;  // trapezoid integral of rate_ from 0
  double cumulativeAt(double t) const;
};

struct ObservableSeries {
  std::string label;
  std::vector<double> times;
  std::vector<double> values;
};

/// "t,label,value" rows at 17 significant digits.
void writeSeriesCsv(std::ostream& os, const ObservableSeries& series);
void writeSeriesCsv(std::ostream& os, std::span<const ObservableSeries> series);

/// Observables at every `every`-th knot of [0, T] (and at T).
ObservableSeries sampleDiameter(const Trajectory& traj, Component which, std::size_t every = 1);
ObservableSeries sampleFunctional(const LyapunovFunctional& f, const Trajectory& traj, std::size_t every = 1);
ObservableSeries sampleMinWeight(const Trajectory& traj, std::size_t every = 1);
ObservableSeries sampleMaxRate(const Trajectory& traj, Component which, std::size_t every = 1);

struct InequalityCheck {
  std::string name;
  double maxViolation = 0.0;  // max (lhs - rhs) / max(rhs, floor), clipped below at 0
  double worstTime = 0.0;
  double maxRatio = 0.0;  // max lhs / rhs over samples with rhs above the floor
  std::size_t samples = 0;
};

struct LemmaReport {
  std::vector<InequalityCheck> checks;
  const InequalityCheck* find(const std::string& name) const;
  double worst() const;
};

/// Empirical check of the inequalities used in the decay argument:
///  - "derivative-bound": max_i |y_i'(t)| <= d(t - tau) + int_{t-tau}^{t-sigma} max_i |y_i'|
///  - "window-rate":      max_{[(K-1)s, Ks]} max_i |y_i'| <= spread over window K-1
///  - "window-spread":    spread over window K <= Z^K spread_0
///  - "functional-bound": functional(t) <= calZ spread_0 on [0, 2 tau]
///  - "diameter-below-functional": d(t) <= functional(t)
///  - "position-drift" (second order): d_x(t) <= d_x(0) + int_0^t d_v
/// First-order runs use positions; second-order runs use velocities.
/// Window checks need sigma > 0 and are skipped otherwise.
LemmaReport verifyLemmaInequalities(const Trajectory& traj, double beta, std::size_t refine = 4);

/// Negated least-squares slope of log(value) over time, fitted on the last
/// `fraction` of samples whose values exceed `floor`. Throws DomainError
/// when fewer than two usable samples remain.
double decayRateFit(const ObservableSeries& series, double fraction = 0.5, double floor = 1e-12);

}  // namespace delayflock
