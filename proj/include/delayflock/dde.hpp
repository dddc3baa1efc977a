#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "delayflock/hermite.hpp"
#include "delayflock/influence.hpp"

namespace delayflock {

enum class ModelKind { FirstOrder, SecondOrder };

/// Static description of a delayed multi-agent system.
///
/// Agents read their own state at t - sigma (reaction delay) and the other
/// agents' states at t - tau, where tau = sigma + kappa and kappa >= 0 is the
/// transmission delay. First-order agents carry a position in R^d;
/// second-order agents carry (position, velocity) in R^{2d}, laid out as
/// [x_0..x_{d-1}, v_0..v_{d-1}] per agent.
struct ModelSpec {
  std::size_t agents = 2;
  std::size_t dim = 1;
  double sigma = 0.0;
  double tau = 0.0;
  ModelKind kind = ModelKind::FirstOrder;
  InfluenceFunction influence;

  double transmissionDelay() const { return tau - sigma; }
  std::size_t componentsPerAgent() const { return kind == ModelKind::SecondOrder ? 2 * dim : dim; }
  std::size_t stateSize() const { return agents * componentsPerAgent(); }

  /// Throws ConfigError when N < 2, d < 1 or not 0 <= sigma <= tau.
  void validate() const;
};

/// Initial datum on [-tau, 0], one vector-valued function per agent.
class InitialHistory {
 public:
  /// Fills `out` (componentsPerAgent entries) with agent `agent` at time t.
  using AgentFunction = std::function<void(std::size_t agent, double t, std::span<double> out)>;

  InitialHistory() = default;

  static InitialHistory analytic(std::size_t agents, std::size_t components, AgentFunction f);

  /// Time-independent history; `states[i]` is agent i's state.
  static InitialHistory constant(std::vector<std::vector<double>> states);

  /// Knot data: values[k] holds all agents' states (flattened) at times[k].
  /// Evaluated by cubic Hermite interpolation with finite-difference slopes
  /// and constant extension outside [times.front(), times.back()].
  static InitialHistory tabulated(std::vector<double> times, std::vector<std::vector<double>> values,
                                  std::size_t agents);

  std::size_t agents() const { return agents_; }
  std::size_t components() const { return components_; }

  /// Analytic (and constant) histories are evaluated exactly; tabulated
  /// ones only at their knots.
  bool isAnalytic() const { return analytic_; }

  /// Knot times of a tabulated history (empty for analytic ones).
  const std::vector<double>& knotTimes() const { return knotTimes_; }

  void evaluate(std::size_t agent, double t, std::span<double> out) const;
  std::vector<double> evaluate(std::size_t agent, double t) const;

 private:
  std::size_t agents_ = 0;
  std::size_t components_ = 0;
  bool analytic_ = true;
  std::vector<double> knotTimes_;
  AgentFunction fn_;
};

/// Read access to the full (all-agent) state at a past time.
class StateQuery {
 public:
  virtual ~StateQuery() = default;
  virtual void state(double t, std::span<double> out) const = 0;
};

/// Right-hand side of a delayed system: given t and access to the past,
/// writes dy/dt into `dydt`.
using DelayedRhs = std::function<void(double t, const StateQuery& past, std::span<double> dydt)>;

/// Number of history knot intervals used for step h: max(64, ceil(tau/h)).
std::size_t historyIntervals(double tau, double h);

/// Samples an initial history onto the uniform knot grid used by the
/// integrator. Slopes are fourth-order finite differences of the samples;
/// for second-order models the position slopes are the sampled velocities.
HermiteTable sampleHistory(const ModelSpec& spec, const InitialHistory& history, double h);

/// Dense solution record on [-tau, T]: the sampled history on [-tau, 0] and
/// the integrator knots on [0, T], both with Hermite dense output. At t = 0
/// the derivative is the right-hand side (the right derivative).
class Trajectory : public StateQuery {
 public:
  Trajectory(ModelSpec spec, HermiteTable history, HermiteTable knots);

  const ModelSpec& spec() const { return spec_; }
  double horizon() const { return knots_.back(); }
  double step() const { return knots_.size() > 1 ? knots_.time(1) - knots_.time(0) : 0.0; }
  double start() const { return -spec_.tau; }

  const HermiteTable& history() const { return history_; }
  const HermiteTable& knots() const { return knots_; }
  std::size_t knotCount() const { return knots_.size(); }
  double knotTime(std::size_t k) const { return knots_.time(k); }
  std::span<const double> knotState(std::size_t k) const { return knots_.value(k); }
  std::span<const double> knotDerivative(std::size_t k) const { return knots_.slope(k); }

  /// Throws DomainError outside [-tau, T].
  void sample(double t, std::span<double> out) const;
  std::vector<double> sample(double t) const;
  void sampleDerivative(double t, std::span<double> out) const;
  std::vector<double> sampleDerivative(double t) const;

  void state(double t, std::span<double> out) const override { sample(t, out); }

  /// CSV "t,agent,component,value", one row per knot/agent/component,
  /// keeping every `every`-th knot of each segment.
  void writeCsv(std::ostream& os, std::size_t every = 1) const;

 private:
  void checkRange(double t) const;

  ModelSpec spec_;
  HermiteTable history_;
  HermiteTable knots_;
};

/// Method-of-steps integration with the classical four-stage Runge-Kutta
/// scheme; delayed states come from the Hermite dense output of the part of
/// the solution already computed.
///
/// Requirements: h > 0, T > 0, and when sigma > 0: h <= sigma/2 and, if
/// tau > sigma, h <= (tau - sigma)/2; when sigma = 0 < tau: h <= tau.
/// The step is shrunk to T / ceil(T / h) so the grid ends exactly at T.
/// Throws ConfigError on violated requirements and IntegrationError when a
/// non-finite state appears.
Trajectory integrate(const ModelSpec& spec, const InitialHistory& history, const DelayedRhs& rhs,
                     double h, double horizon);

}  // namespace delayflock
