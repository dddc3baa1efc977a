#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delayflock/dde.hpp"

namespace delayflock {

/// Communication rates a_ij at one time; the diagonal is zero.
class WeightMatrix {
 public:
  explicit WeightMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }

  double minOffDiagonal() const;
  double maxOffDiagonal() const;

 private:
  std::size_t n_;
  std::vector<double> a_;
};

/// a_ij(t) = psi(|x_i(t - sigma) - x_j(t - tau)|) / (N - 1), positions only.
/// Throws DomainError for t < 0.
WeightMatrix commWeights(const ModelSpec& spec, const StateQuery& past, double t);

/// Hegselmann-Krause velocity field, one entry per state component.
std::vector<double> hkRhs(const ModelSpec& spec, const StateQuery& past, double t);

/// Cucker-Smale field: (v_i, sum_j a_ij (v_j(t - tau) - v_i(t - sigma))).
std::vector<double> csRhs(const ModelSpec& spec, const StateQuery& past, double t);

/// Right-hand side matching spec.kind, suitable for integrate().
DelayedRhs modelRhs(const ModelSpec& spec);

/// Convenience: integrate the model selected by spec.kind.
Trajectory simulate(const ModelSpec& spec, const InitialHistory& history, double h, double horizon);

struct ValidationReport {
  bool valid = true;
  std::size_t agent = 0;
  double time = 0.0;
  double residual = 0.0;
  std::string message;
};

/// Finite values everywhere on [-tau, 0]; for second-order models also
/// |x_i' - v_i| <= tol (defaults: 1e-8 analytic, 1e-4 tabulated), x_i' taken
/// by finite differences with one Richardson step.
ValidationReport validateInitialData(const ModelSpec& spec, const InitialHistory& history,
                                     std::optional<double> tolerance = std::nullopt);

struct RandomBox {
  double low = -1.0;
  double high = 1.0;
  double velocityLow = -1.0;
  double velocityHigh = 1.0;
  std::size_t knots = 8;
};

/// Seeded random history: knot values drawn uniformly from the box and
/// joined by the cubic representation. Second-order positions are x_i(0)
/// plus the exact integral of the velocity interpolant, so x' = v holds.
InitialHistory randomHistory(const ModelSpec& spec, const RandomBox& box, std::uint64_t seed);

}  // namespace delayflock
