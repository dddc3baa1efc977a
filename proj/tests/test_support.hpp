#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "delayflock/dde.hpp"
#include "delayflock/spectral.hpp"

namespace testing {

// Past-state lookup backed by a closure over time.
class FunctionQuery : public delayflock::StateQuery {
 public:
  explicit FunctionQuery(std::function<void(double, std::span<double>)> f) : f_(std::move(f)) {}
  void state(double t, std::span<double> out) const override { f_(t, out); }

 private:
  std::function<void(double, std::span<double>)> f_;
};

inline FunctionQuery constantQuery(std::vector<double> state) {
  return FunctionQuery([state](double, std::span<double> out) { std::copy(state.begin(), state.end(), out.begin()); });
}

// max |u| of the toy trajectory on the knots inside [a, b].
inline double windowAmplitude(const delayflock::Trajectory& traj, double a, double b) {
  double m = 0.0;
  for (std::size_t k = 0; k < traj.knotCount(); ++k) {
    const double t = traj.knotTime(k);
    if (t < a || t > b) continue;
    const auto y = traj.knotState(k);
    m = std::max(m, std::abs(y[0] - y[1]));
  }
  return m;
}

}  // namespace testing
