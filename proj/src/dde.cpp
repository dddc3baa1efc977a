#include "delayflock/dde.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "delayflock/errors.hpp"
#include "numfmt.hpp"

namespace delayflock {

void ModelSpec::validate() const {
  if (agents < 2) throw ConfigError("model needs at least two agents");
  if (dim < 1) throw ConfigError("space dimension must be at least 1");
  if (!std::isfinite(sigma) || !std::isfinite(tau)) throw ConfigError("delays must be finite");
  if (sigma < 0.0) throw ConfigError("sigma must be nonnegative");
  if (sigma > tau) throw ConfigError("sigma must not exceed tau");
}

// ---------------------------------------------------------------------------
// InitialHistory

InitialHistory InitialHistory::analytic(std::size_t agents, std::size_t components, AgentFunction f) {
  if (!f) throw ConfigError("analytic history needs a callable");
  InitialHistory h;
  h.agents_ = agents;
  h.components_ = components;
  h.analytic_ = true;
  h.fn_ = std::move(f);
  return h;
}

InitialHistory InitialHistory::constant(std::vector<std::vector<double>> states) {
  if (states.empty()) throw ConfigError("constant history needs at least one agent");
  const std::size_t m = states.front().size();
  for (const auto& s : states) {
    if (s.size() != m || m == 0) throw ConfigError("constant history: all agents need the same nonzero size");
  }
  const std::size_t n = states.size();
  auto shared = std::make_shared<std::vector<std::vector<double>>>(std::move(states));
  return analytic(n, m, [shared](std::size_t i, double, std::span<double> out) {
    const auto& s = (*shared)[i];
    std::copy(s.begin(), s.end(), out.begin());
  });
}

namespace {

// Second-order accurate slopes on a nonuniform grid.
void nonuniformSlopes(const std::vector<double>& t, const std::vector<std::vector<double>>& y,
                      std::size_t k, std::vector<double>& out) {
  const std::size_t n = t.size();
  const std::size_t w = y.front().size();
  out.assign(w, 0.0);
  if (n == 1) return;
  if (n == 2) {
    for (std::size_t c = 0; c < w; ++c) out[c] = (y[1][c] - y[0][c]) / (t[1] - t[0]);
    return;
  }
  if (k == 0) {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    const double a = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    const double b = (h1 + h2) / (h1 * h2);
    const double c2 = -h1 / (h2 * (h1 + h2));
    for (std::size_t c = 0; c < w; ++c) out[c] = a * y[0][c] + b * y[1][c] + c2 * y[2][c];
  } else if (k == n - 1) {
    const double h1 = t[k] - t[k - 1], h2 = t[k - 1] - t[k - 2];
    const double a = (2.0 * h1 + h2) / (h1 * (h1 + h2));
    const double b = -(h1 + h2) / (h1 * h2);
    const double c2 = h1 / (h2 * (h1 + h2));
    for (std::size_t c = 0; c < w; ++c) out[c] = a * y[k][c] + b * y[k - 1][c] + c2 * y[k - 2][c];
  } else {
    const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
    const double a = -h2 / (h1 * (h1 + h2));
    const double b = (h2 - h1) / (h1 * h2);
    const double c2 = h1 / (h2 * (h1 + h2));
    for (std::size_t c = 0; c < w; ++c) out[c] = a * y[k - 1][c] + b * y[k][c] + c2 * y[k + 1][c];
  }
}

}  // namespace

InitialHistory InitialHistory::tabulated(std::vector<double> times, std::vector<std::vector<double>> values,
                                         std::size_t agents) {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("tabulated history: times and values must be nonempty and of equal length");
  }
  if (agents == 0) throw ConfigError("tabulated history: agent count must be positive");
  const std::size_t width = values.front().size();
  if (width == 0 || width % agents != 0) {
    throw ConfigError("tabulated history: each row must hold agents x components values");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (values[k].size() != width) throw ConfigError("tabulated history: ragged rows");
    if (!std::isfinite(times[k])) throw ConfigError("tabulated history: non-finite time");
    for (double v : values[k]) {
      if (!std::isfinite(v)) throw ConfigError("tabulated history: non-finite value");
    }
    if (k > 0 && !(times[k] > times[k - 1])) throw ConfigError("tabulated history: times must increase strictly");
  }
  auto table = std::make_shared<HermiteTable>(times, width);
  table->reserve(times.size());
  std::vector<double> slope;
  for (std::size_t k = 0; k < times.size(); ++k) {
    nonuniformSlopes(times, values, k, slope);
    table->push(values[k], slope);
  }
  const std::size_t m = width / agents;
  InitialHistory h = analytic(agents, m, [table, m](std::size_t i, double t, std::span<double> out) {
    std::vector<double> full(table->width());
    table->evaluate(t, full);
    std::copy_n(full.begin() + static_cast<std::ptrdiff_t>(i * m), m, out.begin());
  });
  h.analytic_ = false;
  h.knotTimes_ = std::move(times);
  return h;
}

void InitialHistory::evaluate(std::size_t agent, double t, std::span<double> out) const {
  if (!fn_) throw std::logic_error("empty InitialHistory");
  fn_(agent, t, out);
}

std::vector<double> InitialHistory::evaluate(std::size_t agent, double t) const {
  std::vector<double> out(components_);
  evaluate(agent, t, out);
  return out;
}

// ---------------------------------------------------------------------------
// History sampling

std::size_t historyIntervals(double tau, double h) {
  if (!(tau > 0.0)) return 0;
  const double ratio = std::ceil(tau / h);
  return std::max<std::size_t>(64, static_cast<std::size_t>(ratio));
}

HermiteTable sampleHistory(const ModelSpec& spec, const InitialHistory& history, double h) {
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t width = spec.stateSize();
  if (history.agents() != spec.agents || history.components() != m) {
    std::ostringstream os;
    os << "history shape " << history.agents() << "x" << history.components() << " does not match model "
       << spec.agents << "x" << m;
    throw ConfigError(os.str());
  }
  const std::size_t intervals = historyIntervals(spec.tau, h);
  const std::size_t count = intervals + 1;
  const double dt = intervals > 0 ? spec.tau / static_cast<double>(intervals) : 1.0;

  std::vector<double> samples(count * width);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = (k == intervals) ? 0.0 : -spec.tau + static_cast<double>(k) * dt;
    for (std::size_t i = 0; i < spec.agents; ++i) {
      std::span<double> out(samples.data() + k * width + i * m, m);
      history.evaluate(i, t, out);
      for (double v : out) {
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "initial history is not finite for agent " << i << " at t = " << t;
          throw ConfigError(os.str());
        }
      }
    }
  }

  std::vector<double> slopes(count * width, 0.0);
  if (intervals > 0) uniformSlopes(samples, width, dt, slopes);
  if (spec.kind == ModelKind::SecondOrder) {
    const std::size_t d = spec.dim;
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t i = 0; i < spec.agents; ++i) {
        const std::size_t base = k * width + i * m;
        for (std::size_t c = 0; c < d; ++c) slopes[base + c] = samples[base + d + c];
      }
    }
  }

  HermiteTable table(-spec.tau, dt, width);
  table.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    table.push({samples.data() + k * width, width}, {slopes.data() + k * width, width});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(ModelSpec spec, HermiteTable history, HermiteTable knots)
    : spec_(std::move(spec)), history_(std::move(history)), knots_(std::move(knots)) {}

void Trajectory::checkRange(double t) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(t));
  if (!(t >= -spec_.tau - tol) || !(t <= horizon() + tol)) {
    std::ostringstream os;
    os << "time " << t << " outside the trajectory range [" << -spec_.tau << ", " << horizon() << "]";
    throw DomainError(os.str());
  }
}

void Trajectory::sample(double t, std::span<double> out) const {
  checkRange(t);
  if (t < 0.0 && spec_.tau > 0.0) {
    history_.evaluate(t, out);
  } else {
    knots_.evaluate(t, out);
  }
}

std::vector<double> Trajectory::sample(double t) const {
  std::vector<double> out(spec_.stateSize());
  sample(t, out);
  return out;
}

void Trajectory::sampleDerivative(double t, std::span<double> out) const {
  checkRange(t);
  if (t < 0.0 && spec_.tau > 0.0) {
    history_.derivative(t, out);
  } else {
    knots_.derivative(t, out);
  }
}

std::vector<double> Trajectory::sampleDerivative(double t) const {
  std::vector<double> out(spec_.stateSize());
  sampleDerivative(t, out);
  return out;
}

void Trajectory::writeCsv(std::ostream& os, std::size_t every) const {
  if (every == 0) every = 1;
  const std::size_t m = spec_.componentsPerAgent();
  os << "t,agent,component,value\n";
  auto emit = [&](double t, std::span<const double> y) {
    const std::string ts = detail::fullPrecision(t);
    for (std::size_t i = 0; i < spec_.agents; ++i) {
      for (std::size_t c = 0; c < m; ++c) {
        os << ts << ',' << i << ',' << c << ',' << detail::fullPrecision(y[i * m + c]) << '\n';
      }
    }
  };
  // History knots, excluding t = 0 which the integrator grid repeats.
  if (spec_.tau > 0.0) {
    for (std::size_t k = 0; k + 1 < history_.size(); k += every) emit(history_.time(k), history_.value(k));
  }
  for (std::size_t k = 0; k < knots_.size(); k += every) emit(knots_.time(k), knots_.value(k));
  if ((knots_.size() - 1) % every != 0) emit(knots_.back(), knots_.value(knots_.size() - 1));
}

// ---------------------------------------------------------------------------
// Integration

namespace {

// Past-state access while a step is in progress: completed knots, the
// sampled history, and the stage currently being evaluated.
class StepQuery final : public StateQuery {
 public:
  StepQuery(const HermiteTable& history, const HermiteTable& knots) : history_(history), knots_(knots) {}

  void setStage(double time, std::span<const double> state) {
    stageTime_ = time;
    stage_ = state;
  }

  void state(double s, std::span<double> out) const override {
    const double tol = 1e-12 * std::max(1.0, std::abs(stageTime_));
    if (std::abs(s - stageTime_) <= tol) {
      std::copy(stage_.begin(), stage_.end(), out.begin());
      return;
    }
    if (s < 0.0) {
      history_.evaluate(s, out);
      return;
    }
    if (!knots_.empty() && s <= knots_.back() + tol) {
      knots_.evaluate(s, out);
      return;
    }
    if (knots_.empty() && s <= tol) {
      history_.evaluate(0.0, out);
      return;
    }
    throw std::logic_error("delayed lookup lands inside the step being computed");
  }

 private:
  const HermiteTable& history_;
  const HermiteTable& knots_;
  double stageTime_ = 0.0;
  std::span<const double> stage_;
};

bool allFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Trajectory integrate(const ModelSpec& spec, const InitialHistory& history, const DelayedRhs& rhs, double h,
                     double horizon) {
  spec.validate();
  if (!rhs) throw ConfigError("integrate: empty right-hand side");
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step size must be positive and finite");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive and finite");
  const double slack = 1.0 + 1e-12;
  if (spec.sigma > 0.0) {
    if (h > 0.5 * spec.sigma * slack) throw ConfigError("step size must satisfy h <= sigma/2");
    if (spec.tau > spec.sigma && h > 0.5 * (spec.tau - spec.sigma) * slack) {
      throw ConfigError("step size must satisfy h <= (tau - sigma)/2");
    }
  } else if (spec.tau > 0.0 && h > spec.tau * slack) {
    throw ConfigError("step size must satisfy h <= tau when sigma = 0");
  }

  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h * (1.0 - 1e-12)));
  const double dt = horizon / static_cast<double>(steps);
  const std::size_t n = spec.stateSize();

  HermiteTable past = sampleHistory(spec, history, h);
  HermiteTable knots(0.0, dt, n);
  knots.reserve(steps + 1);
  StepQuery query(past, knots);

  std::vector<double> y(past.value(past.size() - 1).begin(), past.value(past.size() - 1).end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);

  auto evalStage = [&](double t, std::span<const double> state, std::span<double> out) {
    query.setStage(t, state);
    rhs(t, query, out);
    if (!allFinite(out)) throw IntegrationError("non-finite right-hand side", t);
  };

  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    evalStage(t, y, k1);
    knots.push(y, k1);

    for (std::size_t c = 0; c < n; ++c) stage[c] = y[c] + 0.5 * dt * k1[c];
    evalStage(t + 0.5 * dt, stage, k2);
    for (std::size_t c = 0; c < n; ++c) stage[c] = y[c] + 0.5 * dt * k2[c];
    evalStage(t + 0.5 * dt, stage, k3);
    for (std::size_t c = 0; c < n; ++c) stage[c] = y[c] + dt * k3[c];
    evalStage(t + dt, stage, k4);

    for (std::size_t c = 0; c < n; ++c) {
      y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    }
    if (!allFinite(y)) throw IntegrationError("non-finite state", static_cast<double>(step + 1) * dt);
  }
  evalStage(static_cast<double>(steps) * dt, y, k1);
  knots.push(y, k1);

  return Trajectory(spec, std::move(past), std::move(knots));
}

}  // namespace delayflock
