#include "delayflock/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "delayflock/errors.hpp"

namespace delayflock {

double WeightMatrix::minOffDiagonal() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i != j) m = std::min(m, (*this)(i, j));
    }
  }
  return m;
}

double WeightMatrix::maxOffDiagonal() const {
  double m = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i != j) m = std::max(m, (*this)(i, j));
    }
  }
  return m;
}

namespace {

struct DelayedStates {
  std::vector<double> own;     // at t - sigma
  std::vector<double> others;  // at t - tau
};

DelayedStates lookup(const ModelSpec& spec, const StateQuery& past, double t) {
  if (!(t >= 0.0)) {
    std::ostringstream os;
    os << "communication weights need t >= 0, got " << t;
    throw DomainError(os.str());
  }
  DelayedStates s{std::vector<double>(spec.stateSize()), std::vector<double>(spec.stateSize())};
  past.state(t - spec.sigma, s.own);
  if (spec.tau == spec.sigma) {
    s.others = s.own;
  } else {
    past.state(t - spec.tau, s.others);
  }
  return s;
}

double pairDistance(const ModelSpec& spec, const DelayedStates& s, std::size_t i, std::size_t j) {
  const std::size_t m = spec.componentsPerAgent();
  double sq = 0.0;
  for (std::size_t c = 0; c < spec.dim; ++c) {
    const double diff = s.own[i * m + c] - s.others[j * m + c];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

WeightMatrix weightsFrom(const ModelSpec& spec, const DelayedStates& s) {
  const std::size_t n = spec.agents;
  const double scale = 1.0 / static_cast<double>(n - 1);
  WeightMatrix a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) a(i, j) = spec.influence(pairDistance(spec, s, i, j)) * scale;
    }
  }
  return a;
}

// Writes sum_j a_ij (y_j(t - tau) - y_i(t - sigma)) for the `offset`-th
// block of d components of each agent.
void alignmentField(const ModelSpec& spec, const DelayedStates& s, const WeightMatrix& a, std::size_t offset,
                    std::span<double> out, std::size_t outOffset) {
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t d = spec.dim;
  for (std::size_t i = 0; i < spec.agents; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      const double self = s.own[i * m + offset + c];
      double acc = 0.0;
      for (std::size_t j = 0; j < spec.agents; ++j) {
        if (j != i) acc += a(i, j) * (s.others[j * m + offset + c] - self);
      }
      out[i * m + outOffset + c] = acc;
    }
  }
}

void hkInto(const ModelSpec& spec, const StateQuery& past, double t, std::span<double> out) {
  const DelayedStates s = lookup(spec, past, t);
  const WeightMatrix a = weightsFrom(spec, s);
  alignmentField(spec, s, a, 0, out, 0);
}

void csInto(const ModelSpec& spec, const StateQuery& past, double t, std::span<double> out) {
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t d = spec.dim;
  std::vector<double> now(spec.stateSize());
  past.state(t, now);
  const DelayedStates s = lookup(spec, past, t);
  const WeightMatrix a = weightsFrom(spec, s);
  for (std::size_t i = 0; i < spec.agents; ++i) {
    for (std::size_t c = 0; c < d; ++c) out[i * m + c] = now[i * m + d + c];
  }
  alignmentField(spec, s, a, d, out, d);
}

}  // namespace

WeightMatrix commWeights(const ModelSpec& spec, const StateQuery& past, double t) {
  return weightsFrom(spec, lookup(spec, past, t));
}

std::vector<double> hkRhs(const ModelSpec& spec, const StateQuery& past, double t) {
  if (spec.kind != ModelKind::FirstOrder) throw ConfigError("hkRhs needs a first-order model");
  std::vector<double> out(spec.stateSize());
  hkInto(spec, past, t, out);
  return out;
}

std::vector<double> csRhs(const ModelSpec& spec, const StateQuery& past, double t) {
  if (spec.kind != ModelKind::SecondOrder) throw ConfigError("csRhs needs a second-order model");
  std::vector<double> out(spec.stateSize());
  csInto(spec, past, t, out);
  return out;
}

DelayedRhs modelRhs(const ModelSpec& spec) {
  if (spec.kind == ModelKind::FirstOrder) {
    return [spec](double t, const StateQuery& past, std::span<double> out) { hkInto(spec, past, t, out); };
  }
  return [spec](double t, const StateQuery& past, std::span<double> out) { csInto(spec, past, t, out); };
}

Trajectory simulate(const ModelSpec& spec, const InitialHistory& history, double h, double horizon) {
  return integrate(spec, history, modelRhs(spec), h, horizon);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kValidationSamples = 256;

double vectorNorm(std::span<const double> a) {
  double sq = 0.0;
  for (double v : a) sq += v * v;
  return std::sqrt(sq);
}

ValidationReport reject(std::size_t agent, double t, double residual, const std::string& what) {
  ValidationReport r;
  r.valid = false;
  r.agent = agent;
  r.time = t;
  r.residual = residual;
  std::ostringstream os;
  os << what << " (agent " << agent << ", t = " << t << ", residual " << residual << ")";
  r.message = os.str();
  return r;
}

}  // namespace

ValidationReport validateInitialData(const ModelSpec& spec, const InitialHistory& history,
                                     std::optional<double> tolerance) {
  spec.validate();
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t d = spec.dim;
  if (history.agents() != spec.agents || history.components() != m) {
    ValidationReport r;
    r.valid = false;
    r.message = "history shape does not match the model";
    return r;
  }
  const double tau = spec.tau;
  const bool tabulated = !history.isAnalytic();
  if (tabulated && tau > 0.0) {
    const auto& kt = history.knotTimes();
    const double slack = 1e-12 * std::max(1.0, tau);
    if (kt.front() > -tau + slack || kt.back() < -slack) {
      ValidationReport r;
      r.valid = false;
      r.message = "tabulated history must cover [-tau, 0]";
      return r;
    }
  }

  // Finite values on a uniform sample of [-tau, 0] plus any knots.
  std::vector<double> times;
  if (tau > 0.0) {
    for (std::size_t k = 0; k <= kValidationSamples; ++k) {
      times.push_back(k == kValidationSamples ? 0.0 : -tau + tau * static_cast<double>(k) / kValidationSamples);
    }
  } else {
    times.push_back(0.0);
  }
  std::vector<double> y(m);
  for (double t : times) {
    for (std::size_t i = 0; i < spec.agents; ++i) {
      history.evaluate(i, t, y);
      for (double v : y) {
        if (!std::isfinite(v)) return reject(i, t, std::numeric_limits<double>::infinity(), "non-finite history");
      }
    }
  }
  if (spec.kind == ModelKind::FirstOrder || tau == 0.0) return {};

  const double tol = tolerance.value_or(tabulated ? 1e-4 : 1e-8);
  ValidationReport worst;
  auto consider = [&](std::size_t i, double t, std::span<const double> dx, std::span<const double> v) {
    std::vector<double> diff(d);
    for (std::size_t c = 0; c < d; ++c) diff[c] = dx[c] - v[c];
    const double r = vectorNorm(diff);
    if (r > worst.residual || (!std::isfinite(r))) {
      worst.residual = r;
      worst.agent = i;
      worst.time = t;
    }
  };

  std::vector<double> a(m), b(m), c(m), dx(d);
  if (tabulated) {
    const auto& kt = history.knotTimes();
    const std::size_t n = kt.size();
    if (n >= 2) {
      for (std::size_t k = 0; k < n; ++k) {
        // three-point stencil on the (possibly nonuniform) knot grid
        const std::size_t lo = k == 0 ? 0 : (k == n - 1 && n > 2 ? k - 2 : k - 1);
        const std::size_t mid = std::min(lo + 1, n - 1);
        const std::size_t hi = std::min(lo + 2, n - 1);
        for (std::size_t i = 0; i < spec.agents; ++i) {
          history.evaluate(i, kt[lo], a);
          history.evaluate(i, kt[mid], b);
          history.evaluate(i, kt[hi], c);
          std::vector<double> here(m);
          history.evaluate(i, kt[k], here);
          for (std::size_t q = 0; q < d; ++q) {
            if (hi == mid) {
              dx[q] = (b[q] - a[q]) / (kt[mid] - kt[lo]);
              continue;
            }
            // derivative at kt[k] of the parabola through the three points
            const double t0 = kt[lo], t1 = kt[mid], t2 = kt[hi], t = kt[k];
            const double l0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
            const double l1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
            const double l2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
            dx[q] = l0 * a[q] + l1 * b[q] + l2 * c[q];
          }
          consider(i, kt[k], dx, std::span<const double>(here).subspan(d, d));
        }
      }
    }
  } else {
    // Second-order stencils with one Richardson step (steps delta and
    // delta/2), so the delta^2 truncation term cancels.
    const double delta = 1e-5 * tau;
    std::vector<double> here(m), coarse(d), fine(d);
    auto stencil = [&](std::size_t i, double t, double step, std::span<double> out) {
      if (t - step < -tau) {
        history.evaluate(i, t + step, a);
        history.evaluate(i, t + 2.0 * step, b);
        for (std::size_t q = 0; q < d; ++q) out[q] = (-3.0 * here[q] + 4.0 * a[q] - b[q]) / (2.0 * step);
      } else if (t + step > 0.0) {
        history.evaluate(i, t - step, a);
        history.evaluate(i, t - 2.0 * step, b);
        for (std::size_t q = 0; q < d; ++q) out[q] = (3.0 * here[q] - 4.0 * a[q] + b[q]) / (2.0 * step);
      } else {
        history.evaluate(i, t - step, a);
        history.evaluate(i, t + step, b);
        for (std::size_t q = 0; q < d; ++q) out[q] = (b[q] - a[q]) / (2.0 * step);
      }
    };
    for (double t : times) {
      for (std::size_t i = 0; i < spec.agents; ++i) {
        history.evaluate(i, t, here);
        stencil(i, t, delta, coarse);
        stencil(i, t, 0.5 * delta, fine);
        for (std::size_t q = 0; q < d; ++q) dx[q] = (4.0 * fine[q] - coarse[q]) / 3.0;
        consider(i, t, dx, std::span<const double>(here).subspan(d, d));
      }
    }
  }
  if (!(worst.residual <= tol)) {
    return reject(worst.agent, worst.time, worst.residual, "position derivative does not match velocity");
  }
  worst.valid = true;
  return worst;
}

// ---------------------------------------------------------------------------

InitialHistory randomHistory(const ModelSpec& spec, const RandomBox& box, std::uint64_t seed) {
  spec.validate();
  if (!(box.high >= box.low) || !(box.velocityHigh >= box.velocityLow)) {
    throw ConfigError("random box bounds must satisfy low <= high");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(box.low, box.high);
  std::uniform_real_distribution<double> vel(box.velocityLow, box.velocityHigh);
  const std::size_t n = spec.agents;
  const std::size_t d = spec.dim;
  const std::size_t knots = spec.tau > 0.0 ? std::max<std::size_t>(box.knots, 2) : 1;
  const double dt = knots > 1 ? spec.tau / static_cast<double>(knots - 1) : 1.0;
  auto knotTime = [&](std::size_t k) { return k + 1 == knots ? 0.0 : -spec.tau + static_cast<double>(k) * dt; };

  if (spec.kind == ModelKind::FirstOrder) {
    std::vector<double> times(knots);
    std::vector<std::vector<double>> values(knots, std::vector<double>(n * d));
    for (std::size_t k = 0; k < knots; ++k) {
      times[k] = knotTime(k);
      for (double& v : values[k]) v = pos(rng);
    }
    return InitialHistory::tabulated(std::move(times), std::move(values), n);
  }

  // Second order: velocity knots, then positions at t = 0.
  std::vector<double> samples(knots * n * d);
  for (double& v : samples) v = vel(rng);
  std::vector<double> x0(n * d);
  for (double& v : x0) v = pos(rng);

  auto table = std::make_shared<HermiteTable>(-spec.tau, dt, n * d);
  std::vector<double> slopes(samples.size(), 0.0);
  if (knots > 1) uniformSlopes(samples, n * d, dt, slopes);
  table->reserve(knots);
  for (std::size_t k = 0; k < knots; ++k) {
    table->push({samples.data() + k * n * d, n * d}, {slopes.data() + k * n * d, n * d});
  }
  return InitialHistory::analytic(n, 2 * d, [table, x0, d](std::size_t i, double t, std::span<double> out) {
    const std::size_t w = table->width();
    std::vector<double> v(w), integral(w);
    table->evaluate(t, v);
    table->integral(t, 0.0, integral);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = x0[i * d + c] - integral[i * d + c];
      out[d + c] = v[i * d + c];
    }
  });
}

}  // namespace delayflock
