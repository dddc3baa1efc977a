#include "delayflock/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "delayflock/certificates.hpp"
#include "delayflock/errors.hpp"
#include "delayflock/models.hpp"
#include "numfmt.hpp"

namespace delayflock {

namespace {

// Diameter of a flat point cloud (points of `dim` coordinates).
double cloudDiameter(const std::vector<double>& pts, std::size_t dim) {
  const std::size_t n = pts.size() / dim;
  if (n < 2) return 0.0;
  if (dim == 1) {
    const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end());
    return *hi - *lo;
  }
  double best = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double* p = pts.data() + a * dim;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double* q = pts.data() + b * dim;
      double sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = p[c] - q[c];
        sq += diff * diff;
      }
      best = std::max(best, sq);
    }
  }
  return std::sqrt(best);
}

// Largest distance between a point of `a` and a point of `b`.
double crossDiameter(const std::vector<double>& a, const std::vector<double>& b, std::size_t dim) {
  const std::size_t na = a.size() / dim;
  const std::size_t nb = b.size() / dim;
  if (dim == 1) {
    if (na == 0 || nb == 0) return 0.0;
    const auto [alo, ahi] = std::minmax_element(a.begin(), a.end());
    const auto [blo, bhi] = std::minmax_element(b.begin(), b.end());
    return std::max(*ahi - *blo, *bhi - *alo);
  }
  double best = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double* p = a.data() + i * dim;
    for (std::size_t j = 0; j < nb; ++j) {
      const double* q = b.data() + j * dim;
      double sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = p[c] - q[c];
        sq += diff * diff;
      }
      best = std::max(best, sq);
    }
  }
  return std::sqrt(best);
}

std::size_t componentOffset(const ModelSpec& spec, Component which) {
  if (which == Component::Velocity) {
    if (spec.kind != ModelKind::SecondOrder) throw DomainError("velocity observables need a second-order model");
    return spec.dim;
  }
  return 0;
}

// Breakpoints of `table` strictly inside (a, b), with a and b added, each
// interval split into `refine` pieces.
void appendRefined(const HermiteTable& table, double a, double b, std::size_t refine, std::vector<double>& out) {
  std::vector<double> base{a};
  for (std::size_t k = 0; k < table.size(); ++k) {
    const double t = table.time(k);
    if (t > a && t < b) base.push_back(t);
  }
  if (b > a) base.push_back(b);
  refine = std::max<std::size_t>(refine, 1);
  for (std::size_t k = 0; k + 1 < base.size(); ++k) {
    for (std::size_t r = 0; r < refine; ++r) {
      out.push_back(base[k] + (base[k + 1] - base[k]) * static_cast<double>(r) / static_cast<double>(refine));
    }
  }
  out.push_back(base.back());
}

// Sample times covering [a, b] within the trajectory range.
std::vector<double> refinedTimes(const Trajectory& traj, double a, double b, std::size_t refine) {
  std::vector<double> out;
  if (a < 0.0 && traj.spec().tau > 0.0) {
    appendRefined(traj.history(), a, std::min(b, 0.0), refine, out);
    if (b > 0.0) {
      out.pop_back();
      appendRefined(traj.knots(), 0.0, b, refine, out);
    }
  } else {
    appendRefined(traj.knots(), std::max(a, 0.0), b, refine, out);
  }
  return out;
}

// All agents' component blocks at the given times, as a flat cloud.
std::vector<double> cloudAt(const Trajectory& traj, const std::vector<double>& times, std::size_t offset) {
  const ModelSpec& spec = traj.spec();
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t d = spec.dim;
  std::vector<double> state(spec.stateSize());
  std::vector<double> pts;
  pts.reserve(times.size() * spec.agents * d);
  for (double t : times) {
    traj.sample(t, state);
    for (std::size_t i = 0; i < spec.agents; ++i) {
      pts.insert(pts.end(), state.begin() + static_cast<std::ptrdiff_t>(i * m + offset),
                 state.begin() + static_cast<std::ptrdiff_t>(i * m + offset + d));
    }
  }
  return pts;
}

double blockRate(const ModelSpec& spec, std::span<const double> slope, std::size_t offset) {
  const std::size_t m = spec.componentsPerAgent();
  double best = 0.0;
  for (std::size_t i = 0; i < spec.agents; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < spec.dim; ++c) {
      const double v = slope[i * m + offset + c];
      sq += v * v;
    }
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

std::vector<std::size_t> sampledIndices(std::size_t count, std::size_t every) {
  if (every == 0) every = 1;
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < count; k += every) idx.push_back(k);
  if (idx.empty() || idx.back() != count - 1) idx.push_back(count - 1);
  return idx;
}

}  // namespace

double diameter(std::span<const double> state, std::size_t count, std::size_t dim, std::size_t stride,
                std::size_t offset) {
  if (stride == 0) stride = dim;
  double best = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = state[i * stride + offset + c] - state[j * stride + offset + c];
        sq += diff * diff;
      }
      best = std::max(best, sq);
    }
  }
  return std::sqrt(best);
}

double positionDiameter(const ModelSpec& spec, std::span<const double> state) {
  return diameter(state, spec.agents, spec.dim, spec.componentsPerAgent(), 0);
}

double velocityDiameter(const ModelSpec& spec, std::span<const double> state) {
  return diameter(state, spec.agents, spec.dim, spec.componentsPerAgent(), componentOffset(spec, Component::Velocity));
}

double initialSpread(const ModelSpec& spec, const HermiteTable& history, Component which, std::size_t refine) {
  const std::size_t offset = componentOffset(spec, which);
  const std::size_t m = spec.componentsPerAgent();
  const std::size_t d = spec.dim;
  std::vector<double> times;
  if (history.size() < 2) {
    times.push_back(0.0);
  } else {
    appendRefined(history, history.front(), history.back(), refine, times);
  }
  std::vector<double> state(spec.stateSize());
  std::vector<double> pts;
  for (double t : times) {
    history.evaluate(t, state);
    for (std::size_t i = 0; i < spec.agents; ++i) {
      pts.insert(pts.end(), state.begin() + static_cast<std::ptrdiff_t>(i * m + offset),
                 state.begin() + static_cast<std::ptrdiff_t>(i * m + offset + d));
    }
  }
  return cloudDiameter(pts, d);
}

double initialSpread(const Trajectory& traj, Component which, std::size_t refine) {
  return initialSpread(traj.spec(), traj.history(), which, refine);
}

double windowedSpread(const Trajectory& traj, std::size_t K, Component which, std::size_t refine) {
  const ModelSpec& spec = traj.spec();
  if (K == 0) return initialSpread(traj, which, refine);
  if (!(spec.sigma > 0.0)) throw DomainError("windowed spreads need sigma > 0");
  const double end = static_cast<double>(K) * spec.sigma;
  if (end > traj.horizon() * (1.0 + 1e-12)) throw DomainError("window extends past the trajectory horizon");
  const std::size_t offset = componentOffset(spec, which);
  const auto all = cloudAt(traj, refinedTimes(traj, -spec.tau, end, refine), offset);
  const auto window = cloudAt(traj, refinedTimes(traj, end - spec.sigma, end, refine), offset);
  return crossDiameter(all, window, spec.dim);
}

double minWeight(const Trajectory& traj, double t) {
  return commWeights(traj.spec(), traj, t).minOffDiagonal();
}

// ---------------------------------------------------------------------------

LyapunovFunctional::LyapunovFunctional(const Trajectory& traj, double beta, Component which)
    : traj_(traj), beta_(beta), which_(which) {
  if (!(beta > 0.0)) throw DomainError("functional weight beta must be positive");
  const std::size_t offset = componentOffset(traj.spec(), which);
  const std::size_t n = traj.knotCount();
  rate_.resize(n);
  cumulative_.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) rate_[k] = blockRate(traj.spec(), traj.knotDerivative(k), offset);
  for (std::size_t k = 1; k < n; ++k) {
    cumulative_[k] = cumulative_[k - 1] + 0.5 * (traj.knotTime(k) - traj.knotTime(k - 1)) * (rate_[k] + rate_[k - 1]);
  }
}

double LyapunovFunctional::cumulativeAt(double t) const {
  const std::size_t n = rate_.size();
  if (n < 2 || t <= 0.0) return 0.0;
  const double dt = traj_.step();
  const double u = t / dt;
  std::size_t k = static_cast<std::size_t>(std::floor(u));
  if (k >= n - 1) return cumulative_[n - 1];
  const double th = u - static_cast<double>(k);
  if (th <= 0.0) return cumulative_[k];
  const double r = rate_[k] + th * (rate_[k + 1] - rate_[k]);
  return cumulative_[k] + 0.5 * th * dt * (rate_[k] + r);
}

double LyapunovFunctional::memoryTerm(double t) const {
  const ModelSpec& spec = traj_.spec();
  if (!(t >= 0.0) || t > traj_.horizon() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "functional evaluated at t = " << t << " outside [0, " << traj_.horizon() << "]";
    throw DomainError(os.str());
  }
  const double a = std::max(0.0, t - 2.0 * spec.tau);
  if (!(t > a)) return 0.0;
  const double ct = cumulativeAt(t);
  auto g = [&](double s) { return std::exp(-(t - s)) * (ct - cumulativeAt(s)); };
  const double dt = traj_.step();
  std::size_t k = static_cast<std::size_t>(std::ceil(a / dt));
  double prev = a;
  double gprev = g(a);
  double sum = 0.0;
  for (;; ++k) {
    double s = static_cast<double>(k) * dt;
    if (s <= prev) continue;
    const bool last = s >= t;
    if (last) s = t;
    const double gs = g(s);
    sum += 0.5 * (s - prev) * (gs + gprev);
    prev = s;
    gprev = gs;
    if (last) break;
  }
  return sum;
}

double LyapunovFunctional::operator()(double t) const {
  const double mem = memoryTerm(t);
  std::vector<double> state = traj_.sample(t);
  const double d = which_ == Component::Position ? positionDiameter(traj_.spec(), state)
                                                 : velocityDiameter(traj_.spec(), state);
  return d + beta_ * mem;
}

// ---------------------------------------------------------------------------

void writeSeriesCsv(std::ostream& os, const ObservableSeries& series) {
  writeSeriesCsv(os, std::span<const ObservableSeries>(&series, 1));
}

void writeSeriesCsv(std::ostream& os, std::span<const ObservableSeries> series) {
  os << "t,label,value\n";
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      os << detail::fullPrecision(s.times[k]) << ',' << s.label << ',' << detail::fullPrecision(s.values[k]) << '\n';
    }
  }
}

ObservableSeries sampleDiameter(const Trajectory& traj, Component which, std::size_t every) {
  ObservableSeries out;
  out.label = which == Component::Position ? "d_x" : "d_v";
  for (std::size_t k : sampledIndices(traj.knotCount(), every)) {
    const auto y = traj.knotState(k);
    out.times.push_back(traj.knotTime(k));
    out.values.push_back(which == Component::Position ? positionDiameter(traj.spec(), y)
                                                      : velocityDiameter(traj.spec(), y));
  }
  return out;
}

ObservableSeries sampleFunctional(const LyapunovFunctional& f, const Trajectory& traj, std::size_t every) {
  ObservableSeries out;
  out.label = traj.spec().kind == ModelKind::SecondOrder ? "G" : "F";
  for (std::size_t k : sampledIndices(traj.knotCount(), every)) {
    out.times.push_back(traj.knotTime(k));
    out.values.push_back(f(traj.knotTime(k)));
  }
  return out;
}

ObservableSeries sampleMinWeight(const Trajectory& traj, std::size_t every) {
  ObservableSeries out;
  out.label = "min_weight";
  for (std::size_t k : sampledIndices(traj.knotCount(), every)) {
    out.times.push_back(traj.knotTime(k));
    out.values.push_back(minWeight(traj, traj.knotTime(k)));
  }
  return out;
}

ObservableSeries sampleMaxRate(const Trajectory& traj, Component which, std::size_t every) {
  ObservableSeries out;
  out.label = which == Component::Position ? "max_rate_x" : "max_rate_v";
  const std::size_t offset = componentOffset(traj.spec(), which);
  for (std::size_t k : sampledIndices(traj.knotCount(), every)) {
    out.times.push_back(traj.knotTime(k));
    out.values.push_back(blockRate(traj.spec(), traj.knotDerivative(k), offset));
  }
  return out;
}

// ---------------------------------------------------------------------------

const InequalityCheck* LemmaReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double LemmaReport::worst() const {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.maxViolation);
  return w;
}

namespace {

class ViolationTracker {
 public:
  ViolationTracker(std::string name, double floor) : floor_(floor) { check_.name = std::move(name); }

  void add(double t, double lhs, double rhs) {
    ++check_.samples;
    if (rhs > floor_) check_.maxRatio = std::max(check_.maxRatio, lhs / rhs);
    const double v = (lhs - rhs) / std::max(rhs, floor_);
    if (v > check_.maxViolation) {
      check_.maxViolation = v;
      check_.worstTime = t;
    }
  }

  InequalityCheck result() const { return check_; }

 private:
  double floor_;
  InequalityCheck check_;
};

}  // namespace

LemmaReport verifyLemmaInequalities(const Trajectory& traj, double beta, std::size_t refine) {
  const ModelSpec& spec = traj.spec();
  const Component which = spec.kind == ModelKind::SecondOrder ? Component::Velocity : Component::Position;
  const double spread0 = initialSpread(traj, which, refine);
  const double floor = std::max(1e-12 * spread0, std::numeric_limits<double>::min());
  const std::size_t n = traj.knotCount();
  const double dt = traj.step();
  const double T = traj.horizon();
  LemmaReport report;

  LyapunovFunctional functional(traj, beta, which);
  std::vector<double> state(spec.stateSize());
  auto diam = [&](double t) {
    traj.sample(t, state);
    return which == Component::Position ? positionDiameter(spec, state) : velocityDiameter(spec, state);
  };

  // max rate at t bounded by the diameter at t - tau plus the rate integral
  {
    ViolationTracker tr("derivative-bound", floor);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = traj.knotTime(k);
      if (t < spec.tau) continue;
      const double lhs = functional.maxRate(k);
      const double integral = spec.tau > spec.sigma
                                  ? functional.rateIntegral(t - spec.tau, t - spec.sigma)
                                  : 0.0;
      tr.add(t, lhs, diam(t - spec.tau) + integral);
    }
    report.checks.push_back(tr.result());
  }

  {
    ViolationTracker tr("diameter-below-functional", floor);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = traj.knotTime(k);
      tr.add(t, diam(t), functional(t));
    }
    report.checks.push_back(tr.result());
  }

  if (spec.sigma > 0.0) {
    const std::size_t K = windowCount(spec.sigma, spec.tau);
    const auto z = zSeq(spec.sigma, K);
    ViolationTracker rate("window-rate", floor);
    ViolationTracker spread("window-spread", floor);
    std::vector<double> spreads{spread0};
    for (std::size_t w = 1; w <= K; ++w) {
      const double end = static_cast<double>(w) * spec.sigma;
      if (end > T * (1.0 + 1e-12)) break;
      spreads.push_back(windowedSpread(traj, w, which, refine));
      spread.add(end, spreads.back(), z[w] * spread0);
      const double begin = end - spec.sigma;
      double m = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double t = traj.knotTime(k);
        if (t >= begin - 1e-12 * dt && t <= end + 1e-12 * dt) m = std::max(m, functional.maxRate(k));
      }
      rate.add(end, m, spreads[w - 1]);
    }
    report.checks.push_back(rate.result());
    report.checks.push_back(spread.result());

    ViolationTracker bound("functional-bound", floor);
    const double cz = calZ(spec.sigma, spec.tau, K, beta);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = traj.knotTime(k);
      if (t > 2.0 * spec.tau * (1.0 + 1e-12)) break;
      bound.add(t, functional(t), cz * spread0);
    }
    report.checks.push_back(bound.result());
  }

  if (spec.kind == ModelKind::SecondOrder) {
    ViolationTracker tr("position-drift", floor);
    double integral = 0.0;
    double prev = velocityDiameter(spec, traj.knotState(0));
    const double dx0 = positionDiameter(spec, traj.knotState(0));
    for (std::size_t k = 0; k < n; ++k) {
      const double dv = velocityDiameter(spec, traj.knotState(k));
      if (k > 0) integral += 0.5 * (traj.knotTime(k) - traj.knotTime(k - 1)) * (dv + prev);
      prev = dv;
      tr.add(traj.knotTime(k), positionDiameter(spec, traj.knotState(k)), dx0 + integral);
    }
    report.checks.push_back(tr.result());
  }
  return report;
}

// ---------------------------------------------------------------------------

double decayRateFit(const ObservableSeries& series, double fraction, double floor) {
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < series.values.size(); ++k) {
    if (series.values[k] > floor) usable.push_back(k);
  }
  fraction = std::clamp(fraction, 0.0, 1.0);
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(usable.size())));
  if (keep < 2) throw DomainError("decay fit needs at least two positive samples in the window");
  const std::size_t first = usable.size() - keep;
  double st = 0.0, sy = 0.0;
  for (std::size_t q = first; q < usable.size(); ++q) {
    st += series.times[usable[q]];
    sy += std::log(series.values[usable[q]]);
  }
  const double mt = st / static_cast<double>(keep);
  const double my = sy / static_cast<double>(keep);
  double num = 0.0, den = 0.0;
  for (std::size_t q = first; q < usable.size(); ++q) {
    const double dt = series.times[usable[q]] - mt;
    num += dt * (std::log(series.values[usable[q]]) - my);
    den += dt * dt;
  }
  if (!(den > 0.0)) throw DomainError("decay fit needs distinct sample times");
  return -num / den;
}

}  // namespace delayflock
