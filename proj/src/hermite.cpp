#include "delayflock/hermite.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace delayflock {

HermiteTable::HermiteTable(double t0, double dt, std::size_t width)
    : uniform_(true), t0_(t0), dt_(dt), width_(width) {
  if (!(dt > 0.0)) throw std::invalid_argument("HermiteTable: spacing must be positive");
}

HermiteTable::HermiteTable(std::vector<double> times, std::size_t width)
    : uniform_(false), times_(std::move(times)), width_(width) {
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) {
      throw std::invalid_argument("HermiteTable: knot times must be strictly increasing");
    }
  }
}

void HermiteTable::reserve(std::size_t knots) {
  values_.reserve(knots * width_);
  slopes_.reserve(knots * width_);
}

void HermiteTable::push(std::span<const double> value, std::span<const double> slope) {
  assert(value.size() == width_ && slope.size() == width_);
  if (!uniform_ && count_ >= times_.size()) {
    throw std::logic_error("HermiteTable: more knots pushed than times declared");
  }
  values_.insert(values_.end(), value.begin(), value.end());
  slopes_.insert(slopes_.end(), slope.begin(), slope.end());
  ++count_;
}

double HermiteTable::time(std::size_t k) const {
  return uniform_ ? t0_ + static_cast<double>(k) * dt_ : times_[k];
}

std::span<const double> HermiteTable::value(std::size_t k) const {
  return {values_.data() + k * width_, width_};
}

std::span<const double> HermiteTable::slope(std::size_t k) const {
  return {slopes_.data() + k * width_, width_};
}

std::span<double> HermiteTable::mutableSlope(std::size_t k) {
  return {slopes_.data() + k * width_, width_};
}

void HermiteTable::locate(double t, std::size_t& k, double& theta) const {
  if (count_ < 2) {
    k = 0;
    theta = 0.0;
    return;
  }
  const std::size_t last = count_ - 1;
  if (uniform_) {
    double u = (t - t0_) / dt_;
    if (!(u > 0.0)) u = 0.0;
    if (u > static_cast<double>(last)) u = static_cast<double>(last);
    const double r = std::round(u);
    if (std::abs(u - r) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, u)) {
      k = static_cast<std::size_t>(r);
      theta = 0.0;
      return;
    }
    k = static_cast<std::size_t>(std::floor(u));
    theta = u - static_cast<double>(k);
    return;
  }
  if (t <= times_.front()) {
    k = 0;
    theta = 0.0;
    return;
  }
  if (t >= times_[last]) {
    k = last;
    theta = 0.0;
    return;
  }
  auto it = std::upper_bound(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(count_), t);
  k = static_cast<std::size_t>(it - times_.begin()) - 1;
  theta = times_[k] == t ? 0.0 : (t - times_[k]) / (times_[k + 1] - times_[k]);
}

void HermiteTable::evaluate(double t, std::span<double> out) const {
  std::size_t k;
  double th;
  locate(t, k, th);
  const auto y0 = value(k);
  if (th == 0.0) {
    std::copy(y0.begin(), y0.end(), out.begin());
    return;
  }
  const auto y1 = value(k + 1);
  const auto m0 = slope(k);
  const auto m1 = slope(k + 1);
  const double len = time(k + 1) - time(k);
  const double t2 = th * th;
  const double t3 = t2 * th;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = (t3 - 2.0 * t2 + th) * len;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = (t3 - t2) * len;
  for (std::size_t c = 0; c < width_; ++c) {
    out[c] = h00 * y0[c] + h10 * m0[c] + h01 * y1[c] + h11 * m1[c];
  }
}

void HermiteTable::derivative(double t, std::span<double> out) const {
  std::size_t k;
  double th;
  locate(t, k, th);
  const auto m0 = slope(k);
  if (th == 0.0) {
    std::copy(m0.begin(), m0.end(), out.begin());
    return;
  }
  const auto y0 = value(k);
  const auto y1 = value(k + 1);
  const auto m1 = slope(k + 1);
  const double len = time(k + 1) - time(k);
  const double t2 = th * th;
  const double d00 = (6.0 * t2 - 6.0 * th) / len;
  const double d10 = 3.0 * t2 - 4.0 * th + 1.0;
  const double d01 = (-6.0 * t2 + 6.0 * th) / len;
  const double d11 = 3.0 * t2 - 2.0 * th;
  for (std::size_t c = 0; c < width_; ++c) {
    out[c] = d00 * y0[c] + d10 * m0[c] + d01 * y1[c] + d11 * m1[c];
  }
}

void HermiteTable::integral(double a, double b, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (count_ < 2) return;
  const double lo = std::clamp(std::min(a, b), front(), back());
  const double hi = std::clamp(std::max(a, b), front(), back());
  const double sign = a <= b ? 1.0 : -1.0;

  // Accumulates the integral over [time(k), time(k) + theta * len].
  auto partial = [&](std::size_t k, double th, double weight) {
    const double len = time(k + 1) - time(k);
    const double t2 = th * th;
    const double t3 = t2 * th;
    const double t4 = t3 * th;
    const double i00 = len * (0.5 * t4 - t3 + th);
    const double i10 = len * len * (0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2);
    const double i01 = len * (-0.5 * t4 + t3);
    const double i11 = len * len * (0.25 * t4 - t3 / 3.0);
    const auto y0 = value(k);
    const auto y1 = value(k + 1);
    const auto m0 = slope(k);
    const auto m1 = slope(k + 1);
    for (std::size_t c = 0; c < width_; ++c) {
      out[c] += weight * (i00 * y0[c] + i10 * m0[c] + i01 * y1[c] + i11 * m1[c]);
    }
  };

  std::size_t ka, kb;
  double tha, thb;
  locate(lo, ka, tha);
  locate(hi, kb, thb);
  if (kb == count_ - 1) {  // hi on the final knot
    kb = count_ - 2;
    thb = 1.0;
  }
  if (ka == count_ - 1) return;
  // integral = F(hi) - F(lo) measured from time(ka)
  for (std::size_t k = ka; k < kb; ++k) partial(k, 1.0, sign);
  partial(kb, thb, sign);
  partial(ka, tha, -sign);
}

void uniformSlopes(std::span<const double> samples, std::size_t width, double dt,
                   std::span<double> slopes) {
  const std::size_t n = samples.size() / width;
  auto y = [&](std::size_t k, std::size_t c) { return samples[k * width + c]; };
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t k = 0; k < n; ++k) {
      double d = 0.0;
      if (n >= 5) {
        if (k >= 2 && k + 2 < n) {
          d = (y(k - 2, c) - 8.0 * y(k - 1, c) + 8.0 * y(k + 1, c) - y(k + 2, c)) / (12.0 * dt);
        } else if (k == 0) {
          d = (-25.0 * y(0, c) + 48.0 * y(1, c) - 36.0 * y(2, c) + 16.0 * y(3, c) - 3.0 * y(4, c)) / (12.0 * dt);
        } else if (k == 1) {
          d = (-3.0 * y(0, c) - 10.0 * y(1, c) + 18.0 * y(2, c) - 6.0 * y(3, c) + y(4, c)) / (12.0 * dt);
        } else if (k == n - 1) {
          const std::size_t e = n - 1;
          d = (25.0 * y(e, c) - 48.0 * y(e - 1, c) + 36.0 * y(e - 2, c) - 16.0 * y(e - 3, c) + 3.0 * y(e - 4, c)) / (12.0 * dt);
        } else {  // k == n - 2
          const std::size_t e = n - 1;
          d = (3.0 * y(e, c) + 10.0 * y(e - 1, c) - 18.0 * y(e - 2, c) + 6.0 * y(e - 3, c) - y(e - 4, c)) / (12.0 * dt);
        }
      } else if (n >= 3) {
        if (k == 0) {
          d = (-3.0 * y(0, c) + 4.0 * y(1, c) - y(2, c)) / (2.0 * dt);
        } else if (k == n - 1) {
          d = (3.0 * y(k, c) - 4.0 * y(k - 1, c) + y(k - 2, c)) / (2.0 * dt);
        } else {
          d = (y(k + 1, c) - y(k - 1, c)) / (2.0 * dt);
        }
      } else if (n == 2) {
        d = (y(1, c) - y(0, c)) / dt;
      }
      slopes[k * width + c] = d;
    }
  }
}

}  // namespace delayflock
