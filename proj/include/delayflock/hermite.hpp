#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace delayflock {

/// Piecewise cubic Hermite interpolant of a vector-valued function of time.
///
/// Each knot carries a value and a slope of `width` components. Knots may be
/// uniformly spaced (constant-time lookup) or arbitrary but strictly
/// increasing. Queries exactly at a knot return the stored value/slope.
class HermiteTable {
 public:
  HermiteTable() = default;

  /// Uniform grid starting at `t0` with spacing `dt`; knots are appended
  /// with push().
  HermiteTable(double t0, double dt, std::size_t width);

  /// Arbitrary strictly increasing knot times; values/slopes appended later.
  HermiteTable(std::vector<double> times, std::size_t width);

  void reserve(std::size_t knots);
  void push(std::span<const double> value, std::span<const double> slope);

  std::size_t width() const { return width_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  double time(std::size_t k) const;
  double front() const { return time(0); }
  double back() const { return time(count_ - 1); }

  std::span<const double> value(std::size_t k) const;
  std::span<const double> slope(std::size_t k) const;
  std::span<double> mutableSlope(std::size_t k);

  /// Interpolated value; t is clamped to [front, back].
  void evaluate(double t, std::span<double> out) const;
  void derivative(double t, std::span<double> out) const;

  /// Exact integral of the interpolant over [a, b] (clamped), componentwise.
  void integral(double a, double b, std::span<double> out) const;

 private:
  // Segment index k and local coordinate theta in [0, 1]; theta == 0 means
  // the query sits exactly on knot k.
  void locate(double t, std::size_t& k, double& theta) const;

  bool uniform_ = false;
  double t0_ = 0.0;
  double dt_ = 0.0;
  std::vector<double> times_;
  std::size_t width_ = 0;
  std::size_t count_ = 0;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

/// Fourth-order finite-difference slopes for a uniformly sampled sequence
/// (needs at least 5 samples; fewer fall back to lower-order stencils).
void uniformSlopes(std::span<const double> samples, std::size_t width, double dt,
                   std::span<double> slopes);

}  // namespace delayflock
