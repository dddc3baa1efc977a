#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace delayflock {

enum class InfluenceFamily { Constant, PowerLaw, Tabulated };

/// Communication kernel psi mapping a pairwise distance s >= 0 to an
/// interaction strength in (0, 1].
///
/// Three families are supported:
///  - constant:  psi(s) = c with c in (0, 1];
///  - power-law: psi(s) = (1 + s)^(-alpha) with alpha >= 0;
///  - tabulated: linear interpolation through (s, psi) knots starting at
///    s = 0, extended by the last knot value beyond the table.
///
/// Instances are immutable; evaluation is pure.
class InfluenceFunction {
 public:
  struct Knot {
    double s;
    double value;
  };

  /// psi identically 1.
  InfluenceFunction();

  static InfluenceFunction constant(double level);
  static InfluenceFunction powerLaw(double alpha);
  static InfluenceFunction tabulated(std::vector<Knot> knots);

  InfluenceFamily family() const { return family_; }
  double level() const { return param_; }
  double exponent() const { return param_; }
  const std::vector<Knot>& knots() const { return knots_; }

  /// Throws DomainError for s < 0 or NaN.
  double operator()(double s) const;

  /// Nonincreasing rearrangement u -> min_{s in [0,u]} psi(s).
  InfluenceFunction rearranged() const;

  bool isNonincreasing() const;

  /// Short human-readable form, e.g. "power-law(alpha=0.5)".
  std::string describe() const;

 private:
  InfluenceFunction(InfluenceFamily family, double param, std::vector<Knot> knots);

  InfluenceFamily family_;
  double param_;
  std::vector<Knot> knots_;
  // Set on rearranged tabulated functions: original knots and their
  // running minimum.
  std::vector<Knot> source_;
  std::vector<double> prefixMin_;
};

double evalInfluence(const InfluenceFunction& f, double s);
InfluenceFunction rearrange(const InfluenceFunction& f);

// {"family": "constant" | "power-law" | "tabulated", "params": {...}}
void to_json(nlohmann::json& j, const InfluenceFunction& f);
void from_json(const nlohmann::json& j, InfluenceFunction& f);

}  // namespace delayflock
