#include "delayflock/influence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "delayflock/errors.hpp"

namespace delayflock {

namespace {

double interpolate(const std::vector<InfluenceFunction::Knot>& knots, double s) {
  if (s >= knots.back().s) return knots.back().value;
  auto it = std::upper_bound(knots.begin(), knots.end(), s,
                             [](double x, const InfluenceFunction::Knot& k) { return x < k.s; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (s - lo.s) / (hi.s - lo.s);
  return lo.value + w * (hi.value - lo.value);
}

}  // namespace

InfluenceFunction::InfluenceFunction() : InfluenceFunction(InfluenceFamily::Constant, 1.0, {}) {}

InfluenceFunction::InfluenceFunction(InfluenceFamily family, double param, std::vector<Knot> knots)
    : family_(family), param_(param), knots_(std::move(knots)) {}

InfluenceFunction InfluenceFunction::constant(double level) {
  if (!(level > 0.0) || !(level <= 1.0)) {
    throw ConfigError("constant influence level must lie in (0, 1]");
  }
  return InfluenceFunction(InfluenceFamily::Constant, level, {});
}

InfluenceFunction InfluenceFunction::powerLaw(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("power-law exponent must be finite and nonnegative");
  }
  return InfluenceFunction(InfluenceFamily::PowerLaw, alpha, {});
}

InfluenceFunction InfluenceFunction::tabulated(std::vector<Knot> knots) {
  if (knots.empty()) throw ConfigError("tabulated influence needs at least one knot");
  if (knots.front().s != 0.0) throw ConfigError("tabulated influence must start at s = 0");
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const auto& kn = knots[k];
    if (!std::isfinite(kn.s) || !std::isfinite(kn.value)) {
      throw ConfigError("tabulated influence knots must be finite");
    }
    if (!(kn.value > 0.0)) throw ConfigError("tabulated influence must be globally positive");
    // sup psi <= 1 is required; rescaling is left to the caller.
    if (kn.value > 1.0) throw ConfigError("tabulated influence exceeds 1; rescale it first");
    if (k > 0 && !(kn.s > knots[k - 1].s)) {
      throw ConfigError("tabulated influence knots must be strictly increasing in s");
    }
  }
  return InfluenceFunction(InfluenceFamily::Tabulated, 0.0, std::move(knots));
}

double InfluenceFunction::operator()(double s) const {
  if (!(s >= 0.0)) throw DomainError("influence function evaluated at a negative distance");
  switch (family_) {
    case InfluenceFamily::Constant:
      return param_;
    case InfluenceFamily::PowerLaw:
      return std::pow(1.0 + s, -param_);
    case InfluenceFamily::Tabulated: {
      if (source_.empty()) return interpolate(knots_, s);
      // min over [0, s] of a piecewise-linear function: the smaller of its
      // value at s and its smallest knot value up to s
      auto it = std::upper_bound(source_.begin(), source_.end(), s,
                                 [](double x, const Knot& k) { return x < k.s; });
      const double floor = prefixMin_[static_cast<std::size_t>(it - source_.begin()) - 1];
      return std::min(interpolate(source_, s), floor);
    }
  }
  return param_;
}

bool InfluenceFunction::isNonincreasing() const {
  if (family_ != InfluenceFamily::Tabulated) return true;
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (knots_[k].value > knots_[k - 1].value) return false;
  }
  return true;
}

InfluenceFunction InfluenceFunction::rearranged() const {
  if (isNonincreasing()) return *this;

  // Knot form of the running minimum: where a segment dips below the running
  // minimum, a knot is inserted at the crossing. Evaluation goes through the
  // source knots so the result never exceeds the original function.
  std::vector<Knot> out;
  out.reserve(knots_.size() * 2);
  out.push_back(knots_.front());
  double runMin = knots_.front().value;
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    const Knot& a = knots_[k - 1];
    const Knot& b = knots_[k];
    if (b.value < runMin) {
      if (a.value > runMin) {
        const double w = (a.value - runMin) / (a.value - b.value);
        const double sc = a.s + w * (b.s - a.s);
        if (sc > out.back().s && sc < b.s) out.push_back({sc, runMin});
      }
      runMin = b.value;
    }
    out.push_back({b.s, runMin});
  }
  InfluenceFunction g(InfluenceFamily::Tabulated, 0.0, std::move(out));
  g.source_ = knots_;
  g.prefixMin_.reserve(knots_.size());
  double m = knots_.front().value;
  for (const auto& k : knots_) {
    m = std::min(m, k.value);
    g.prefixMin_.push_back(m);
  }
  return g;
}

std::string InfluenceFunction::describe() const {
  std::ostringstream os;
  switch (family_) {
    case InfluenceFamily::Constant:
      os << "constant(level=" << param_ << ")";
      break;
    case InfluenceFamily::PowerLaw:
      os << "power-law(alpha=" << param_ << ")";
      break;
    case InfluenceFamily::Tabulated:
      os << "tabulated(" << knots_.size() << " knots)";
      break;
  }
  return os.str();
}

double evalInfluence(const InfluenceFunction& f, double s) { return f(s); }

InfluenceFunction rearrange(const InfluenceFunction& f) { return f.rearranged(); }

void to_json(nlohmann::json& j, const InfluenceFunction& f) {
  switch (f.family()) {
    case InfluenceFamily::Constant:
      j = {{"family", "constant"}, {"params", {{"level", f.level()}}}};
      break;
    case InfluenceFamily::PowerLaw:
      j = {{"family", "power-law"}, {"params", {{"alpha", f.exponent()}}}};
      break;
    case InfluenceFamily::Tabulated: {
      auto knots = nlohmann::json::array();
      for (const auto& k : f.knots()) knots.push_back({k.s, k.value});
      j = {{"family", "tabulated"}, {"params", {{"knots", knots}}}};
      break;
    }
  }
}

void from_json(const nlohmann::json& j, InfluenceFunction& f) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
    throw ConfigError("influence must be an object with a string 'family'");
  }
  const std::string family = j.at("family").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  auto number = [&](const char* key, double fallback) {
    if (!params.contains(key)) return fallback;
    if (!params.at(key).is_number()) throw ConfigError(std::string("influence param '") + key + "' must be a number");
    return params.at(key).get<double>();
  };
  if (family == "constant") {
    f = InfluenceFunction::constant(number("level", 1.0));
  } else if (family == "power-law") {
    if (!params.contains("alpha")) throw ConfigError("power-law influence requires params.alpha");
    f = InfluenceFunction::powerLaw(number("alpha", 0.0));
  } else if (family == "tabulated") {
    if (!params.contains("knots") || !params.at("knots").is_array()) {
      throw ConfigError("tabulated influence requires params.knots = [[s, psi], ...]");
    }
    std::vector<InfluenceFunction::Knot> knots;
    for (const auto& k : params.at("knots")) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
        throw ConfigError("each tabulated knot must be a pair [s, psi]");
      }
      knots.push_back({k[0].get<double>(), k[1].get<double>()});
    }
    f = InfluenceFunction::tabulated(std::move(knots));
  } else {
    throw ConfigError("unknown influence family '" + family + "'");
  }
}

}  // namespace delayflock
