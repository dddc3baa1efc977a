#pragma once

// Reference computations written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

inline double bruteDiameter(const std::vector<std::vector<double>>& pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < pts[i].size(); ++c) sq += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
      best = std::max(best, std::sqrt(sq));
    }
  }
  return best;
}

// Z^K from the first-order form Z^K = 1 + (1+s) Z^{K-1} + s sum_{k<K} Z^k,
// in extended precision.
inline std::vector<long double> zBySum(long double sigma, std::size_t K) {
  std::vector<long double> z{1.0L};
  for (std::size_t k = 1; k <= K; ++k) {
    long double sum = 0.0L;
    for (long double v : z) sum += v;
    z.push_back(1.0L + (1.0L + sigma) * z.back() + sigma * sum);
  }
  return z;
}

// Root of e^{x tau}(e^{x tau} alpha + gamma) + x - eta by the Illinois
// variant of regula falsi in extended precision.
inline long double halanayIllinois(long double alpha, long double gamma, long double eta, long double tau) {
  auto f = [&](long double x) {
    const long double e = std::exp(x * tau);
    return e * (e * alpha + gamma) + x - eta;
  };
  long double a = 0.0L, b = eta, fa = f(a), fb = f(b);
  int side = 0;
  for (int it = 0; it < 500; ++it) {
    const long double c = (a * fb - b * fa) / (fb - fa);
    const long double fc = f(c);
    if (fc == 0.0L || std::fabs(b - a) < 1e-19L) return c;
    if (fc * fb > 0) {
      b = c;
      fb = fc;
      if (side == -1) fa /= 2;
      side = -1;
    } else {
      a = c;
      fa = fc;
      if (side == 1) fb /= 2;
      side = 1;
    }
  }
  return (a + b) / 2;
}

// Principal Lambert W by Halley iteration in extended precision.
inline long double lambertHalley(long double s) {
  long double w = s < 1 ? s : std::log(s);
  for (int it = 0; it < 100; ++it) {
    const long double ew = std::exp(w);
    const long double f = w * ew - s;
    const long double next = w - f / (ew * (w + 1) - (w + 2) * f / (2 * w + 2));
    if (std::fabs(next - w) < 1e-19L) return next;
    w = next;
  }
  return w;
}

// min over a uniform grid of [0, u] with spacing `step`.
inline double runningMinGrid(const std::function<double(double)>& f, double u, double step) {
  double m = f(0.0);
  for (double s = step; s < u; s += step) m = std::min(m, f(s));
  return std::min(m, f(u));
}

// Exact solution of u' = -2 u(t - tau) with u = 1 on [-tau, 0]: piece k on
// [k tau, (k+1) tau] is a polynomial in the local variable s = t - k tau.
class DoubledDelayExact {
 public:
  DoubledDelayExact(double tau, std::size_t pieces) : tau_(tau) {
    std::vector<double> prev{1.0};
    for (std::size_t k = 0; k < pieces; ++k) {
      std::vector<double> next(prev.size() + 1, 0.0);
      next[0] = eval(prev, tau_);
      for (std::size_t q = 0; q < prev.size(); ++q) next[q + 1] = -2.0 * prev[q] / static_cast<double>(q + 1);
      pieces_.push_back(next);
      prev = next;
    }
  }

  double operator()(double t) const {
    if (t <= 0.0) return 1.0;
    std::size_t k = static_cast<std::size_t>(t / tau_);
    if (k >= pieces_.size()) k = pieces_.size() - 1;
    return eval(pieces_[k], t - static_cast<double>(k) * tau_);
  }

 private:
  static double eval(const std::vector<double>& p, double s) {
    double acc = 0.0;
    for (std::size_t q = p.size(); q-- > 0;) acc = acc * s + p[q];
    return acc;
  }
  double tau_;
  std::vector<std::vector<double>> pieces_;
};

// int_0^{w} e^{-u} u du
inline double weightedRamp(double w) { return 1.0 - (1.0 + w) * std::exp(-w); }

// Least-squares slope of log(err) against log(h).
inline double fittedOrder(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = h.size();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(h[k]);
    my += std::log(err[k]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < n; ++k) {
    num += (std::log(h[k]) - mx) * (std::log(err[k]) - my);
    den += (std::log(h[k]) - mx) * (std::log(h[k]) - mx);
  }
  return num / den;
}

}  // namespace oracle
