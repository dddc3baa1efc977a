#include <doctest.h>

#include <cmath>
#include <vector>

#include "delayflock/hermite.hpp"

using namespace delayflock;

TEST_SUITE("hermite") {

TEST_CASE("cubic data is reproduced exactly on uniform and nonuniform grids") {
  auto p = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t; };
  auto dp = [](double t) { return -2.0 + t - 0.75 * t * t; };
  HermiteTable uni(-1.0, 0.25, 1);
  std::vector<double> times{-1.0, -0.7, -0.1, 0.3, 1.0};
  HermiteTable non(times, 1);
  for (int k = 0; k <= 8; ++k) {
    const double t = -1.0 + 0.25 * k;
    const double v = p(t), s = dp(t);
    uni.push({&v, 1}, {&s, 1});
  }
  for (double t : times) {
    const double v = p(t), s = dp(t);
    non.push({&v, 1}, {&s, 1});
  }
  for (double t = -1.0; t <= 1.0; t += 0.013) {
    double a = 0, b = 0, da = 0;
    uni.evaluate(t, {&a, 1});
    non.evaluate(t, {&b, 1});
    uni.derivative(t, {&da, 1});
    CHECK(a == doctest::Approx(p(t)).epsilon(1e-13));
    CHECK(b == doctest::Approx(p(t)).epsilon(1e-13));
    CHECK(da == doctest::Approx(dp(t)).epsilon(1e-12));
  }
  double I = 0;
  uni.integral(-0.8, 0.9, {&I, 1});
  auto P = [](double t) { return t - t * t + t * t * t / 6.0 - t * t * t * t / 16.0; };
  CHECK(I == doctest::Approx(P(0.9) - P(-0.8)).epsilon(1e-13));
  non.integral(0.9, -0.8, {&I, 1});
  CHECK(I == doctest::Approx(P(-0.8) - P(0.9)).epsilon(1e-13));
}

TEST_CASE("knot queries return stored data bit for bit") {
  HermiteTable tab(0.0, 0.1, 2);
  for (int k = 0; k < 20; ++k) {
    const double v[2] = {std::sin(0.37 * k), std::cos(1.3 * k)};
    const double s[2] = {0.1 * k, -0.2 * k};
    tab.push(v, s);
  }
  for (std::size_t k = 0; k < tab.size(); ++k) {
    double v[2], s[2];
    tab.evaluate(tab.time(k), v);
    tab.derivative(tab.time(k), s);
    CHECK(v[0] == tab.value(k)[0]);
    CHECK(v[1] == tab.value(k)[1]);
    CHECK(s[0] == tab.slope(k)[0]);
    CHECK(s[1] == tab.slope(k)[1]);
  }
}

TEST_CASE("finite-difference slopes are exact for quartics") {
  auto q = [](double t) { return 3.0 - t + 2.0 * t * t - t * t * t + 0.5 * t * t * t * t; };
  auto dq = [](double t) { return -1.0 + 4.0 * t - 3.0 * t * t + 2.0 * t * t * t; };
  const double dt = 0.1;
  std::vector<double> samples, slopes(11);
  for (int k = 0; k <= 10; ++k) samples.push_back(q(-1.0 + dt * k));
  uniformSlopes(samples, 1, dt, slopes);
  for (int k = 0; k <= 10; ++k) CHECK(slopes[k] == doctest::Approx(dq(-1.0 + dt * k)).epsilon(1e-10));
}

}
