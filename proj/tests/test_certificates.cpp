#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "delayflock/certificates.hpp"
#include "delayflock/errors.hpp"
#include "oracles.hpp"

using namespace delayflock;

TEST_SUITE("certificates") {

TEST_CASE("amplification sequence examples") {
  for (double s : {0.01, 0.3, 1.0, 2.0}) {
    const auto z = zSeq(s, 1);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == doctest::Approx(2.0 * (1.0 + s)).epsilon(1e-15));
  }
  CHECK(zSeq(1.0, 2)[2] == doctest::Approx(14.0).epsilon(1e-15));
  const auto half = zSeq(0.5, 3);
  const double frozen[] = {1.0, 3.0, 7.5, 18.0};
  for (int k = 0; k < 4; ++k) CHECK(half[k] == doctest::Approx(frozen[k]).epsilon(1e-14));
  CHECK_THROWS_AS(zSeq(0.0, 3), DomainError);
  CHECK_THROWS_AS(zSeq(-1.0, 3), DomainError);
}

TEST_CASE("sequence agrees with the closed form and an independent sum") {
  for (double s : {0.01, 0.1, 0.5, 1.0, 2.0}) {
    const auto z = zSeq(s, 25);
    const auto ref = oracle::zBySum(s, 25);
    for (std::size_t k = 0; k <= 25; ++k) {
      CHECK(std::abs(zClosedForm(s, k) - z[k]) <= 1e-10 * z[k]);
      CHECK(std::abs(static_cast<double>(ref[k]) - z[k]) <= 1e-12 * z[k]);
      if (k > 0) CHECK(z[k - 1] <= z[k]);
    }
  }
}

TEST_CASE("window count") {
  CHECK(windowCount(0.1, 0.1) == 2);
  CHECK(windowCount(0.3, 0.1) == 1);
  CHECK(windowCount(0.02, 0.1) == 10);
  CHECK(windowCount(0.07, 0.1) == 3);
  for (double s : {0.013, 0.05, 0.07, 0.1}) {
    const double tau = 0.1;
    const auto K = static_cast<double>(windowCount(s, tau));
    CHECK(K * s >= 2 * tau * (1 - 1e-12));
    CHECK((K - 1) * s < 2 * tau);
  }
}

TEST_CASE("bootstrap constant") {
  const auto z = zSeq(0.4, 3);
  CHECK(calZ(0.4, 0.3, 3, 1e-300) == z[3]);
  CHECK(calZ(0.4, 0.0, 3, 5.0) == z[3]);
  const double expect = 14.0 + 4.0 * (1.0 - 3.0 * std::exp(-2.0));
  CHECK(calZ(1.0, 1.0, 2, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(calZ(1.0, 1.0, 2, 1.0) == doctest::Approx(16.3759766011606).epsilon(1e-12));
}

TEST_CASE("position constant") {
  for (double s : {0.1, 0.5, 1.0, 3.0}) CHECK(calW(s, 1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(calW(1.0, 2) == doctest::Approx(4.0).epsilon(1e-14));
  const auto ref = oracle::zBySum(0.5L, 3);
  const double viaSum = static_cast<double>(0.5L * (ref[1] + ref[2]));
  CHECK(std::abs(calW(0.5, 3) - viaSum) <= 1e-12);
  CHECK(calW(0.5, 3) == doctest::Approx(5.25).epsilon(1e-14));
}

TEST_CASE("Halanay rate examples") {
  CHECK(halanayGamma(0.1, 0.2, 1.0, 0.0) == doctest::Approx(0.7).epsilon(1e-15));
  const double g = halanayGamma(0.4, 0.3, 1.0, 0.1);
  CHECK(halanayResidual(0.0, 0.4, 0.3, 1.0, 0.1) < 0.0);
  CHECK(halanayResidual(0.3, 0.4, 0.3, 1.0, 0.1) > 0.0);
  CHECK(g > 0.0);
  CHECK(g < 0.3);
  CHECK(std::abs(halanayResidual(g, 0.4, 0.3, 1.0, 0.1)) <= 1e-12);
  CHECK(g == doctest::Approx(static_cast<double>(oracle::halanayIllinois(0.4L, 0.3L, 1.0L, 0.1L))).epsilon(1e-14));
  CHECK(g == doctest::Approx(0.269637588477883057).epsilon(1e-14));
  CHECK_THROWS_AS(halanayGamma(0.5, 0.6, 1.0, 0.1), HypothesisError);
  CHECK_THROWS_AS(halanayGamma(0.5, 0.5, 1.0, 0.1), HypothesisError);
}

TEST_CASE("Halanay rate is monotone in every argument") {
  const double base[4] = {0.2, 0.15, 0.9, 0.2};
  auto at = [&](int which, double delta) {
    double p[4] = {base[0], base[1], base[2], base[3]};
    p[which] += delta;
    return halanayGamma(p[0], p[1], p[2], p[3]);
  };
  const double g0 = at(0, 0.0);
  CHECK(at(0, 0.01) < g0);
  CHECK(at(1, 0.01) < g0);
  CHECK(at(2, 0.01) > g0);
  CHECK(at(3, 0.01) < g0);
  for (double a = 0.05; a < 0.5; a += 0.05) {
    for (double tau = 0.0; tau < 1.0; tau += 0.1) {
      const double x = halanayGamma(a, 0.2, 1.0, tau);
      CHECK(x == doctest::Approx(static_cast<double>(oracle::halanayIllinois(a, 0.2L, 1.0L, tau))).epsilon(1e-13));
    }
  }
}

TEST_CASE("Lambert W") {
  CHECK(lambertW(0.0) == 0.0);
  CHECK(lambertW(std::numbers::e) == doctest::Approx(1.0).epsilon(1e-15));
  const double w = lambertW(std::numbers::e / 2);
  CHECK(w == doctest::Approx(static_cast<double>(oracle::lambertHalley(std::exp(1.0L) / 2))).epsilon(1e-14));
  CHECK(w == doctest::Approx(0.685076942154594).epsilon(1e-14));
  CHECK(linearDelayThreshold() == doctest::Approx(0.157461528922703).epsilon(1e-13));
  for (double s = 0.0; s < 50.0; s += 0.37) {
    const double x = lambertW(s);
    CHECK(std::abs(x * std::exp(x) - s) <= 1e-13 * std::max(1.0, s));
  }
}

TEST_CASE("smallest admissible beta") {
  CHECK(betaMin(0.0) == 0.0);
  const double b = betaMin(0.1);
  CHECK(b == doctest::Approx(0.4 / (2.0 * std::exp(-0.2) - 1.0)).epsilon(1e-14));
  CHECK(b == doctest::Approx(0.627488869739115672).epsilon(1e-14));
  for (double tau : {0.01, 0.1, 0.2, 0.3, 0.346}) {
    const double x = betaMin(tau);
    CHECK(4.0 * tau <= x * (2.0 * std::exp(-2.0 * tau) - 1.0));
  }
  const double big = betaMin(0.346);
  CHECK(std::isfinite(big));
  CHECK(big > 100.0);
  CHECK_THROWS_AS(betaMin(std::log(2.0) / 2), HypothesisError);
  CHECK_THROWS_AS(betaMin(0.5), HypothesisError);
}

TEST_CASE("consensus certificate examples") {
  const InfluenceFunction one;
  const auto c = certifyConsensus(0.1, 0.1, 2.0, one);
  REQUIRE(c.certified());
  const double e = std::exp(-0.2);
  const double reduced = 0.4 * e / (2.0 * e - 1.0);
  CHECK(reduced == doctest::Approx(0.513744434869558).epsilon(1e-13));
  CHECK(c.beta == betaMin(0.1));
  CHECK(c.alpha + c.gamma == doctest::Approx(reduced).epsilon(1e-12));
  CHECK(c.eta == 1.0);
  CHECK(c.K == 2);
  CHECK(c.envelope.onset == doctest::Approx(0.2));
  CHECK(c.envelope.rate == c.rate);
  CHECK(c.envelope.amplitude == doctest::Approx(c.calZ * 2.0));

  CHECK(toString(certifyConsensus(0.2, 0.2, 2.0, one).verdict) == "not-certified");
  const auto zero = certifyConsensus(0.0, 0.0, 1000.0, InfluenceFunction::powerLaw(2.0));
  CHECK(zero.certified());
  CHECK(toString(certifyConsensus(0.0, 0.1, 1.0, one).verdict) == "outside-hypotheses");
  const auto far = certifyConsensus(0.2, 0.4, 1.0, one);
  CHECK(toString(far.verdict) == "not-certified");
  CHECK(far.reason.find("no admissible") != std::string::npos);
}

TEST_CASE("certified consensus satisfies its own hypotheses") {
  for (double tau : {0.02, 0.05, 0.1, 0.14}) {
    for (double sigma : {tau / 3.0, tau / 2.0, tau}) {
      for (double dx : {0.1, 1.0, 5.0}) {
        const auto c = certifyConsensus(sigma, tau, dx, InfluenceFunction::powerLaw(0.5));
        if (!c.certified()) continue;
        CHECK(c.alpha + c.gamma < c.eta);
        CHECK(c.rate > 0.0);
        CHECK(c.rate < c.eta);
        CHECK(std::abs(halanayResidual(c.rate, c.alpha, c.gamma, c.eta, tau)) <= 1e-12);
        CHECK(4.0 * tau <= c.beta * (2.0 * std::exp(-2.0 * tau) - 1.0));
        CHECK(static_cast<double>(c.K) * sigma >= 2.0 * tau * (1 - 1e-12));
        CHECK(static_cast<double>(c.K - 1) * sigma < 2.0 * tau);
        CHECK(c.margin < 0.0);
      }
    }
  }
}

TEST_CASE("linear verdicts are monotone along the diagonal") {
  const InfluenceFunction one;
  for (double tau : {0.10, 0.14, 0.155}) CHECK(certifyConsensus(tau, tau, 1.0, one).certified());
  for (double tau : {0.16, 0.2, 0.3}) CHECK_FALSE(certifyConsensus(tau, tau, 1.0, one).certified());
}

TEST_CASE("flocking certificate examples") {
  const auto psi = InfluenceFunction::powerLaw(0.5);
  const auto c = certifyFlocking(0.0, 0.0, 1.0, 1.0, psi);
  REQUIRE(c.certified());
  CHECK(c.rate > 0.0);
  CHECK(c.rate <= psi(1.0 + 1.0 / c.rate));
  CHECK(c.margin <= 0.0);

  const auto still = certifyFlocking(0.05, 0.05, 1.0, 0.0, psi);
  CHECK(still.certified());
  CHECK(toString(certifyFlocking(0.0, 0.0, 1000.0, 1.0, InfluenceFunction::powerLaw(2.0)).verdict) == "not-certified");
  CHECK(toString(certifyFlocking(0.0, 0.1, 1.0, 1.0, psi).verdict) == "outside-hypotheses");

  const auto small = certifyFlocking(0.05, 0.05, 1.0, 0.01, psi, {}, 0.8);
  REQUIRE(small.certified());
  CHECK(small.positionExcursion ==
        doctest::Approx(0.8 + std::exp(2.0 * small.rate * 0.05) * small.calZ * 0.01 / small.rate));
}

TEST_CASE("scan result does not depend on the worker count") {
  ScanOptions opt;
  opt.trace = true;
  setenv("DELAYFLOCK_THREADS", "1", 1);
  const auto a = toJson(certifyFlocking(0.03, 0.06, 1.0, 0.3, InfluenceFunction::powerLaw(0.5), opt)).dump();
  setenv("DELAYFLOCK_THREADS", "4", 1);
  const auto b = toJson(certifyFlocking(0.03, 0.06, 1.0, 0.3, InfluenceFunction::powerLaw(0.5), opt)).dump();
  unsetenv("DELAYFLOCK_THREADS");
  CHECK(a == b);
}

TEST_CASE("certificate json") {
  ScanOptions opt;
  opt.trace = true;
  const auto j = toJson(certifyConsensus(0.1, 0.1, 1.0, InfluenceFunction(), opt));
  for (const char* key : {"kind", "inputs", "chosen", "derived", "verdict", "margin", "envelope", "trace"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["verdict"] == "certified");
  CHECK(j["trace"].size() == 64);
  CHECK(toString(Verdict::OutsideHypotheses) == "outside-hypotheses");
}

}
