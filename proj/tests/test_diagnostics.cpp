#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "delayflock/certificates.hpp"
#include "delayflock/diagnostics.hpp"
#include "delayflock/errors.hpp"
#include "delayflock/models.hpp"
#include "oracles.hpp"

using namespace delayflock;

namespace {

ModelSpec makeSpec(std::size_t n, std::size_t d, double sigma, double tau, InfluenceFunction psi = {},
                   ModelKind kind = ModelKind::FirstOrder) {
  ModelSpec s;
  s.agents = n;
  s.dim = d;
  s.sigma = sigma;
  s.tau = tau;
  s.kind = kind;
  s.influence = psi;
  return s;
}

Trajectory certifiedRun(double horizon) {
  const auto spec = makeSpec(6, 2, 0.1, 0.1);
  return simulate(spec, randomHistory(spec, {}, 7), 1e-3, horizon);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("diameter examples") {
  const std::vector<double> same{2, 2, 2, 2, 2, 2};
  CHECK(diameter(same, 3, 2) == 0.0);
  const std::vector<double> pair{1, -1};
  CHECK(diameter(pair, 2, 1) == 2.0);
  const std::vector<double> four{0, 0, 1, 0, 0, 1, 3, 4};
  CHECK(diameter(four, 4, 2) == oracle::bruteDiameter({{0, 0}, {1, 0}, {0, 1}, {3, 4}}));
  CHECK(diameter(four, 4, 2) == 5.0);
}

TEST_CASE("velocity diameter mirrors the position examples") {
  const auto spec = makeSpec(4, 2, 0, 0, {}, ModelKind::SecondOrder);
  // per agent [x0, x1, v0, v1]
  const std::vector<double> s{9, 9, 0, 0, -9, 2, 1, 0, 5, 5, 0, 1, 0, 7, 3, 4};
  CHECK(velocityDiameter(spec, s) == 5.0);
  CHECK(positionDiameter(spec, s) == doctest::Approx(oracle::bruteDiameter({{9, 9}, {-9, 2}, {5, 5}, {0, 7}})));
  const auto two = makeSpec(2, 1, 0, 0, {}, ModelKind::SecondOrder);
  const std::vector<double> s2{0, 1, 0, -1};
  CHECK(velocityDiameter(two, s2) == 2.0);
  const std::vector<double> s3{0, 3, 7, 3};
  CHECK(velocityDiameter(two, s3) == 0.0);
  CHECK_THROWS_AS(velocityDiameter(makeSpec(2, 1, 0, 0), s2), DomainError);
}

TEST_CASE("initial spread examples") {
  const auto flat = makeSpec(3, 1, 0.1, 0.2);
  CHECK(initialSpread(flat, sampleHistory(flat, InitialHistory::constant({{4}, {4}, {4}}), 0.01),
                      Component::Position) == 0.0);
  CHECK(initialSpread(flat, sampleHistory(flat, InitialHistory::constant({{1}, {-1}, {0}}), 0.01),
                      Component::Position) == 2.0);
  const auto sine = makeSpec(2, 1, 0.5, std::numbers::pi / 2);
  const auto hist = InitialHistory::analytic(2, 1, [](std::size_t i, double t, std::span<double> out) {
    out[0] = i == 0 ? std::sin(t) : -std::sin(t);
  });
  CHECK(initialSpread(sine, sampleHistory(sine, hist, 0.01), Component::Position) == doctest::Approx(2.0).epsilon(1e-12));
  // s and t maximised independently: dominates any single-time diameter
  const auto shifted = InitialHistory::analytic(2, 1, [](std::size_t i, double t, std::span<double> out) {
    out[0] = i == 0 ? t : 0.0;
  });
  CHECK(initialSpread(sine, sampleHistory(sine, shifted, 0.01), Component::Position) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("windowed spreads") {
  const auto traj = certifiedRun(1.0);
  const double d0 = initialSpread(traj, Component::Position);
  CHECK(windowedSpread(traj, 0) == d0);
  const auto z = zSeq(0.1, 10);
  for (std::size_t K = 1; K <= 10; ++K) CHECK(windowedSpread(traj, K) <= z[K] * d0 * (1.0 + 1e-9));
  CHECK_THROWS_AS(windowedSpread(traj, 11), DomainError);

  const auto spec = makeSpec(3, 1, 0.1, 0.2);
  const auto still = simulate(spec, InitialHistory::constant({{1}, {1}, {1}}), 0.01, 1.0);
  for (std::size_t K = 0; K <= 5; ++K) CHECK(windowedSpread(still, K) == 0.0);
  const auto noWindow = simulate(makeSpec(2, 1, 0.0, 0.0), InitialHistory::constant({{1}, {0}}), 0.01, 1.0);
  CHECK_THROWS_AS(windowedSpread(noWindow, 1), DomainError);
}

TEST_CASE("minimum weight") {
  const auto spec = makeSpec(4, 1, 0.1, 0.1);
  const auto traj = simulate(spec, randomHistory(spec, {}, 3), 0.01, 1.0);
  CHECK(minWeight(traj, 0.5) == 1.0 / 3.0);
  const auto harmonic = makeSpec(2, 1, 0.1, 0.1, InfluenceFunction::powerLaw(1.0));
  const auto together = simulate(harmonic, InitialHistory::constant({{2}, {2}}), 0.01, 1.0);
  CHECK(minWeight(together, 0.7) == 1.0);
  const auto apart = simulate(harmonic, InitialHistory::constant({{0}, {3}}), 0.01, 1.0);
  CHECK(minWeight(apart, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("functional examples") {
  const auto spec = makeSpec(3, 1, 0.1, 0.2);
  const auto still = simulate(spec, InitialHistory::constant({{1}, {1}, {1}}), 0.01, 2.0);
  const LyapunovFunctional f(still, 0.7);
  for (double t = 0.0; t <= 2.0; t += 0.1) CHECK(f(t) == 0.0);

  const auto ode = simulate(makeSpec(3, 1, 0.0, 0.0), InitialHistory::constant({{1}, {0}, {-2}}), 0.01, 2.0);
  const LyapunovFunctional g(ode, 3.0);
  for (std::size_t k = 0; k < ode.knotCount(); k += 17) {
    CHECK(g(ode.knotTime(k)) == positionDiameter(ode.spec(), ode.knotState(k)));
  }
  CHECK_THROWS_AS(g(2.5), DomainError);
  CHECK_THROWS_AS(LyapunovFunctional(ode, 0.0), DomainError);
}

TEST_CASE("functional with a constant speed matches the closed form") {
  const double tau = 0.3, m = 0.8, beta = 1.7;
  const auto spec = makeSpec(2, 1, 0.1, tau);
  DelayedRhs drift = [m](double, const StateQuery&, std::span<double> dydt) {
    dydt[0] = m;
    dydt[1] = 0.0;
  };
  const auto traj = integrate(spec, InitialHistory::constant({{0.5}, {0.0}}), drift, 1e-3, 2.0);
  const LyapunovFunctional f(traj, beta);
  for (double t : {0.6, 0.9, 1.5, 2.0}) {
    const double closed = (0.5 + m * t) + beta * m * oracle::weightedRamp(2.0 * tau);
    CHECK(f(t) == doctest::Approx(closed).epsilon(1e-6));
  }
  CHECK(oracle::weightedRamp(2.0 * tau) == doctest::Approx(1.0 - (1.0 + 2.0 * tau) * std::exp(-2.0 * tau)));
}

TEST_CASE("diameter stays below the functional") {
  const auto traj = certifiedRun(5.0);
  const LyapunovFunctional f(traj, betaMin(0.1));
  for (std::size_t k = 0; k < traj.knotCount(); ++k) {
    REQUIRE(positionDiameter(traj.spec(), traj.knotState(k)) <= f(traj.knotTime(k)));
  }
}

TEST_CASE("lemma inequalities") {
  const auto spec = makeSpec(3, 1, 0.1, 0.2);
  const auto still = simulate(spec, InitialHistory::constant({{1}, {1}, {1}}), 0.01, 2.0);
  const auto eq = verifyLemmaInequalities(still, 1.0);
  CHECK(eq.worst() == 0.0);
  CHECK(eq.find("window-spread") != nullptr);

  const auto traj = certifiedRun(10.0);
  const auto rep = verifyLemmaInequalities(traj, betaMin(0.1));
  for (const char* name : {"derivative-bound", "window-rate", "window-spread", "functional-bound",
                           "diameter-below-functional"}) {
    const auto* c = rep.find(name);
    REQUIRE(c != nullptr);
    CHECK(c->samples > 0);
    CHECK(c->maxViolation <= 1e-4);
  }
  CHECK(rep.find("position-drift") == nullptr);

  const auto cs = makeSpec(4, 2, 0.05, 0.05, InfluenceFunction::powerLaw(0.5), ModelKind::SecondOrder);
  RandomBox box;
  box.velocityLow = -0.2;
  box.velocityHigh = 0.2;
  const auto run = simulate(cs, randomHistory(cs, box, 3), 1e-3, 10.0);
  const auto rep2 = verifyLemmaInequalities(run, 1.0);
  REQUIRE(rep2.find("position-drift") != nullptr);
  CHECK(rep2.find("position-drift")->maxViolation <= 1e-4);
  CHECK(rep2.find("derivative-bound")->maxViolation <= 1e-4);
}

TEST_CASE("decay rate fit") {
  ObservableSeries e{"d_x", {}, {}};
  for (int k = 0; k <= 1000; ++k) {
    e.times.push_back(0.01 * k);
    e.values.push_back(std::exp(-2.0 * 0.01 * k));
  }
  CHECK(decayRateFit(e) == doctest::Approx(2.0).epsilon(1e-9));
  ObservableSeries c{"d_x", e.times, std::vector<double>(e.times.size(), 0.3)};
  CHECK(std::abs(decayRateFit(c)) < 1e-12);
  ObservableSeries z{"d_x", e.times, std::vector<double>(e.times.size(), 0.0)};
  CHECK_THROWS_AS(decayRateFit(z), DomainError);

  const auto traj = certifiedRun(20.0);
  const auto cert = certifyConsensus(0.1, 0.1, initialSpread(traj, Component::Position), InfluenceFunction());
  REQUIRE(cert.certified());
  CHECK(decayRateFit(sampleDiameter(traj, Component::Position, 10)) >= 0.95 * cert.rate);
}

TEST_CASE("series export") {
  ObservableSeries s{"d_x", {0.0, 0.5}, {1.0, 0.25}};
  std::ostringstream os;
  writeSeriesCsv(os, s);
  CHECK(os.str() == "t,label,value\n0,d_x,1\n0.5,d_x,0.25\n");
  const auto traj = certifiedRun(1.0);
  const auto w = sampleMinWeight(traj, 100);
  CHECK(w.label == "min_weight");
  CHECK(w.times.back() == 1.0);
  for (double v : w.values) CHECK(v == 0.2);
  const auto r = sampleMaxRate(traj, Component::Position, 100);
  for (std::size_t k = 1; k < r.times.size(); ++k) CHECK(r.times[k] > r.times[k - 1]);
  for (double v : r.values) CHECK(v >= 0.0);
}

}
