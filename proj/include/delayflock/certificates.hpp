#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "delayflock/influence.hpp"

namespace delayflock {

/// Amplification sequence Z^0..Z^K for window length sigma, from the
/// three-term recurrence, cross-checked against the closed form (1e-10
/// relative; ConsistencyError otherwise). DomainError for sigma <= 0.
std::vector<double> zSeq(double sigma, std::size_t K);

/// Closed form of Z^K, independent of the recurrence.
double zClosedForm(double sigma, std::size_t K);

/// Number of sigma-windows covering [0, 2 tau]: ceil(2 tau / sigma).
std::size_t windowCount(double sigma, double tau);

/// Z^K + Z^{K-1} beta (1 - (1 + 2 tau) e^{-2 tau}); needs K >= 1.
double calZ(double sigma, double tau, std::size_t K, double beta);

/// Z^K - (1 + sigma)(Z^{K-1} + 1), cross-checked against
/// sigma * sum_{k=1}^{K-1} Z^k; needs K >= 1.
double calW(double sigma, std::size_t K);

/// f(x) = e^{x tau}(e^{x tau} alpha + gamma) + x - eta.
double halanayResidual(double x, double alpha, double gamma, double eta, double tau);

/// Unique root of f in (0, eta). HypothesisError when alpha + gamma >= eta.
double halanayGamma(double alpha, double gamma, double eta, double tau);

/// Principal branch of W(s) e^{W(s)} = s for s >= 0.
double lambertW(double s);

/// Smallest beta with 4 tau <= beta (2 e^{-2 tau} - 1), exact in floating
/// point. HypothesisError when tau >= ln(2)/2.
double betaMin(double tau);

/// Largest diagonal delay certified for psi == 1: (1 - W(e/2)) / 2.
double linearDelayThreshold();

enum class CertificateKind { Consensus, Flocking };
enum class Verdict { Certified, NotCertified, OutsideHypotheses };

struct ScanOptions {
  std::size_t betaPoints = 64;
  double betaSpan = 100.0;  // grid runs over [betaMin, betaSpan * betaMin]
  std::size_t cPoints = 256;
  double cMin = 1e-4;
  std::optional<double> betaOverride;
  bool trace = false;
};

struct ScanEntry {
  double beta = 0.0;
  double c = 0.0;  // flocking only
  double margin = 0.0;  // left side minus right side; feasible when < 0 (consensus) or <= 0 (flocking)
  bool feasible = false;
};

struct Envelope {
  double amplitude = 0.0;
  double rate = 0.0;
  double onset = 0.0;
};

struct Certificate {
  CertificateKind kind = CertificateKind::Consensus;
  double sigma = 0.0;
  double tau = 0.0;
  double deltaX0 = 0.0;
  double deltaV0 = 0.0;
  InfluenceFunction influence;

  double beta = 0.0;
  double c = 0.0;
  std::size_t K = 0;
  double zK = 0.0;
  double zKm1 = 0.0;
  double calZ = 0.0;
  double calW = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  double rate = 0.0;  // Halanay rate (consensus) or C (flocking)

  Verdict verdict = Verdict::NotCertified;
  std::string reason;
  double margin = 0.0;
  Envelope envelope;
  double positionExcursion = 0.0;  // flocking: d_x(0) + e^{2 C tau} calZ deltaV0 / C
  std::vector<ScanEntry> trace;

  bool certified() const { return verdict == Verdict::Certified; }
};

/// Searches beta on a log grid and certifies when
/// 4 tau + beta (1 - e^{-2 tau}) < psi((1 + tau - sigma + e^{2 tau}/beta) calZ deltaX0).
/// The rearranged psi is used throughout.
Certificate certifyConsensus(double sigma, double tau, double deltaX0, const InfluenceFunction& psi,
                             const ScanOptions& options = {});

/// Searches (beta, C) and certifies when
/// e^{C tau}(4 tau e^{C tau} + beta (1 - e^{-2 tau})) + C <= psi(dx0 + W dv0
///   + (e^{C tau}/C)(1 + e^{2 tau + C sigma}/beta + e^{C tau}(tau - sigma)) calZ dv0).
/// `positionDiameter0` is d_x(0), used only for the reported excursion bound.
Certificate certifyFlocking(double sigma, double tau, double deltaX0, double deltaV0, const InfluenceFunction& psi,
                            const ScanOptions& options = {}, double positionDiameter0 = -1.0);

std::string toString(Verdict v);
nlohmann::json toJson(const Certificate& c);

}  // namespace delayflock
