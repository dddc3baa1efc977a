#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "delayflock/dde.hpp"
#include "delayflock/models.hpp"

namespace delayflock {

// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotCertified = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

struct HistorySpec {
  std::string type = "random-box";  // random-box | constant | preset | tabulated
  RandomBox box;
  std::string preset;  // sine | linear
  double amplitude = 1.0;
  double frequency = 1.0;
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> velocities;
  std::vector<double> times;
  std::vector<std::vector<double>> values;
};

struct RunConfig {
  ModelSpec model;
  HistorySpec history;
  double h = 1e-3;
  double T = 10.0;
  std::size_t outputEvery = 1;
  std::optional<double> beta;
  bool certificate = true;
  bool lemmaCheck = true;
  std::uint64_t seed = 0;
  std::string output = "delayflock-out";
};

/// Strict JSON schema; unknown keys are rejected. Errors are ConfigError
/// with messages of the form "<source>:<line>: <what>".
RunConfig parseRunConfig(const std::string& text, const std::string& source = "config");
RunConfig loadRunConfig(const std::string& path);

InitialHistory buildHistory(const RunConfig& config);

/// Parses "constant", "constant:0.8", "power:0.5" or "power-law:0.5".
InfluenceFunction parseInfluenceShorthand(const std::string& text);

/// Entry point shared by the executable and the tests.
int runCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace delayflock
