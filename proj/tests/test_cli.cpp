#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "delayflock/certificates.hpp"
#include "delayflock/cli.hpp"
#include "delayflock/errors.hpp"

using namespace delayflock;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "delayflock");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = runCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("delayflock-tests-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path writeConfig(const fs::path& dir, const std::string& text) {
  const auto p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

const char* kLinearPair = R"({
  "model": {"kind": "first-order", "N": 2, "d": 1, "sigma": 0.1, "tau": 0.1,
            "influence": {"family": "constant", "params": {"level": 1}}},
  "history": {"type": "constant", "positions": [[1], [-1]]},
  "sim": {"h": 0.01, "T": 5, "outputEvery": 10},
  "seed": 0
})";

const char* kCertifiedHk = R"({
  "model": {"kind": "first-order", "N": 6, "d": 2, "sigma": 0.1, "tau": 0.1,
            "influence": {"family": "constant", "params": {"level": 1}}},
  "history": {"type": "random-box", "low": -1, "high": 1},
  "sim": {"h": 0.001, "T": 10, "outputEvery": 50},
  "seed": 4
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("halanay subcommand") {
  auto r = run({"halanay", "0.1", "0.2", "1.0", "0.0"});
  CHECK(r.code == kExitOk);
  std::istringstream line(r.out);
  double g = -1, res = -1;
  line >> g >> res;
  CHECK(g == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(std::abs(res) <= 1e-12);

  CHECK(run({"halanay", "0.5", "0.6", "1.0", "0.1"}).code == kExitInput);

  r = run({"halanay", "0.4", "0.3", "1.0", "0.1"});
  CHECK(r.code == kExitOk);
  std::istringstream line2(r.out);
  line2 >> g >> res;
  CHECK(std::abs(halanayResidual(g, 0.4, 0.3, 1.0, 0.1)) <= 1e-12);
  CHECK(std::abs(res) <= 1e-12);
  CHECK(run({"halanay", "0.4", "x", "1.0", "0.1"}).code == kExitInput);
}

TEST_CASE("certify subcommands") {
  const auto dir = scratch("certify");
  auto r = run({"certify-consensus", "--sigma", "0.1", "--tau", "0.1", "--delta-x", "1", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "certificate.json"));
  const auto j = nlohmann::json::parse(slurp(dir / "certificate.json"));
  CHECK(j["verdict"] == "certified");

  CHECK(run({"certify-consensus", "--sigma", "0.2", "--tau", "0.2", "--delta-x", "1"}).code == kExitNotCertified);
  CHECK(run({"certify-flocking", "--sigma", "0", "--tau", "0", "--delta-x", "1", "--delta-v", "1", "--psi",
             "power:0.5"})
            .code == kExitOk);
  CHECK(run({"certify-consensus", "--sigma", "0.3", "--tau", "0.1", "--delta-x", "1"}).code == kExitInput);
  CHECK(run({"certify-consensus", "--sigma", "0.1", "--tau", "0.1", "--delta-x", "-1"}).code == kExitInput);
  CHECK(run({"certify-consensus", "--sigma", "0.1", "--tau", "0.1", "--delta-x", "1", "--psi", "bogus"}).code ==
        kExitInput);
}

TEST_CASE("influence shorthand") {
  CHECK(parseInfluenceShorthand("constant")(5.0) == 1.0);
  CHECK(parseInfluenceShorthand("constant:0.8")(5.0) == 0.8);
  CHECK(parseInfluenceShorthand("power:1")(3.0) == doctest::Approx(0.25));
  CHECK(parseInfluenceShorthand("power-law:0.5")(3.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(parseInfluenceShorthand("gauss:1"), ConfigError);
}

TEST_CASE("hopf subcommand") {
  const auto dir = scratch("hopf");
  auto r = run({"hopf", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  std::istringstream csv(slurp(dir / "hopf_m0.csv"));
  std::string row;
  std::getline(csv, row);
  CHECK(row == "tau,sigma,omega,m");
  bool hit = false;
  while (std::getline(csv, row)) {
    double t, s, w;
    int m;
    char c;
    std::istringstream f(row);
    f >> t >> c >> s >> c >> w >> c >> m;
    const double q = std::acos(-1.0) / 4;
    if (std::abs(t - q) <= 1e-6 && std::abs(s - q) <= 1e-6 && std::abs(w - 2.0) <= 1e-6 && m == 0) hit = true;
  }
  CHECK(hit);
  CHECK(fs::exists(dir / "stability_grid.csv"));
  CHECK_FALSE(fs::exists(dir / "hopf_m1.csv"));

  CHECK(run({"hopf", "--resolution", "0", "--out", dir.string()}).code == kExitInput);

  const auto two = scratch("hopf2");
  CHECK(run({"hopf", "--m-max", "1", "--out", two.string()}).code == kExitOk);
  CHECK(fs::exists(two / "hopf_m0.csv"));
  CHECK(fs::exists(two / "hopf_m1.csv"));
  CHECK_FALSE(fs::exists(two / "hopf_m2.csv"));
}

TEST_CASE("toy-simulate subcommand") {
  const auto dir = scratch("toy");
  CHECK(run({"toy-simulate", "--tau", "0.4", "--sigma", "0.3", "--horizon", "2", "--out", dir.string()}).code ==
        kExitOk);
  CHECK(slurp(dir / "toy.csv").rfind("t,", 0) == 0);
  CHECK(run({"toy-simulate", "--tau", "0.4", "--sigma", "0.3", "--step", "0.5"}).code == kExitInput);
}

TEST_CASE("simulate writes artifacts and a shrinking diameter") {
  const auto dir = scratch("simulate");
  const auto cfg = writeConfig(dir, kLinearPair);
  const auto out = dir / "out";
  auto r = run({"simulate", "--config", cfg.string(), "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"trajectory.csv", "d_x.csv", "F.csv", "min_weight.csv", "max_speed.csv", "summary.json",
                        "certificate.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(s["finalDiameter"].get<double>() < s["initialDiameter"].get<double>());
  CHECK(slurp(out / "trajectory.csv").rfind("t,agent,component,value\n", 0) == 0);
  CHECK(slurp(out / "d_x.csv").rfind("t,label,value\n", 0) == 0);
}

TEST_CASE("certified HK run has no envelope violations") {
  const auto dir = scratch("certified");
  const auto cfg = writeConfig(dir, kCertifiedHk);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "out").string()}).code == kExitOk);
  const auto s = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(s["verdict"] == "certified");
  CHECK(s["envelopeViolations"] == 0);
}

TEST_CASE("identical inputs give byte-identical files") {
  const auto dir = scratch("determinism");
  const auto cfg = writeConfig(dir, kCertifiedHk);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == kExitOk);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "b").string()}).code == kExitOk);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(dir / "b" / name));
    ++compared;
  }
  CHECK(compared >= 6);
  const auto other = dir / "c";
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", other.string(), "--seed", "5"}).code == kExitOk);
  CHECK(slurp(other / "trajectory.csv") != slurp(dir / "a" / "trajectory.csv"));
}

TEST_CASE("configuration errors are line anchored") {
  const auto dir = scratch("bad");
  const auto cfg = writeConfig(dir, R"({
  "model": {"kind": "first-order", "N": 2, "d": 1,
    "sigma": 0.3,
    "tau": 0.1},
  "history": {"type": "constant", "positions": [[1], [-1]]}
})");
  auto r = run({"simulate", "--config", cfg.string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("config.json:3: sigma must not exceed tau") != std::string::npos);

  CHECK_THROWS_WITH_AS(parseRunConfig("{\n  \"model\": {},\n  \"colour\": 3\n}", "x.json"),
                       doctest::Contains("x.json:3:"), ConfigError);
  CHECK_THROWS_AS(parseRunConfig("{ not json", "y.json"), ConfigError);
  CHECK(run({"simulate", "--config", (dir / "missing.json").string()}).code == kExitInput);
}

TEST_CASE("non-finite states exit with the numeric failure code") {
  const auto dir = scratch("blowup");
  const auto cfg = writeConfig(dir, R"({
  "model": {"kind": "first-order", "N": 2, "d": 1, "sigma": 0, "tau": 0},
  "history": {"type": "constant", "positions": [[1e308], [-1e308]]},
  "sim": {"h": 0.01, "T": 1}
})");
  auto r = run({"simulate", "--config", cfg.string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitNumeric);
  CHECK_FALSE(r.err.empty());
}

}
