#include <string>

#include "certctl/errors.hpp"
#include "certctl/runner.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::runner;
using nlohmann::json;

namespace {

json decay_config() {
  return json::parse(R"({
    "subcommand": "certify",
    "seed": 3,
    "problem": {
      "field": [{"form": "linear", "coeffs": [-1.0]}],
      "domain": {"lo": [-1.0], "hi": [1.0]},
      "V": {"form": "polynomial", "var": 0, "coeffs": [0, 0, 1]},
      "w1": [0, 0, 0.5], "w2": [0, 2], "w3": [0, 0, 1]
    },
    "tolerances": {"eps": 0.001953125}
  })");
}

std::string config_message(const json& c) {
  try {
    run(c, {});
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("certify on the decay demo") {
  const auto r = run(decay_config(), {});
  CHECK(r.exit_code == certified);
  CHECK(r.certificate["verdict"] == "certified");
  CHECK(r.certificate["version"] == kVersion);
  CHECK(r.certificate["subcommand"] == "certify");
  CHECK(r.certificate["numeric"]["x0_threshold"].get<double>() > 0.0);
  CHECK(r.certificate.contains("wall_clock_seconds"));
}

TEST_CASE("growth is rejected with exit 1") {
  auto c = decay_config();
  c["problem"]["field"][0]["coeffs"] = {1.0};
  const auto r = run(c, {});
  CHECK(r.exit_code == failure);
  CHECK(r.certificate["verdict"] == "counterexample");
  CHECK(r.certificate["payload"]["failing"]["point"].size() == 1);
}

TEST_CASE("numeric fields are reproducible and exclude wall clock") {
  const auto a = run(decay_config(), {}), b = run(decay_config(), {});
  const auto na = numeric_fields(a.certificate), nb = numeric_fields(b.certificate);
  CHECK_FALSE(na.contains("wall_clock_seconds"));
  CHECK(na.dump() == nb.dump());
}

TEST_CASE("inputs digest covers config and seed") {
  const auto c = decay_config();
  const auto d = inputs_digest(c, 3);
  CHECK(d.size() == 64);
  CHECK(d == inputs_digest(c, 3));
  CHECK(d != inputs_digest(c, 4));
  RunOptions o;
  o.seed = 9;
  const auto r = run(c, o);
  CHECK(r.certificate["seed"] == 9);
  CHECK(r.certificate["inputs_digest"] == inputs_digest(c, 9));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(run_text("{", {}), ConfigError);
  CHECK_THROWS_AS(run(json::array(), {}), ConfigError);

  auto c = decay_config();
  c["extra"] = 1;
  CHECK(config_message(c).find("unknown config key 'extra'") != std::string::npos);

  c = decay_config();
  c["subcommand"] = "solve";
  const auto msg = config_message(c);
  CHECK(msg.find("unknown subcommand") != std::string::npos);
  CHECK(msg.find("certify") != std::string::npos);

  c = decay_config();
  c["problem"]["V"] = {{"form", "bessel"}};
  const auto fm = config_message(c);
  CHECK(fm.find("unknown form 'bessel'") != std::string::npos);
  CHECK(fm.find("piecewise_linear") != std::string::npos);

  c = decay_config();
  c["tolerances"]["eps"] = 0.0;
  CHECK(config_message(c).find("must be positive") != std::string::npos);

  c = decay_config();
  c["problem"].erase("domain");
  CHECK(config_message(c).find("missing 'domain'") != std::string::npos);

  c = decay_config();
  c["seed"] = -1;
  CHECK_FALSE(config_message(c).empty());
}

TEST_CASE("eig verdicts and precision audit") {
  json c = {{"subcommand", "eig"}, {"tolerances", {{"eps", 1e-8}}}};
  c["problem"]["matrix"] = json::parse("[[0, -1], [1, 0]]");
  CHECK(run(c, {}).exit_code == undecided);
  c["problem"]["matrix"] = json::parse("[[-1, 0], [0, [-2, 3]]]");
  RunOptions o;
  o.precision_audit = true;
  const auto r = run(c, o);
  CHECK(r.exit_code == certified);
  CHECK(r.certificate["numeric"]["precision_audit"]["within_eps"] == true);
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].name == "eigenpairs.csv");
  c["problem"]["matrix"] = json::parse("[[0.5]]");
  CHECK(run(c, {}).exit_code == failure);
  c["problem"]["matrix"] = json::parse("[[1, 2]]");
  CHECK_THROWS_AS(run(c, {}), ConfigError);
}

TEST_CASE("ode solution, domain exit and output renaming") {
  json c = json::parse(R"({
    "subcommand": "ode",
    "problem": {
      "field": [{"form": "linear", "coeffs": [-1.0, 0.0]}],
      "state_box": {"lo": [-2.0], "hi": [2.0]},
      "x0": [1.0],
      "horizon": 1.0
    },
    "tolerances": {"eps": 1e-6},
    "output": {"trajectory": "decay.csv"}
  })");
  RunOptions o;
  o.precision_audit = true;
  auto r = run(c, o);
  CHECK(r.exit_code == certified);
  CHECK(std::abs(r.certificate["numeric"]["final_state"][0].get<double>() - std::exp(-1.0)) <= 1e-6);
  CHECK(r.certificate["numeric"]["precision_audit"]["consistent"] == true);
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].name == "decay.csv");
  CHECK(r.files[0].content.rfind("t,", 0) == 0);

  c["problem"]["field"][0]["coeffs"] = {1.0, 0.0};
  c["problem"]["horizon"] = 2.0;
  r = run(c, {});
  CHECK(r.exit_code == failure);
  CHECK(r.certificate["verdict"] == "domain-exit");
  const double t = r.certificate["numeric"]["exit_time"].get<double>();
  CHECK(t > 0.5);
  CHECK(t < 0.75);
}

TEST_CASE("subcommand list") {
  const auto& s = subcommands();
  CHECK(s.size() == 8);
  CHECK(std::find(s.begin(), s.end(), "audit") != s.end());
}
