#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdpre/cli.hpp"
#include "bdpre/error.hpp"

using namespace bdpre;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

const json kSubcritical = json::parse(R"({"L": 2, "atoms": [{"weight": 1, "lambda": 4, "mu": [1, 1]}]})");

json with(json base, const json& extra) {
  base.update(extra);
  return base;
}

struct Run {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the installed binary on a config file in a scratch directory.
Run run_binary(const std::string& command, const std::string& config_text, const std::string& extra = "") {
  static int counter = 0;
  const auto dir = fs::temp_directory_path() / ("bdpre_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  const auto config = dir / "config.json";
  std::ofstream(config) << config_text;
  const std::string cmd = std::string(BDPRE_CLI_PATH) + " " + command + " " + config.string() + " " + extra + " > " +
                          (dir / "out").string() + " 2> " + (dir / "err").string();
  const int status = std::system(cmd.c_str());
  Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "out"), slurp(dir / "err")};
  fs::remove_all(dir);
  return r;
}

json strip_duration(json report) {
  report.erase("duration_seconds");
  return report;
}

}  // namespace

TEST_CASE("binary exit codes") {
  SUBCASE("check on an absorbing law exits 3 with c1 = false") {
    const auto r = run_binary("check", R"({"L": 1, "atoms": [{"weight": 1, "lambda": 0, "mu": [0]}]})");
    CHECK(r.exit_code == 3);
    const auto report = json::parse(r.out);
    CHECK(report["result"]["c1"] == false);
  }
  SUBCASE("misspelled key exits 2 and names the key") {
    const auto r = run_binary("classify", with(kSubcritical, {{"stepz", 10}}).dump());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("stepz") != std::string::npos);
  }
  SUBCASE("malformed JSON and unknown commands exit 2") {
    CHECK(run_binary("check", "{not json").exit_code == 2);
    CHECK(run_binary("frobnicate", kSubcritical.dump()).exit_code == 2);
  }
  SUBCASE("invalid values name their key") {
    const auto r = run_binary("classify", with(kSubcritical, {{"replicas", 0}}).dump());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("replicas") != std::string::npos);
  }
  SUBCASE("domain errors exit 3") {
    const auto r = run_binary("verify-decomposition",
                              R"({"L": 2, "atoms": [{"weight": 1, "lambda": 2, "mu": [1, 2]}], "n_samples": 100})");
    CHECK(r.exit_code == 3);
    CHECK(json::parse(r.out)["error_code"] == "RegimeNotApplicable");
  }
  SUBCASE("classify succeeds and writes JSON to stdout") {
    const auto r = run_binary("classify", with(kSubcritical, {{"steps", 20000}}).dump(), "--threads 2");
    CHECK(r.exit_code == 0);
    const auto report = json::parse(r.out);
    CHECK(report["result"]["verdict"] == "TransientRight");
  }
  SUBCASE("simulate writes CSV and passage can dump paths") {
    const auto sim = run_binary("simulate", with(kSubcritical, {{"n_paths", 2}}).dump());
    CHECK(sim.exit_code == 0);
    CHECK(sim.out.rfind("replica,event_index,time,state\n", 0) == 0);

    const auto dump = fs::temp_directory_path() / ("bdpre_dump_" + std::to_string(::getpid()) + ".csv");
    const auto pass = run_binary("passage", with(kSubcritical, {{"n_samples", 5}}).dump(), "--dump-paths " + dump.string());
    CHECK(pass.exit_code == 0);
    CHECK(slurp(dump).rfind("replica,event_index,time,state\n", 0) == 0);
    fs::remove(dump);
  }
}

TEST_CASE("classify reports gamma near -0.212 for (4,1,1)") {
  const auto out = run_command("classify", with(kSubcritical, {{"steps", 100000}}));
  REQUIRE(out.exit_code == 0);
  const auto& result = out.report["result"];
  CHECK(result["verdict"] == "TransientRight");
  CHECK(std::abs(result["gamma_estimate"]["gamma_top"].get<double>() - (-0.2120)) <= 1e-3);
}

TEST_CASE("velocity reports speed 1 for (4,1,1)") {
  const auto out = run_command("velocity", with(kSubcritical, {{"n_env", 2}, {"n_paths", 50}, {"steps", 20000}}));
  REQUIRE(out.exit_code == 0);
  const auto& result = out.report["result"];
  CHECK(result["regime"] == "PositiveSpeed");
  CHECK(std::abs(result["speed"].get<double>() - 1.0) <= 1e-8);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(with(kSubcritical, {{"seed", 7}, {"stop", {{"kind", "time_horizon"}, {"value", 2.5}}}}));
  CHECK(c.seed == 7);
  CHECK(c.stop.kind == StopRule::Kind::TimeHorizon);
  CHECK(c.stop.horizon == 2.5);
  CHECK(resolved_config(c, "simulate")["output_format"] == "csv");
  CHECK(resolved_config(c, "passage")["output_format"] == "json");
  CHECK_THROWS_AS(parse_config(with(kSubcritical, {{"rel_tol", 1.5}})), Error);
  CHECK_THROWS_AS(parse_config(with(kSubcritical, {{"output_format", "xml"}})), Error);
  CHECK_THROWS_AS(parse_config(with(kSubcritical, {{"stop", {{"kind", "never"}, {"value", 1}}}})), Error);
}

TEST_CASE("csv output flattens the report") {
  const auto out = run_command("check", with(kSubcritical, {{"output_format", "csv"}}));
  CHECK(out.text.rfind("key,value\n", 0) == 0);
  CHECK(out.text.find("result.c1,true") != std::string::npos);
}

TEST_CASE("reports rerun from their embedded config bit-identically at any thread count") {
  const std::vector<std::pair<std::string, json>> runs{
      {"check", kSubcritical},
      {"classify", with(kSubcritical, {{"steps", 5000}, {"replicas", 4}, {"seed", 3}})},
      {"passage", with(kSubcritical, {{"n_samples", 500}, {"seed", 4}})},
      {"velocity", with(kSubcritical, {{"n_env", 3}, {"n_paths", 20}, {"horizon", 100}, {"steps", 5000}})},
      {"verify-decomposition", with(kSubcritical, {{"n_samples", 500}, {"steps", 5000}})},
      {"simulate", with(kSubcritical, {{"n_paths", 3}, {"stop", {{"kind", "step_cap"}, {"value", 50}}}})},
  };
  for (const auto& [command, config] : runs) {
    CAPTURE(command);
    const auto first = run_command(command, config, 1);
    REQUIRE(first.exit_code == 0);
    const auto& embedded = first.report["config"];
    for (unsigned threads : {1u, 4u}) {
      const auto again = run_command(command, embedded, threads);
      REQUIRE(again.exit_code == 0);
      CHECK(strip_duration(again.report) == strip_duration(first.report));
      CHECK(again.path_dump == first.path_dump);
    }
  }
}
