#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "msk/json_io.hpp"

using namespace msk;

namespace {

std::string data_path(const std::string& name) {
  return std::string(MSK_TEST_DATA_DIR) + "/" + name;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSK_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("model JSON round trip") {
  const SpeciesStructure s = load_model(data_path("twospecies_pd.json"));
  REQUIRE(s.m == 2);
  REQUIRE(s.lambda(0) == 0.6);
  REQUIRE(s.delta2(0, 1) == 1.0);
  const json j = model_to_json(s);
  const SpeciesStructure back = model_from_json(j);
  REQUIRE((back.delta2 - s.delta2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model JSON validation errors carry names") {
  json bad = {{"m", 2}, {"lambda", {0.5, 0.5}}, {"delta2", {{1.0, 2.0}, {3.0, 1.0}}}};
  REQUIRE_THROWS_AS(model_from_json(bad), AsymmetricMatrix);
  json missing = {{"m", 2}};
  REQUIRE_THROWS_AS(model_from_json(missing), BadRatios);
}

TEST_CASE("float formatting survives a round trip") {
  for (double v : {1.0 / 3.0, 0.1, 1e-17, 123456.789012345678, M_PI}) {
    const std::string text = format_float(v);
    REQUIRE(std::stod(text) == v);
  }
}

TEST_CASE("atomic write replaces the target") {
  const std::string path = "/tmp/msk_test_atomic.json";
  atomic_write(path, "first");
  atomic_write(path, "second");
  REQUIRE(slurp(path) == "second");
  std::remove(path.c_str());
}

TEST_CASE("cli: solve emits schema-stamped JSON") {
  const std::string out = "/tmp/msk_test_solve.json";
  const int rc = run_cli("solve --model " + data_path("sk1.json") +
                         " --beta 0.5 --h 0.3 --out " + out);
  REQUIRE(rc == 0);
  json j;
  std::ifstream(out) >> j;
  REQUIRE(j.at("schema_version") == kSchemaVersion);
  REQUIRE(j.at("config").at("command") == "solve");
  REQUIRE(j.at("result").at("q")[0].get<double>() == Catch::Approx(0.101723).margin(1e-5));
  std::remove(out.c_str());
}

TEST_CASE("cli: identical reruns are byte-identical") {
  const std::string out1 = "/tmp/msk_test_rerun1.json";
  const std::string out2 = "/tmp/msk_test_rerun2.json";
  const std::string args = "simulate --model " + data_path("bipartite.json") +
                           " --beta 0.4 --h 0.2 --N 10 --samples 5 --seed 42 --out ";
  REQUIRE(run_cli(args + out1) == 0);
  REQUIRE(run_cli(args + out2) == 0);
  REQUIRE(slurp(out1) == slurp(out2));
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("cli: phase CSV has the documented header and row count") {
  const std::string out = "/tmp/msk_test_phase.csv";
  const int rc = run_cli("phase --model " + data_path("bipartite.json") +
                         " --beta-range 0.2:2:5 --h-range 0:1:3 --out " + out);
  REQUIRE(rc == 0);
  const std::string text = slurp(out);
  std::istringstream lines(text);
  std::string header;
  std::getline(lines, header);
  REQUIRE(header == "beta,h,beta_c,beta_0,beta_at,region,conjectural");
  int rows = 0;
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 15);
  std::remove(out.c_str());
}

TEST_CASE("cli: exit codes") {
  // missing model file: usage error
  REQUIRE(run_cli("solve --model /nonexistent/path.json --beta 0.5") == 2);
  // unknown flag: CLI parse error
  REQUIRE(run_cli("solve --frobnicate") != 0);
  // domain error: valid model but beta > AT line makes covariance unstable
  REQUIRE(run_cli("covariance --model " + data_path("sk1.json") + " --beta 2.0 --h 0.5") == 1);
}

TEST_CASE("cli: verify --quick runs the battery") {
  const std::string out = "/tmp/msk_test_verify.csv";
  const int rc = run_cli("verify --quick --out " + out);
  REQUIRE(rc == 0);
  const std::string text = slurp(out);
  REQUIRE(text.find("criterion,description,measured,threshold,pass,detail") == 0);
  std::remove(out.c_str());
}
