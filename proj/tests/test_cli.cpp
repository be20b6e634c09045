#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cnls/config.hpp"
#include "cnls/experiment.hpp"

using namespace cnls;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kSmallBenchmark = R"({
  "preset": "eq1.11",
  "seed": 11,
  "problem": {"grid": {"dimension": 3, "radius": 6.0, "n_nodes": 48}},
  "lambdas": [0.0],
  "solver": {"probe_count": 80, "path_points": 17, "newton_switch_tol": 1e-2,
             "residual_tol": 1e-9, "k_max": 8},
  "outputs": {"dir": "OUTDIR", "formats": ["json", "csv"]}
})";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cnls_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter() {
    static int c = 0;
    return ++c;
  }
};

std::string write_config(const TempDir& dir, std::string body,
                         const std::string& outdir) {
  const std::string key = "OUTDIR";
  const auto pos = body.find(key);
  if (pos != std::string::npos) body.replace(pos, key.size(), outdir);
  const fs::path cfg = dir.path / "config.json";
  std::ofstream(cfg) << body;
  return cfg.string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CNLS_CLI_PATH) + " " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing, presets and validation") {
  ExperimentConfig cfg = parse_config(kSmallBenchmark);
  CHECK(cfg.preset == "eq1.11");
  CHECK(cfg.grid.n_nodes == 48);      // explicit key wins over the preset
  CHECK(cfg.grid.dimension == 3);
  CHECK(cfg.b1.family == "harmonic");  // preset default survives
  CHECK(cfg.nl_kind == "quartic_coupled");
  CHECK(cfg.lambdas.size() == 1);
  CHECK(!cfg.config_hash.empty());

  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {}})"), ConfigError);
  // empty lambda list rejected
  std::string no_lambda = kSmallBenchmark;
  const auto pos = no_lambda.find("[0.0]");
  no_lambda.replace(pos, 5, "[]");
  CHECK_THROWS_AS(parse_config(no_lambda), ConfigError);
  // n_nodes floor enforced at the config layer
  std::string tiny = kSmallBenchmark;
  const auto npos = tiny.find("\"n_nodes\": 48");
  tiny.replace(npos, 13, "\"n_nodes\": 4");
  CHECK_THROWS_AS(parse_config(tiny), ConfigError);
}

TEST_CASE("lambda resolution against the spectrum") {
  std::vector<double> mus{2.0, 4.0, 6.0};
  LambdaRequest plain;
  plain.kind = LambdaRequest::Kind::Value;
  plain.value = 1.5;
  CHECK(resolve_lambda(plain, mus) == 1.5);
  LambdaRequest half;
  half.kind = LambdaRequest::Kind::MuMultiple;
  half.mu_index = 1;
  half.factor = 0.5;
  CHECK(resolve_lambda(half, mus) == 1.0);
  LambdaRequest mid;
  mid.kind = LambdaRequest::Kind::MuMidpoint;
  mid.mu_i = 1;
  mid.mu_j = 2;
  CHECK(resolve_lambda(mid, mus) == 3.0);
  LambdaRequest beyond;
  beyond.kind = LambdaRequest::Kind::MuMultiple;
  beyond.mu_index = 9;
  CHECK_THROWS_AS(resolve_lambda(beyond, mus), ConfigError);
}

TEST_CASE("spectrum subcommand writes the table") {
  TempDir dir;
  const std::string out = (dir.path / "out").string();
  const std::string cfg = write_config(dir, kSmallBenchmark, out);
  CHECK(run_cli("spectrum --config " + cfg) == 0);
  const json doc = json::parse(slurp(fs::path(out) / "spectrum.json"));
  CHECK(doc.at("positive_direction_check") == "pass");
  CHECK(doc.at("mus").size() >= 2);
  CHECK(doc.at("artifact_version").is_string());
  CHECK(doc.at("config_hash").is_string());
  double prev = 0.0;
  for (const auto& row : doc.at("mus")) {
    CHECK(row.at("mu").get<double>() >= prev);
    prev = row.at("mu").get<double>();
    CHECK(row.at("residual").get<double>() <= 1e-10);
  }
}

TEST_CASE("spectrum flags a problem with no positive direction") {
  TempDir dir;
  // push both V coefficients below zero and drop the cross coupling
  json body = json::parse(kSmallBenchmark);
  body["problem"]["potentials"] = {
      {"V1", {{"family", "constant"}, {"value", -1.0}}},
      {"V2", {{"family", "constant"}, {"value", -1.0}}},
      {"gamma", {{"family", "constant"}, {"value", 0.0}}}};
  const std::string out = (dir.path / "out").string();
  const std::string cfg = write_config(dir, body.dump(), out);
  CHECK(run_cli("spectrum --config " + cfg) == 0);
  const json doc = json::parse(slurp(fs::path(out) / "spectrum.json"));
  CHECK(doc.at("positive_direction_check") == "fail");
  CHECK(doc.at("mus").empty());
}

TEST_CASE("solve subcommand produces results, profiles and the sweep") {
  TempDir dir;
  const std::string out = (dir.path / "out").string();
  const std::string cfg = write_config(dir, kSmallBenchmark, out);
  CHECK(run_cli("solve --config " + cfg) == 0);

  const json doc = json::parse(slurp(fs::path(out) / "result_0.json"));
  CHECK(doc.at("accepted") == true);
  CHECK(doc.at("m") == 0);
  CHECK(doc.at("level").get<double>() > 0.0);
  CHECK(doc.at("residual").get<double>() <= 1e-8);

  const std::string profile = slurp(fs::path(out) / "profile_0.csv");
  CHECK(profile.find("r,u1,u2") != std::string::npos);
  const std::string sweep = slurp(fs::path(out) / "sweep.csv");
  CHECK(sweep.find("lambda,m,d,residual,u1_norm,u2_norm,iters,accepted") !=
        std::string::npos);
}

TEST_CASE("identical config and seed give identical bytes") {
  TempDir dir;
  const std::string out1 = (dir.path / "a").string();
  const std::string out2 = (dir.path / "b").string();
  const std::string cfg = write_config(dir, kSmallBenchmark, out1);
  CHECK(run_cli("solve --config " + cfg) == 0);
  CHECK(run_cli("solve --config " + cfg + " --out " + out2) == 0);
  CHECK(slurp(fs::path(out1) / "result_0.json") ==
        slurp(fs::path(out2) / "result_0.json"));
  CHECK(slurp(fs::path(out1) / "profile_0.csv") ==
        slurp(fs::path(out2) / "profile_0.csv"));
  // 17 significant digits round-trip through the sweep file
  const std::string sweep = slurp(fs::path(out1) / "sweep.csv");
  CHECK(slurp(fs::path(out2) / "sweep.csv") == sweep);
}

TEST_CASE("verify subcommand passes clean and fails corrupted") {
  TempDir dir;
  const std::string out = (dir.path / "out").string();
  std::string body = kSmallBenchmark;
  // a coarser grid keeps the batch quick
  const auto pos = body.find("\"n_nodes\": 48");
  body.replace(pos, 13, "\"n_nodes\": 24");
  const std::string cfg = write_config(dir, body, out);
  CHECK(run_cli("verify --config " + cfg) == 0);
  const json doc = json::parse(slurp(fs::path(out) / "verify.json"));
  CHECK(doc.at("all_passed") == true);
  CHECK(run_cli("verify --config " + cfg + " --corrupt-stencil") != 0);
}

TEST_CASE("hypothesis failure surfaces through the verify exit code") {
  TempDir dir;
  json body = json::parse(kSmallBenchmark);
  body["problem"]["nonlinearity"] = {{"kind", "custom_quadratic"},
                                     {"theta", 1.0}};
  body["problem"]["grid"]["n_nodes"] = 24;
  const std::string out = (dir.path / "out").string();
  const std::string cfg = write_config(dir, body.dump(), out);
  CHECK(run_cli("verify --config " + cfg) != 0);
  const json doc = json::parse(slurp(fs::path(out) / "verify.json"));
  bool growth_failed = false;
  for (const auto& h : doc.at("hypotheses"))
    if (h.at("id") == "superquadratic_growth" && h.at("passed") == false)
      growth_failed = true;
  CHECK(growth_failed);
}

TEST_CASE("resonant entries fail alone, the sweep continues") {
  json body = json::parse(kSmallBenchmark);
  body["outputs"]["dir"] = "";
  body["outputs"]["formats"] = json::array();
  // second entry lands within the resonance guard of mu_2
  body["lambdas"] = {0.0, {{"mu", 2}, {"factor", 1.0 - 1e-13}}};
  ExperimentConfig cfg = parse_config(body.dump());
  cfg.write_json = false;
  cfg.write_csv = false;
  const auto rows = solve_all(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].accepted);
  CHECK_FALSE(rows[1].accepted);
  CHECK(rows[1].note.find("resonance") != std::string::npos);
}

TEST_CASE("negative lambda runs through the sign flip") {
  json body = json::parse(kSmallBenchmark);
  body["lambdas"] = {-1.0};
  ExperimentConfig cfg = parse_config(body.dump());
  cfg.write_json = false;
  cfg.write_csv = false;
  const auto rows = solve_all(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].accepted);
  CHECK(rows[0].lambda == -1.0);
  CHECK(rows[0].level > 0.0);
  // the coupling is active, so both components carry mass
  CHECK(rows[0].u1_norm > 1e-6);
  CHECK(rows[0].u2_norm > 1e-6);
}

TEST_CASE("refinement study tracks one branch across grids") {
  ExperimentConfig cfg = parse_config(kSmallBenchmark);
  const auto rows =
      refinement_study(cfg, {{48, 6.0}, {64, 6.0}, {48, 8.0}});
  REQUIRE(rows.size() == 3);
  for (const auto& grid_rows : rows) {
    REQUIRE(grid_rows.size() == 1);
    CHECK(grid_rows[0].accepted);
  }
  const double base = rows[0][0].level;
  CHECK(std::abs(rows[1][0].level - base) / base <= 0.02);
  CHECK(std::abs(rows[2][0].level - base) / base <= 0.02);
}

TEST_CASE("usage errors exit with code 2") {
  TempDir dir;
  CHECK(run_cli("solve") == 2);                       // missing --config
  CHECK(run_cli("frobnicate --config x.json") == 2);  // unknown subcommand
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << "{broken";
  CHECK(run_cli("solve --config " + bad.string()) == 2);
  CHECK(run_cli("solve --config " + (dir.path / "missing.json").string()) == 2);
}
