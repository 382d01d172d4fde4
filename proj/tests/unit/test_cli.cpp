#include "cli.hpp"
#include "ifeatt/error.hpp"
#include "ifeatt/inference.hpp"
#include "ifeatt/io.hpp"
#include "ifeatt/simulation.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace {

using namespace ifeatt;
using nlohmann::json;

std::string tmp_path(const std::string& name) {
  const char* dir = std::getenv("IFEATT_TEST_TMP");
  return std::string(dir ? dir : "/tmp") + "/" + name;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "ifeatt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture_csv(const sim::SimConfig& cfg, const std::string& name) {
  const std::string path = tmp_path(name);
  CsvSchema schema;
  schema.covariates = {"w"};
  write_panel_csv(path, sim::generate_panel(cfg, 0), schema);
  return path;
}

TEST(Cli, SimulateSingleCell) {
  const CliRun r = run({"simulate", "--cell", "F3=1,rho=1,n=1000", "--reps", "10"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Bias"), std::string::npos);
}

TEST(Cli, SimulateWritesCsv) {
  const std::string csv = tmp_path("cli_table.csv");
  const CliRun r = run({"simulate", "--cell", "F3=2,rho=0.5,n=200", "--cell", "F3=1,rho=1,n=200",
                     "--reps", "5", "--table-csv", csv});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(csv);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(sim::parse_table_csv(buf.str()).cells.size(), 2u);
}

TEST(Cli, MissingWIsAValidationError) {
  const std::string path = fixture_csv(sim::SimConfig{}, "cli_missing_w.csv");
  const CliRun r = run({"estimate", "--data", path, "--covariates", "w"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, BadInputsExitTwo) {
  EXPECT_EQ(run({"estimate", "--data", tmp_path("does_not_exist.csv"), "--w", "w"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "--cell", "F3=1,rho=3,n=100", "--reps", "2"}).code, 2);
}

TEST(Cli, EstimateMatchesLibrary) {
  sim::SimConfig cfg;
  cfg.n = 400;
  const std::string path = fixture_csv(cfg, "cli_fixture.csv");
  const std::string out = tmp_path("cli_result.json");
  const CliRun r = run({"estimate", "--data", path, "--covariates", "w", "--x", "const", "--w", "w",
                     "--output", out});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(out);
  const json doc = json::parse(in);

  CsvSchema schema;
  schema.covariates = {"w"};
  const PanelDataset data = load_panel_csv(path, schema);
  const AttSeries lib = estimate_att(data, ModelSpec::intercept_in_x(2), EstimatorId::IfePanel);
  ASSERT_EQ(doc["estimates"].size(), 1u);
  EXPECT_EQ(doc["estimates"][0]["att"].get<double>(), lib.att_at(3));
  EXPECT_EQ(doc["ses"][0]["delta"].get<double>(), *lib.se_at(3));
  EXPECT_TRUE(doc["ses"][0]["bootstrap"].is_null());
  EXPECT_TRUE(doc["ses"][0].contains("bootstrap_reason"));
  EXPECT_EQ(doc["j_test"]["label"], "exactly identified");
  EXPECT_TRUE(doc.contains("pretest"));
  EXPECT_TRUE(doc.contains("diagnostics"));
  EXPECT_TRUE(doc.contains("cis"));
}

TEST(Cli, ConfigFileAndFlagOverride) {
  sim::SimConfig cfg;
  cfg.n = 300;
  const std::string path = fixture_csv(cfg, "cli_config_fixture.csv");
  const std::string config = tmp_path("cli_config.json");
  {
    std::ofstream f(config);
    f << json{{"command", "estimate"},
              {"data", {{"path", path}, {"kind", "panel"}}},
              {"schema", {{"covariates", {"w"}}}},
              {"model", {{"estimator", "lt"}, {"w_cols", {"w"}}}}}
             .dump();
  }
  const CliRun lt = run({"--config", config, "estimate"});
  ASSERT_EQ(lt.code, 0) << lt.err;
  const CliRun did = run({"--config", config, "estimate", "--estimator", "did"});
  ASSERT_EQ(did.code, 0) << did.err;
  CsvSchema schema;
  schema.covariates = {"w"};
  const PanelDataset data = load_panel_csv(path, schema);
  EXPECT_EQ(json::parse(lt.out)["estimates"][0]["att"].get<double>(),
            estimate_att(data, ModelSpec::intercept_in_x(2), EstimatorId::Lt).att_at(3));
  EXPECT_EQ(json::parse(did.out)["estimates"][0]["att"].get<double>(),
            estimate_att(data, ModelSpec::intercept_in_x(2), EstimatorId::Did).att_at(3));
}

TEST(Cli, ParseRunConfig) {
  const cli::RunConfig c = cli::parse_run_config(
      R"({"seed": 5, "model": {"x_cols": ["const"], "w_cols": ["w"], "t_star": 4},
          "inference": {"bootstrap_reps": 200}, "simulate": {"grid_n": 250}})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.t_star, 4);
  EXPECT_EQ(c.w_cols, std::vector<std::string>{"w"});
  EXPECT_EQ(c.bootstrap_reps, 200);
  EXPECT_EQ(c.grid_n, 250);
  EXPECT_THROW(cli::parse_run_config("{not json"), Error);
  EXPECT_THROW(cli::parse_run_config(R"({"seed": "x"})"), Error);
}

TEST(Cli, CheckRelevance) {
  const std::string path = fixture_csv(sim::SimConfig{}, "cli_relevance.csv");
  const CliRun r = run({"check-relevance", "--data", path, "--covariates", "w", "--w", "w"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_FALSE(doc["relevance"]["rank_deficient"].get<bool>());
}

}  // namespace
