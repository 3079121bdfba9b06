#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poroscale/pipeline.hpp"

using namespace poroscale;
namespace fs = std::filesystem;

#ifndef POROSCALE_CLI
#define POROSCALE_CLI "poroscale"
#endif

namespace {

class CliTest : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / "poroscale_cli_test";
  void SetUp() override {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string write_config(const std::string& name, const json& j) {
    auto p = (dir / name).string();
    std::ofstream f(p);
    f << j.dump(2);
    return p;
  }
  int run_cli(const std::string& args) {
    std::string cmd = std::string(POROSCALE_CLI) + " " + args + " > " +
                      (dir / "stdout.txt").string() + " 2> " +
                      (dir / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
  }
  std::string stdout_text() {
    std::ifstream f(dir / "stdout.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
  std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  json theorem2_config() {
    json cfg;
    cfg["geometry"] = {{"generator", {{"kind", "laminate"}, {"dim", 2}, {"n", 16},
                                      {"axis", 0}, {"fluid_layers", 8}}}};
    cfg["parameters"]["alphas"] = {
        {"alpha_mu", {{"c", 1}, {"k", 1}}}, {"alpha_kappa_f", {{"c", 1}, {"k", 1}}},
        {"alpha_tau", 1.0},  {"alpha_lambda", 1.0}, {"alpha_eta", 1.0},
        {"alpha_p", 1.0},    {"alpha_kappa_s", 1.0}, {"alpha_theta_s", 0.5},
        {"alpha_theta_f", 0.5}, {"alpha_nu", 0.0}};
    cfg["solver"] = {{"cg_tolerance", 1e-10}, {"dt", 1e-3}, {"t_kernel", 0.05}};
    return cfg;
  }
};

}  // namespace

TEST_F(CliTest, ClassifyTheorem2PrintsModelAndExitsZero) {
  auto cfg = write_config("cfg.json", theorem2_config());
  int rc = run_cli("classify --config " + cfg + " --out " + (dir / "o").string());
  EXPECT_EQ(rc, 0);
  EXPECT_NE(stdout_text().find("ThermoPoroElastic_OneVelocity"), std::string::npos);
}

TEST_F(CliTest, Assumption2ViolationExitsTwo) {
  json cfg = theorem2_config();
  cfg["parameters"]["alphas"]["alpha_tau"] = json{{"c", 1}, {"k", 1}};  // tau0 = 0
  cfg["parameters"]["alphas"]["alpha_mu"] = json{{"c", 1}, {"k", 3}};   // mu1 = 0
  cfg["parameters"]["alphas"]["alpha_kappa_f"] = json{{"c", 1}, {"k", 3}};
  auto p = write_config("cfg.json", cfg);
  int rc = run_cli("classify --config " + p + " --out " + (dir / "o").string());
  EXPECT_EQ(rc, 2);
}

TEST_F(CliTest, PowerLawTheorem4Classifies) {
  json cfg = theorem2_config();
  cfg["parameters"]["alphas"]["alpha_mu"] = 1.0;
  cfg["parameters"]["alphas"]["alpha_kappa_f"] = 1.0;
  auto p = write_config("cfg.json", cfg);
  int rc = run_cli("classify --config " + p + " --out " + (dir / "o").string());
  EXPECT_EQ(rc, 0);
  EXPECT_NE(stdout_text().find("ThermoViscoElastic"), std::string::npos);
}

TEST_F(CliTest, CorruptedGeometryFileExitsThree) {
  auto gpath = (dir / "bad.cell").string();
  {
    std::ofstream f(gpath);
    f << "this is not a cell file\n";
  }
  json cfg = theorem2_config();
  cfg["geometry"] = {{"file", gpath}};
  auto p = write_config("cfg.json", cfg);
  int rc = run_cli("upscale --config " + p + " --out " + (dir / "o").string());
  EXPECT_EQ(rc, 3);
}

TEST_F(CliTest, UpscaleIsBitDeterministic) {
  auto p = write_config("cfg.json", theorem2_config());
  ASSERT_EQ(run_cli("upscale --config " + p + " --out " + (dir / "o1").string()), 0);
  ASSERT_EQ(run_cli("upscale --config " + p + " --out " + (dir / "o2").string()), 0);
  EXPECT_EQ(slurp(dir / "o1" / "coefficients.json"), slurp(dir / "o2" / "coefficients.json"));
  EXPECT_FALSE(slurp(dir / "o1" / "coefficients.json").empty());
}

TEST_F(CliTest, ThreadedUpscaleMatchesSerial) {
  auto p = write_config("cfg.json", theorem2_config());
  ASSERT_EQ(run_cli("upscale --config " + p + " --threads 1 --out " + (dir / "s").string()), 0);
  ASSERT_EQ(run_cli("upscale --config " + p + " --threads 2 --out " + (dir / "t").string()), 0);
  EXPECT_EQ(slurp(dir / "s" / "coefficients.json"), slurp(dir / "t" / "coefficients.json"));
}

TEST_F(CliTest, ZeroForcingRunWritesZeroCsv) {
  json cfg = theorem2_config();
  cfg["macro"] = {{"nx", 8}, {"dt", 1e-3}, {"T", 0.01}};
  auto p = write_config("cfg.json", cfg);
  ASSERT_EQ(run_cli("run --config " + p + " --out " + (dir / "r").string()), 0);
  std::string u = slurp(dir / "r" / "u.csv");
  std::istringstream is(u);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    auto comma = line.find(',');
    EXPECT_NE(comma, std::string::npos);
    std::string rest = line.substr(comma + 1);
    for (char& ch : rest)
      if (ch == ',') ch = ' ';
    std::istringstream vals(rest);
    double v;
    while (vals >> v) EXPECT_EQ(v, 0.0);
  }
}

TEST_F(CliTest, MissingKernelHorizonExitsFour) {
  json cfg = theorem2_config();
  // Theorem 4 parameters, kernels over a short horizon, run beyond it
  cfg["parameters"]["alphas"]["alpha_mu"] = 1.0;
  cfg["parameters"]["alphas"]["alpha_kappa_f"] = 1.0;
  cfg["outputs"] = {"coefficients", "kernels", "macro-run"};
  cfg["solver"] = {{"cg_tolerance", 1e-8}, {"dt", 5e-3}, {"t_kernel", 0.02}};
  cfg["macro"] = {{"nx", 4}, {"dt", 5e-3}, {"T", 0.2}};
  auto p = write_config("cfg.json", cfg);
  int rc = run_cli("run --config " + p + " --out " + (dir / "k").string());
  EXPECT_EQ(rc, 4);
  std::string err = slurp(dir / "stderr.txt");
  EXPECT_NE(err.find("kernel horizon"), std::string::npos);
}

TEST_F(CliTest, VerifySubcommandReportsChecks) {
  auto p = write_config("cfg.json", theorem2_config());
  ASSERT_EQ(run_cli("upscale --config " + p + " --out " + (dir / "o").string()), 0);
  int rc = run_cli("verify --config " + p + " --coefficients " +
                   (dir / "o" / "coefficients.json").string());
  EXPECT_EQ(rc, 0);
  EXPECT_NE(stdout_text().find("[PASS]"), std::string::npos);
}

TEST(PipelineInProcess, UpscaleDocumentsAreIdentical) {
  json cfg;
  cfg["geometry"] = {{"generator", {{"kind", "random"}, {"dim", 2}, {"n", 12},
                                    {"fluid_fraction", 0.45}, {"seed", 5}}}};
  cfg["parameters"]["alphas"] = {{"alpha_mu", {{"c", 1}, {"k", 2}}},
                                 {"alpha_kappa_f", {{"c", 1}, {"k", 2}}}};
  cfg["solver"] = {{"cg_tolerance", 1e-10}, {"dt", 1e-3}, {"t_kernel", 0.02}};
  auto dir = fs::temp_directory_path() / "poroscale_pipe_test";
  fs::create_directories(dir);
  auto path = (dir / "cfg.json").string();
  {
    std::ofstream f(path);
    f << cfg.dump();
  }
  auto c1 = load_pipeline_config(path);
  auto c2 = load_pipeline_config(path);
  auto r1 = run_upscale(c1);
  auto r2 = run_upscale(c2);
  EXPECT_EQ(upscale_document(c1, r1).dump(), upscale_document(c2, r2).dump());
  fs::remove_all(dir);
}
