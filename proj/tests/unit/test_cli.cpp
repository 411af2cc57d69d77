#include "commands.hpp"
#include "config.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfgc;
using namespace mfgc::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = MFGC_CONFIG_DIR;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("mfgc_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }
  fs::path write(const std::string& leaf, const std::string& text) const {
    std::ofstream(path_ / leaf) << text;
    return path_ / leaf;
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string config_error(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "<accepted>";
}

const char* kMinimal = R"(
model: {family: separable_shifted, params: {epsilon: 0.5}}
m0: {type: dirac, point: [1.0]}
)";

}  // namespace

TEST(ConfigParse, MinimalConfigGetsDefaults) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.model.dim, 1);
  EXPECT_EQ(c.terminal.type, "zero");
  EXPECT_EQ(c.time.steps, 100);
  EXPECT_DOUBLE_EQ(c.time.horizon, 1.0);
  EXPECT_EQ(build_model(c).family(), Family::SeparableShifted);
}

TEST(ConfigParse, ErrorsNameTheOffendingKey) {
  EXPECT_EQ(config_error(R"(
model: {family: cournot, params: {s: 0.5, epsilon: 1}}
m0: {type: dirac, point: [1]}
)"),
            "model.params.s: must lie in (-1, 0), got 0.5");
  EXPECT_EQ(config_error(std::string(kMinimal) + "solvr: {tol: 1}\n"), "solvr: unknown key");
  EXPECT_EQ(config_error(R"(
model: {family: cournot, params: {s: -0.5, epsilon: 1, eps: 2}}
m0: {type: dirac, point: [1]}
)"),
            "model.params.eps: unknown key");
  EXPECT_NE(config_error(R"(
model: {family: cournot, params: {s: -0.5}}
m0: {type: dirac, point: [1]}
)").find("model.params.epsilon"),
            std::string::npos);
  EXPECT_NE(config_error(R"(
model: {family: quadratic_xv, dim: 2}
m0: {type: dirac, point: [1]}
)").find("m0.point"),
            std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "terminal: {type: quadratic, weight: -1}\n")
                .find("terminal.weight"),
            std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "solver: {fixed_step: 2.5}\n").find("solver.fixed_step"),
            std::string::npos);
  EXPECT_NE(config_error(R"(
model: {family: cournot, velocity_convention: state_velocity, params: {s: -0.5, epsilon: 1}}
m0: {type: dirac, point: [1]}
)").find("model.velocity_convention"),
            std::string::npos);
}

TEST(ConfigParse, EnsembleFromCsvIsRelativeToConfig) {
  ScratchDir dir("csv");
  dir.write("m0.csv", "x_1,weight\r\n1.0,0.5\r\n3.0,0.5\r\n");
  const auto path = dir.write("run.yaml", R"(
model: {family: quadratic_xv}
m0: {type: csv, path: m0.csv}
)");
  const auto c = load_config(path);
  const auto m0 = build_ensemble(c);
  EXPECT_EQ(m0.size(), 2);
  EXPECT_DOUBLE_EQ(m0.mean()[0], 2.0);
}

TEST(ConfigParse, EchoIsStable) {
  const auto a = echo(parse_config(kMinimal)).dump();
  const auto b = echo(parse_config(kMinimal)).dump();
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("\"epsilon\":0.5"), std::string::npos);
}

TEST(CommandSolve, ExampleConfigConverges) {
  std::ostringstream out, log;
  EXPECT_EQ(cmd_solve((kConfigs / "example31.yaml").string(), {}, out, log), kOk);
  const auto report = nlohmann::json::parse(out.str());
  EXPECT_EQ(report["status"], "converged");
  EXPECT_TRUE(report["constant_flag"].get<bool>());
  EXPECT_NEAR(report["Q_mean"][0].get<double>(), 0.4, 1e-6);
  EXPECT_NEAR(report["constant_solution"][0].get<double>(), 0.4, 1e-9);
  EXPECT_EQ(report["config"]["model"]["family"], "separable_shifted");
}

TEST(CommandSolve, ConstantOnlyMode) {
  std::ostringstream out, log;
  SolveFlags flags;
  flags.constant_only = true;
  EXPECT_EQ(cmd_solve((kConfigs / "example31.yaml").string(), flags, out, log), kOk);
  const auto report = nlohmann::json::parse(out.str());
  EXPECT_EQ(report["mode"], "constant");
  EXPECT_NEAR(report["Q_mean"][0].get<double>(), 0.4, 1e-10);
  std::ostringstream out2;
  EXPECT_EQ(guarded([&] { return cmd_solve((kConfigs / "quadratic_xv.yaml").string(), flags, out2, log); },
                    log),
            kConfigError);
}

TEST(CommandSolve, NoConvergenceStillWritesReport) {
  ScratchDir dir("noconv");
  const auto path = dir.write("run.yaml", std::string(kMinimal) +
                                              "terminal: {type: quadratic}\n"
                                              "solver: {tol: 1.0e-14, max_iter: 1}\n"
                                              "output: {report: report.json}\n");
  std::ostringstream out, log;
  EXPECT_EQ(guarded([&] { return cmd_solve(path.string(), {}, out, log); }, log), kNoConvergence);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["status"], "no_convergence");
  EXPECT_TRUE(report.contains("diagnostics"));
  EXPECT_TRUE(report.contains("last_iterate"));
}

TEST(CommandSolve, OutputsAreByteIdenticalAcrossRuns) {
  ScratchDir dir("determinism");
  SolveFlags flags;
  std::string reports[2], csvs[2];
  for (int run = 0; run < 2; ++run) {
    flags.out = (dir / ("r" + std::to_string(run) + ".json")).string();
    flags.csv = (dir / ("q" + std::to_string(run) + ".csv")).string();
    std::ostringstream out, log;
    ASSERT_EQ(cmd_solve((kConfigs / "cournot.yaml").string(), flags, out, log), kOk);
    reports[run] = slurp(flags.out);
    csvs[run] = slurp(flags.csv);
  }
  EXPECT_FALSE(reports[0].empty());
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(csvs[0], csvs[1]);
  EXPECT_EQ(csvs[0].substr(0, 7), "t,Q_1\r\n");
}

TEST(CommandCertify, ExitCodes) {
  std::ostringstream out, log;
  EXPECT_EQ(cmd_certify((kConfigs / "quadratic_xv.yaml").string(), {}, out, log), kOk);
  const auto report = nlohmann::json::parse(out.str());
  EXPECT_DOUBLE_EQ(report["certificate"]["assumption_A2"]["c"].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(report["certificate"]["assumption_A2"]["M"].get<double>(), 1.0);
  std::ostringstream out2;
  EXPECT_EQ(cmd_certify((kConfigs / "cournot_fail.yaml").string(), {}, out2, log), kCheckFailed);
  const auto failed = nlohmann::json::parse(out2.str());
  EXPECT_FALSE(failed["certificate"]["assumption_A1"]["pass"].get<bool>());
  EXPECT_NE(log.str().find("FAIL"), std::string::npos);
}

TEST(CommandCertify, FlagsOverrideConfig) {
  std::ostringstream out, log;
  CertifyFlags flags;
  flags.samples = 64;
  flags.seed = 12;
  EXPECT_EQ(cmd_certify((kConfigs / "example31.yaml").string(), flags, out, log), kOk);
  const auto report = nlohmann::json::parse(out.str());
  EXPECT_EQ(report["certificate"]["sample_spec"]["samples"], 64);
  EXPECT_EQ(report["certificate"]["sample_spec"]["seed"], 12);
}

TEST(CommandCounterexample, ExitCodes) {
  std::ostringstream out, log;
  CounterexampleFlags flags;
  EXPECT_EQ(cmd_counterexample((kConfigs / "cournot.yaml").string(), flags, out, log), kOk);
  flags.type = "displacement";
  std::ostringstream out2;
  EXPECT_EQ(cmd_counterexample((kConfigs / "cournot.yaml").string(), flags, out2, log), kOk);
  std::ostringstream out3;
  EXPECT_EQ(cmd_counterexample((kConfigs / "quadratic_xv.yaml").string(), flags, out3, log), kNotFound);
  const auto report = nlohmann::json::parse(out3.str());
  EXPECT_FALSE(report["found"].get<bool>());
  EXPECT_TRUE(report["negative"].is_null());
}

TEST(CommandSensitivity, PassesOnBothRegimes) {
  std::ostringstream out, log;
  EXPECT_EQ(cmd_sensitivity_check((kConfigs / "quadratic_xv.yaml").string(), {}, out, log), kOk);
  const auto xv = nlohmann::json::parse(out.str());
  EXPECT_LE(xv["fd_relative_error"].get<double>(), 1e-4);
  EXPECT_EQ(xv["energy_estimate"]["trials"].size(), 21u);
  std::ostringstream out2;
  EXPECT_EQ(cmd_sensitivity_check((kConfigs / "cournot.yaml").string(), {}, out2, log), kOk);
  const auto cournot = nlohmann::json::parse(out2.str());
  EXPECT_LE(cournot["closed_form_relative_error"].get<double>(), 1e-6);
}

TEST(CommandSensitivity, ZeroDirectionHasNoError) {
  ScratchDir dir("zero_dir");
  const auto path = dir.write("run.yaml", R"(
model: {family: quadratic_xv}
m0: {type: dirac, point: [1.0]}
sensitivity: {direction: [0.0], trials: 0}
)");
  std::ostringstream out, log;
  EXPECT_EQ(cmd_sensitivity_check(path.string(), {}, out, log), kOk);
  EXPECT_EQ(nlohmann::json::parse(out.str())["fd_relative_error"].get<double>(), 0.0);
}

TEST(Guarded, MapsErrorKindsToExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(guarded([]() -> int { throw ConfigError("x: bad"); }, err), kConfigError);
  EXPECT_EQ(guarded([]() -> int { throw no_convergence("stuck"); }, err), kNoConvergence);
  EXPECT_EQ(guarded([]() -> int { throw Error(ErrorKind::Io, "disk"); }, err), kConfigError);
  EXPECT_EQ(guarded([]() -> int { throw Error(ErrorKind::IntegrationBlowup, "big"); }, err),
            kNoConvergence);
  EXPECT_NE(err.str().find("error: x: bad"), std::string::npos);
}
