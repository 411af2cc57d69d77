#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace mfgc::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kNoConvergence = 2,
  kCheckFailed = 3,
  kNotFound = 4,
};

struct SolveFlags {
  std::string out;  // JSON report path (overrides output.report)
  std::string csv;  // Q CSV path (overrides output.q_csv)
  bool constant_only = false;
};

struct CertifyFlags {
  std::string out;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
};

struct CounterexampleFlags {
  std::string out;
  std::string type = "lasry-lions";  // lasry-lions | displacement
  std::optional<int> budget;
};

struct SensitivityFlags {
  std::string out;
  std::optional<double> h;
};

// Each command writes its JSON report to the configured path, or to `out`
// when no path is set, and a short human summary to `log`.
int cmd_solve(const std::string& config_path, const SolveFlags& flags, std::ostream& out,
              std::ostream& log);
int cmd_certify(const std::string& config_path, const CertifyFlags& flags, std::ostream& out,
                std::ostream& log);
int cmd_counterexample(const std::string& config_path, const CounterexampleFlags& flags,
                       std::ostream& out, std::ostream& log);
int cmd_sensitivity_check(const std::string& config_path, const SensitivityFlags& flags,
                          std::ostream& out, std::ostream& log);

// Runs a command, mapping escaped exceptions onto the exit-code contract.
int guarded(const std::function<int()>& command, std::ostream& err);

}  // namespace mfgc::cli
