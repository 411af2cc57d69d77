#include "commands.hpp"

#include "mfgc/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace mfgc::cli;
  CLI::App app{"Mean field games of controls: equilibrium solver and monotonicity certifier"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (default: MFGC_THREADS or all cores)");

  std::string config;
  SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "Compute the equilibrium aggregate Q");
  solve->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", solve_flags.out, "JSON report path");
  solve->add_option("--csv", solve_flags.csv, "Q CSV path");
  solve->add_flag("--constant-only", solve_flags.constant_only,
                  "Solve the finite-dimensional constant-Q equation (x-free models)");

  CertifyFlags certify_flags;
  int samples = 0;
  std::uint64_t seed = 0;
  auto* certify = app.add_subcommand("certify", "Check the monotonicity assumptions");
  certify->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  certify->add_option("--out", certify_flags.out, "JSON report path");
  auto* samples_opt = certify->add_option("--samples", samples, "Sample count");
  auto* seed_opt = certify->add_option("--seed", seed, "Sampling seed");

  CounterexampleFlags witness_flags;
  int budget = 0;
  auto* counter = app.add_subcommand("counterexample", "Search for monotonicity violations");
  counter->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  counter->add_option("--out", witness_flags.out, "JSON report path");
  counter->add_option("--type", witness_flags.type, "lasry-lions or displacement")
      ->check(CLI::IsMember({"lasry-lions", "displacement"}));
  auto* budget_opt = counter->add_option("--budget", budget, "Expression evaluation budget");

  SensitivityFlags sens_flags;
  double h = 0.0;
  auto* sens = app.add_subcommand("sensitivity-check",
                                  "Compare the linearised path with finite differences");
  sens->set_help_flag("--help", "Print this help message and exit");
  sens->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  sens->add_option("--out", sens_flags.out, "JSON report path");
  auto* h_opt = sens->add_option("--h", h, "Finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (threads > 0) mfgc::set_thread_count(threads);

  return guarded(
      [&] {
        if (*solve) return cmd_solve(config, solve_flags, std::cout, std::cerr);
        if (*certify) {
          if (*samples_opt) certify_flags.samples = samples;
          if (*seed_opt) certify_flags.seed = seed;
          return cmd_certify(config, certify_flags, std::cout, std::cerr);
        }
        if (*counter) {
          if (*budget_opt) witness_flags.budget = budget;
          return cmd_counterexample(config, witness_flags, std::cout, std::cerr);
        }
        if (*h_opt) sens_flags.h = h;
        return cmd_sensitivity_check(config, sens_flags, std::cout, std::cerr);
      },
      std::cerr);
}
