#pragma once

#include "mfgc/certify.hpp"
#include "mfgc/equilibrium.hpp"
#include "mfgc/witness.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace mfgc::cli {

struct ModelSection {
  std::string family;
  int dim = 1;
  VelocityConvention convention = VelocityConvention::StateVelocity;
  ModelParams params;
};

struct TerminalSection {
  std::string type = "zero";  // zero | quadratic
  Mat weight;
  Vec center;
};

struct EnsembleSection {
  std::string type = "dirac";  // dirac | explicit | gaussian | grid | csv
  Mat points;                  // d x n (dirac, explicit)
  Vec weights;
  Vec mean;
  Mat covariance;
  int samples = 0;
  std::uint64_t seed = 0;
  Vec lower, upper;
  int points_per_axis = 0;
  std::string path;  // as written in the config
};

struct TimeSection {
  double horizon = 1.0;
  int steps = 100;
};

struct SolverSection {
  SolverOptions options;
  std::optional<Vec> initial_guess;  // constant path
  unsigned threads = 0;
};

struct CertifySection {
  std::optional<SampleBox> box;
  int samples = 2000;
  std::uint64_t seed = 1;
  int pairs = 50;
};

struct CounterexampleSection {
  WitnessSearchOptions options;
};

struct SensitivitySection {
  std::optional<Vec> x0;
  std::optional<Vec> Q;
  Vec direction;  // constant direction; empty means ones
  double h = 1e-5;
  int trials = 20;
  std::uint64_t seed = 1;
};

struct OutputSection {
  std::string report;
  std::string q_csv;
  std::string trajectory_csv;
};

struct RunConfig {
  std::filesystem::path base_dir;  // directory of the config file
  ModelSection model;
  TerminalSection terminal;
  EnsembleSection m0;
  TimeSection time;
  SolverSection solver;
  CertifySection certify;
  CounterexampleSection counterexample;
  SensitivitySection sensitivity;
  OutputSection output;
};

// Thrown for any config problem; the message starts with the dotted key path.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::Config, message) {}
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

ModelSpec build_model(const RunConfig& config);
ParticleEnsemble build_ensemble(const RunConfig& config);
TimeGrid build_grid(const RunConfig& config);
SolverOptions build_solver_options(const RunConfig& config, const TimeGrid& grid);
SampleSpec build_sample_spec(const RunConfig& config, const ModelSpec& model);

// Fully resolved configuration, defaults included.
nlohmann::json echo(const RunConfig& config);

}  // namespace mfgc::cli
