#include "config.hpp"

#include "mfgc/serialize.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mfgc::cli {
namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_map(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) fail(path, "expected a mapping");
}

void check_keys(const YAML::Node& node, const std::string& path,
                const std::set<std::string>& allowed) {
  check_map(node, path);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(join(path, key), "unknown key");
  }
}

double as_double(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a number");
  try {
    const double v = node.as<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
  } catch (const YAML::Exception&) {
    fail(path, "expected a number, got '" + node.Scalar() + "'");
  }
}

long as_integer(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected an integer");
  try {
    return node.as<long>();
  } catch (const YAML::Exception&) {
    fail(path, "expected an integer, got '" + node.Scalar() + "'");
  }
}

std::uint64_t as_seed(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a nonnegative integer");
  try {
    return node.as<std::uint64_t>();
  } catch (const YAML::Exception&) {
    fail(path, "expected a nonnegative integer, got '" + node.Scalar() + "'");
  }
}

std::string as_string(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a string");
  return node.Scalar();
}

// Scalar (broadcast to dim) or list of dim numbers.
Vec as_vector(const YAML::Node& node, const std::string& path, int dim) {
  if (node.IsScalar()) return Vec::Constant(dim, as_double(node, path));
  if (!node.IsSequence()) fail(path, "expected a number or a list of numbers");
  if (static_cast<int>(node.size()) != dim) {
    fail(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(node.size()));
  }
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = as_double(node[i], path + "[" + std::to_string(i) + "]");
  return v;
}

// Scalar (times identity), list (diagonal) or list of rows.
Mat as_matrix(const YAML::Node& node, const std::string& path, int dim) {
  if (node.IsScalar()) return as_double(node, path) * Mat::Identity(dim, dim);
  if (!node.IsSequence() || static_cast<int>(node.size()) != dim) {
    fail(path, "expected a number, a list of " + std::to_string(dim) + " numbers or a " +
                   std::to_string(dim) + "x" + std::to_string(dim) + " list of rows");
  }
  if (node[0].IsScalar()) return as_vector(node, path, dim).asDiagonal();
  Mat m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    m.row(r) = as_vector(node[r], path + "[" + std::to_string(r) + "]", dim).transpose();
  }
  return m;
}

Polynomial2 as_polynomial(const YAML::Node& node, const std::string& path) {
  const Vec c = as_vector(node, path, 3);
  if (node.IsScalar()) fail(path, "expected [c0, c1, c2]");
  return {c[0], c[1], c[2]};
}

std::pair<double, double> as_range(const YAML::Node& node, const std::string& path) {
  const Vec r = as_vector(node, path, 2);
  if (node.IsScalar()) fail(path, "expected [lo, hi]");
  if (!(r[0] <= r[1])) fail(path, "lower end exceeds upper end");
  return {r[0], r[1]};
}

void require(bool ok, const std::string& path, const std::string& what, double got) {
  if (!ok) {
    std::ostringstream os;
    os << what << ", got " << format_double(got);
    fail(path, os.str());
  }
}

void parse_model(const YAML::Node& node, ModelSection& m) {
  const std::string path = "model";
  check_keys(node, path, {"family", "dim", "velocity_convention", "params"});
  if (!node["family"]) fail(join(path, "family"), "required");
  m.family = as_string(node["family"], join(path, "family"));
  const auto family = family_from_string(m.family);
  if (!family) {
    fail(join(path, "family"),
         "unknown family '" + m.family +
             "' (expected separable_shifted, cournot, quadratic_xv, generalized_quadratic or "
             "cournot_x)");
  }
  if (*family == Family::Custom) {
    fail(join(path, "family"), "custom Lagrangians are available through the library API only");
  }
  if (node["dim"]) {
    const long d = as_integer(node["dim"], join(path, "dim"));
    require(d >= 1 && d <= 64, join(path, "dim"), "must lie in [1, 64]", static_cast<double>(d));
    m.dim = static_cast<int>(d);
  }
  const bool production = *family == Family::Cournot || *family == Family::CournotX;
  m.convention = production ? VelocityConvention::Production : VelocityConvention::StateVelocity;
  if (node["velocity_convention"]) {
    const auto text = as_string(node["velocity_convention"], join(path, "velocity_convention"));
    if (text != to_string(m.convention)) {
      fail(join(path, "velocity_convention"),
           "family " + m.family + " uses '" + std::string(to_string(m.convention)) + "'");
    }
  }

  const std::string ppath = join(path, "params");
  const YAML::Node params = node["params"] ? node["params"] : YAML::Node(YAML::NodeType::Map);
  auto& p = m.params;
  auto get = [&](const char* key, double& target) {
    if (params[key]) target = as_double(params[key], join(ppath, key));
  };
  switch (*family) {
    case Family::SeparableShifted:
      check_keys(params, ppath, {"epsilon", "ell_quadratic", "ell_quartic"});
      get("epsilon", p.epsilon);
      get("ell_quadratic", p.ell_quadratic);
      get("ell_quartic", p.ell_quartic);
      require(p.ell_quadratic > 0.0, join(ppath, "ell_quadratic"), "must be positive",
              p.ell_quadratic);
      require(p.ell_quartic >= 0.0, join(ppath, "ell_quartic"), "must be nonnegative",
              p.ell_quartic);
      break;
    case Family::Cournot:
      check_keys(params, ppath, {"epsilon", "s", "q_min"});
      get("epsilon", p.epsilon);
      get("s", p.s);
      get("q_min", p.q_min);
      break;
    case Family::CournotX:
      check_keys(params, ppath, {"epsilon", "s", "c1", "c2", "q_min"});
      p.c1 = -1.0;
      get("epsilon", p.epsilon);
      get("s", p.s);
      get("c1", p.c1);
      get("c2", p.c2);
      get("q_min", p.q_min);
      require(p.c1 < 0.0, join(ppath, "c1"), "must be negative", p.c1);
      require(p.c2 > 0.0, join(ppath, "c2"), "must be positive", p.c2);
      break;
    case Family::QuadraticXV:
      check_keys(params, ppath, {});
      break;
    case Family::GeneralizedQuadratic:
      check_keys(params, ppath, {"kinetic", "potential", "coupling"});
      if (params["kinetic"]) p.kinetic = as_polynomial(params["kinetic"], join(ppath, "kinetic"));
      if (params["potential"]) {
        p.potential = as_polynomial(params["potential"], join(ppath, "potential"));
      }
      if (params["coupling"]) {
        p.coupling = as_polynomial(params["coupling"], join(ppath, "coupling"));
      }
      require(p.coupling.c2 == 0.0, join(ppath, "coupling") + "[2]",
              "coupling h must be affine (zero quadratic coefficient)", p.coupling.c2);
      break;
    case Family::Custom:
      break;
  }
  if (production) {
    require(p.s > -1.0 && p.s < 0.0, join(ppath, "s"), "must lie in (-1, 0)", p.s);
    require(p.q_min > 0.0, join(ppath, "q_min"), "must be positive", p.q_min);
  }
  if (*family == Family::SeparableShifted || production) {
    if (!params["epsilon"]) fail(join(ppath, "epsilon"), "required");
    require(p.epsilon > 0.0, join(ppath, "epsilon"), "must be positive", p.epsilon);
  }
}

void parse_terminal(const YAML::Node& node, TerminalSection& t, int dim) {
  const std::string path = "terminal";
  check_keys(node, path, {"type", "weight", "center"});
  if (node["type"]) t.type = as_string(node["type"], join(path, "type"));
  if (t.type == "zero") {
    if (node["weight"] || node["center"]) fail(path, "zero terminal cost takes no weight or center");
    return;
  }
  if (t.type != "quadratic") fail(join(path, "type"), "expected 'zero' or 'quadratic'");
  t.weight = node["weight"] ? as_matrix(node["weight"], join(path, "weight"), dim)
                            : Mat::Identity(dim, dim);
  t.center = node["center"] ? as_vector(node["center"], join(path, "center"), dim)
                            : Vec::Zero(dim);
  if (!t.weight.isApprox(t.weight.transpose(), 1e-12)) {
    fail(join(path, "weight"), "must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(t.weight);
  require(es.eigenvalues().minCoeff() >= -1e-12, join(path, "weight"),
          "must be positive semidefinite (min eigenvalue)", es.eigenvalues().minCoeff());
}

void parse_m0(const YAML::Node& node, EnsembleSection& e, int dim) {
  const std::string path = "m0";
  check_map(node, path);
  if (node["type"]) e.type = as_string(node["type"], join(path, "type"));
  if (e.type == "dirac") {
    check_keys(node, path, {"type", "point"});
    if (!node["point"]) fail(join(path, "point"), "required");
    e.points = as_vector(node["point"], join(path, "point"), dim);
    e.weights = Vec::Ones(1);
  } else if (e.type == "explicit") {
    check_keys(node, path, {"type", "points", "weights"});
    const auto pts = node["points"];
    if (!pts || !pts.IsSequence() || pts.size() == 0) {
      fail(join(path, "points"), "expected a nonempty list of points");
    }
    const int n = static_cast<int>(pts.size());
    e.points.resize(dim, n);
    for (int i = 0; i < n; ++i) {
      e.points.col(i) = as_vector(pts[i], join(path, "points") + "[" + std::to_string(i) + "]", dim);
    }
    if (node["weights"]) {
      const auto w = node["weights"];
      if (!w.IsSequence()) fail(join(path, "weights"), "expected a list");
      e.weights = as_vector(w, join(path, "weights"), n);
    } else {
      e.weights = Vec::Constant(n, 1.0 / n);
      e.weights /= e.weights.sum();
    }
    for (int i = 0; i < n; ++i) {
      require(e.weights[i] >= 0.0, join(path, "weights") + "[" + std::to_string(i) + "]",
              "must be nonnegative", e.weights[i]);
    }
    require(std::abs(e.weights.sum() - 1.0) <= 1e-12, join(path, "weights"), "must sum to 1",
            e.weights.sum());
  } else if (e.type == "gaussian") {
    check_keys(node, path, {"type", "mean", "covariance", "samples", "seed"});
    for (const char* key : {"mean", "covariance", "samples"}) {
      if (!node[key]) fail(join(path, key), "required");
    }
    e.mean = as_vector(node["mean"], join(path, "mean"), dim);
    e.covariance = as_matrix(node["covariance"], join(path, "covariance"), dim);
    const long n = as_integer(node["samples"], join(path, "samples"));
    require(n >= 1 && n <= 1'000'000, join(path, "samples"), "must lie in [1, 1000000]",
            static_cast<double>(n));
    e.samples = static_cast<int>(n);
    e.seed = node["seed"] ? as_seed(node["seed"], join(path, "seed")) : 0;
  } else if (e.type == "grid") {
    check_keys(node, path, {"type", "lower", "upper", "points_per_axis"});
    for (const char* key : {"lower", "upper", "points_per_axis"}) {
      if (!node[key]) fail(join(path, key), "required");
    }
    e.lower = as_vector(node["lower"], join(path, "lower"), dim);
    e.upper = as_vector(node["upper"], join(path, "upper"), dim);
    if ((e.upper.array() < e.lower.array()).any()) fail(join(path, "upper"), "below lower");
    const long n = as_integer(node["points_per_axis"], join(path, "points_per_axis"));
    require(n >= 1 && n <= 10000, join(path, "points_per_axis"), "must lie in [1, 10000]",
            static_cast<double>(n));
    e.points_per_axis = static_cast<int>(n);
  } else if (e.type == "csv") {
    check_keys(node, path, {"type", "path"});
    if (!node["path"]) fail(join(path, "path"), "required");
    e.path = as_string(node["path"], join(path, "path"));
  } else {
    fail(join(path, "type"), "expected dirac, explicit, gaussian, grid or csv");
  }
}

void parse_time(const YAML::Node& node, TimeSection& t) {
  check_keys(node, "time", {"horizon", "steps"});
  if (node["horizon"]) t.horizon = as_double(node["horizon"], "time.horizon");
  if (node["steps"]) {
    const long n = as_integer(node["steps"], "time.steps");
    require(n >= 2 && n <= 1'000'000, "time.steps", "must lie in [2, 1000000]",
            static_cast<double>(n));
    t.steps = static_cast<int>(n);
  }
  require(t.horizon > 0.0, "time.horizon", "must be positive", t.horizon);
}

void parse_solver(const YAML::Node& node, SolverSection& s, int dim) {
  const std::string path = "solver";
  check_keys(node, path, {"tol", "max_iter", "initial_step", "fixed_step", "initial_guess",
                          "threads"});
  auto& o = s.options;
  if (node["tol"]) o.tol = as_double(node["tol"], "solver.tol");
  if (node["max_iter"]) o.max_iter = static_cast<int>(as_integer(node["max_iter"], "solver.max_iter"));
  if (node["initial_step"]) o.initial_step = as_double(node["initial_step"], "solver.initial_step");
  if (node["fixed_step"]) o.fixed_step = as_double(node["fixed_step"], "solver.fixed_step");
  if (node["initial_guess"]) s.initial_guess = as_vector(node["initial_guess"], "solver.initial_guess", dim);
  if (node["threads"]) {
    const long t = as_integer(node["threads"], "solver.threads");
    require(t >= 0 && t <= 1024, "solver.threads", "must lie in [0, 1024]", static_cast<double>(t));
    s.threads = static_cast<unsigned>(t);
  }
  require(o.tol > 0.0, "solver.tol", "must be positive", o.tol);
  require(o.max_iter >= 1, "solver.max_iter", "must be positive", o.max_iter);
  require(o.initial_step > 0.0, "solver.initial_step", "must be positive", o.initial_step);
  if (o.fixed_step) {
    require(*o.fixed_step > 0.0 && *o.fixed_step < 2.0, "solver.fixed_step", "must lie in (0, 2)",
            *o.fixed_step);
  }
}

void parse_certify(const YAML::Node& node, CertifySection& c) {
  const std::string path = "certify";
  check_keys(node, path, {"samples", "seed", "pairs", "box"});
  if (node["samples"]) {
    const long n = as_integer(node["samples"], "certify.samples");
    require(n >= 1 && n <= 10'000'000, "certify.samples", "must lie in [1, 10000000]",
            static_cast<double>(n));
    c.samples = static_cast<int>(n);
  }
  if (node["seed"]) c.seed = as_seed(node["seed"], "certify.seed");
  if (node["pairs"]) {
    const long n = as_integer(node["pairs"], "certify.pairs");
    require(n >= 0 && n <= 100000, "certify.pairs", "must lie in [0, 100000]", static_cast<double>(n));
    c.pairs = static_cast<int>(n);
  }
  if (node["box"]) {
    check_keys(node["box"], "certify.box", {"x", "v", "Q"});
    SampleBox box;
    // Unspecified ranges are filled from the family default in build_sample_spec;
    // mark them with NaN here.
    box.x_lo = box.x_hi = box.v_lo = box.v_hi = box.Q_lo = box.Q_hi = std::nan("");
    if (node["box"]["x"]) std::tie(box.x_lo, box.x_hi) = as_range(node["box"]["x"], "certify.box.x");
    if (node["box"]["v"]) std::tie(box.v_lo, box.v_hi) = as_range(node["box"]["v"], "certify.box.v");
    if (node["box"]["Q"]) std::tie(box.Q_lo, box.Q_hi) = as_range(node["box"]["Q"], "certify.box.Q");
    c.box = box;
  }
}

void parse_counterexample(const YAML::Node& node, CounterexampleSection& c) {
  check_keys(node, "counterexample", {"budget", "seed", "range", "grid_points"});
  auto& o = c.options;
  if (node["budget"]) {
    const long b = as_integer(node["budget"], "counterexample.budget");
    require(b >= 1 && b <= 100'000'000, "counterexample.budget", "must lie in [1, 100000000]",
            static_cast<double>(b));
    o.budget = static_cast<int>(b);
  }
  if (node["seed"]) o.seed = as_seed(node["seed"], "counterexample.seed");
  if (node["range"]) o.range = as_double(node["range"], "counterexample.range");
  if (node["grid_points"]) {
    o.grid_points = static_cast<int>(as_integer(node["grid_points"], "counterexample.grid_points"));
  }
  require(o.range > 0.0, "counterexample.range", "must be positive", o.range);
  require(o.grid_points >= 4 && o.grid_points <= 256, "counterexample.grid_points",
          "must lie in [4, 256]", o.grid_points);
}

void parse_sensitivity(const YAML::Node& node, SensitivitySection& s, int dim) {
  const std::string path = "sensitivity";
  check_keys(node, path, {"x0", "Q", "direction", "h", "trials", "seed"});
  if (node["x0"]) s.x0 = as_vector(node["x0"], "sensitivity.x0", dim);
  if (node["Q"]) s.Q = as_vector(node["Q"], "sensitivity.Q", dim);
  if (node["direction"]) s.direction = as_vector(node["direction"], "sensitivity.direction", dim);
  if (node["h"]) s.h = as_double(node["h"], "sensitivity.h");
  if (node["trials"]) s.trials = static_cast<int>(as_integer(node["trials"], "sensitivity.trials"));
  if (node["seed"]) s.seed = as_seed(node["seed"], "sensitivity.seed");
  require(s.h > 0.0, "sensitivity.h", "must be positive", s.h);
  require(s.trials >= 0 && s.trials <= 10000, "sensitivity.trials", "must lie in [0, 10000]",
          s.trials);
}

void parse_output(const YAML::Node& node, OutputSection& o) {
  check_keys(node, "output", {"report", "q_csv", "trajectory_csv"});
  if (node["report"]) o.report = as_string(node["report"], "output.report");
  if (node["q_csv"]) o.q_csv = as_string(node["q_csv"], "output.q_csv");
  if (node["trajectory_csv"]) o.trajectory_csv = as_string(node["trajectory_csv"], "output.trajectory_csv");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: YAML syntax error at line " + std::to_string(e.mark.line + 1) +
                      ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  check_keys(root, "", {"model", "terminal", "m0", "time", "solver", "certify", "counterexample",
                        "sensitivity", "output"});
  RunConfig c;
  c.base_dir = base_dir;
  try {
    if (!root["model"]) fail("model", "required section");
    parse_model(root["model"], c.model);
    const int d = c.model.dim;
    if (root["terminal"]) parse_terminal(root["terminal"], c.terminal, d);
    if (!root["m0"]) fail("m0", "required section");
    parse_m0(root["m0"], c.m0, d);
    if (root["time"]) parse_time(root["time"], c.time);
    if (root["solver"]) parse_solver(root["solver"], c.solver, d);
    if (root["certify"]) parse_certify(root["certify"], c.certify);
    if (root["counterexample"]) parse_counterexample(root["counterexample"], c.counterexample);
    if (root["sensitivity"]) parse_sensitivity(root["sensitivity"], c.sensitivity, d);
    if (root["output"]) parse_output(root["output"], c.output);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path().empty() ? "." : path.parent_path());
}

ModelSpec build_model(const RunConfig& config) {
  const auto& m = config.model;
  const auto& p = m.params;
  try {
    ModelSpec model = [&] {
      switch (*family_from_string(m.family)) {
        case Family::SeparableShifted:
          return ModelSpec::separable_shifted(m.dim, p.epsilon, p.ell_quadratic, p.ell_quartic);
        case Family::Cournot:
          return ModelSpec::cournot(m.dim, p.s, p.epsilon, p.q_min);
        case Family::QuadraticXV:
          return ModelSpec::quadratic_xv(m.dim);
        case Family::GeneralizedQuadratic:
          return ModelSpec::generalized_quadratic(m.dim, p.kinetic, p.potential, p.coupling);
        case Family::CournotX:
          return ModelSpec::cournot_x(m.dim, p.s, p.epsilon, p.c1, p.c2, p.q_min);
        case Family::Custom:
          break;
      }
      throw ConfigError("model.family: unsupported");
    }();
    const auto& t = config.terminal;
    if (t.type == "quadratic") return model.with_terminal(TerminalCost::quadratic(t.weight, t.center));
    return model.with_terminal(TerminalCost::zero(m.dim));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("model.params: ") + e.what());
  }
}

ParticleEnsemble build_ensemble(const RunConfig& config) {
  const auto& e = config.m0;
  try {
    if (e.type == "dirac" || e.type == "explicit") return ParticleEnsemble(e.points, e.weights);
    if (e.type == "gaussian") return ParticleEnsemble::gaussian(e.mean, e.covariance, e.samples, e.seed);
    if (e.type == "grid") return ParticleEnsemble::uniform_grid(e.lower, e.upper, e.points_per_axis);
    const auto file = std::filesystem::path(e.path).is_absolute() ? std::filesystem::path(e.path)
                                                                  : config.base_dir / e.path;
    auto ensemble = ParticleEnsemble::read_csv_file(file.string());
    if (ensemble.dim() != config.model.dim) {
      throw ConfigError("m0.path: ensemble dimension " + std::to_string(ensemble.dim()) +
                        " does not match model.dim");
    }
    return ensemble;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(std::string("m0: ") + err.what());
  }
}

TimeGrid build_grid(const RunConfig& config) { return TimeGrid(config.time.horizon, config.time.steps); }

SolverOptions build_solver_options(const RunConfig& config, const TimeGrid& grid) {
  SolverOptions o = config.solver.options;
  if (config.solver.initial_guess) o.initial_guess = ControlPath::constant(grid, *config.solver.initial_guess);
  return o;
}

SampleSpec build_sample_spec(const RunConfig& config, const ModelSpec& model) {
  SampleSpec spec;
  spec.box = default_box(model);
  if (config.certify.box) {
    const auto& b = *config.certify.box;
    if (!std::isnan(b.x_lo)) spec.box.x_lo = b.x_lo, spec.box.x_hi = b.x_hi;
    if (!std::isnan(b.v_lo)) spec.box.v_lo = b.v_lo, spec.box.v_hi = b.v_hi;
    if (!std::isnan(b.Q_lo)) spec.box.Q_lo = b.Q_lo, spec.box.Q_hi = b.Q_hi;
  }
  spec.samples = config.certify.samples;
  spec.seed = config.certify.seed;
  return spec;
}

nlohmann::json echo(const RunConfig& c) {
  using nlohmann::json;
  json out;
  const auto& p = c.model.params;
  json params;
  switch (*family_from_string(c.model.family)) {
    case Family::SeparableShifted:
      params = {{"epsilon", p.epsilon}, {"ell_quadratic", p.ell_quadratic}, {"ell_quartic", p.ell_quartic}};
      break;
    case Family::Cournot:
      params = {{"epsilon", p.epsilon}, {"s", p.s}, {"q_min", p.q_min}};
      break;
    case Family::CournotX:
      params = {{"epsilon", p.epsilon}, {"s", p.s}, {"c1", p.c1}, {"c2", p.c2}, {"q_min", p.q_min}};
      break;
    case Family::GeneralizedQuadratic: {
      auto poly = [](const Polynomial2& q) { return json::array({q.c0, q.c1, q.c2}); };
      params = {{"kinetic", poly(p.kinetic)}, {"potential", poly(p.potential)}, {"coupling", poly(p.coupling)}};
      break;
    }
    default:
      params = json::object();
  }
  out["model"] = {{"family", c.model.family},
                  {"dim", c.model.dim},
                  {"velocity_convention", std::string(to_string(c.model.convention))},
                  {"params", params}};
  out["terminal"] = {{"type", c.terminal.type}};
  if (c.terminal.type == "quadratic") {
    out["terminal"]["weight"] = to_json(c.terminal.weight);
    out["terminal"]["center"] = to_json(c.terminal.center);
  }
  json m0 = {{"type", c.m0.type}};
  if (c.m0.type == "dirac") m0["point"] = to_json(Vec(c.m0.points.col(0)));
  if (c.m0.type == "explicit") {
    m0["points"] = to_json(Mat(c.m0.points.transpose()));
    m0["weights"] = to_json(c.m0.weights);
  }
  if (c.m0.type == "gaussian") {
    m0["mean"] = to_json(c.m0.mean);
    m0["covariance"] = to_json(c.m0.covariance);
    m0["samples"] = c.m0.samples;
    m0["seed"] = c.m0.seed;
  }
  if (c.m0.type == "grid") {
    m0["lower"] = to_json(c.m0.lower);
    m0["upper"] = to_json(c.m0.upper);
    m0["points_per_axis"] = c.m0.points_per_axis;
  }
  if (c.m0.type == "csv") m0["path"] = c.m0.path;
  out["m0"] = m0;
  out["time"] = {{"horizon", c.time.horizon}, {"steps", c.time.steps}};
  const auto& o = c.solver.options;
  out["solver"] = {{"tol", o.tol}, {"max_iter", o.max_iter}, {"initial_step", o.initial_step},
                   {"fixed_step", o.fixed_step ? json(*o.fixed_step) : json(nullptr)},
                   {"initial_guess", c.solver.initial_guess ? to_json(*c.solver.initial_guess) : json(nullptr)}};
  json certify = {{"samples", c.certify.samples}, {"seed", c.certify.seed}, {"pairs", c.certify.pairs}};
  out["certify"] = certify;
  const auto& w = c.counterexample.options;
  out["counterexample"] = {{"budget", w.budget}, {"seed", w.seed}, {"range", w.range}, {"grid_points", w.grid_points}};
  const auto& s = c.sensitivity;
  out["sensitivity"] = {{"x0", s.x0 ? to_json(*s.x0) : json(nullptr)},
                        {"Q", s.Q ? to_json(*s.Q) : json(nullptr)},
                        {"direction", s.direction.size() ? to_json(s.direction) : json(nullptr)},
                        {"h", s.h}, {"trials", s.trials}, {"seed", s.seed}};
  out["output"] = {{"report", c.output.report}, {"q_csv", c.output.q_csv}, {"trajectory_csv", c.output.trajectory_csv}};
  return out;
}

}  // namespace mfgc::cli
