#include "commands.hpp"

#include "config.hpp"

#include "mfgc/parallel.hpp"
#include "mfgc/serialize.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mfgc::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flag paths are taken as given; config paths are relative to the config file.
std::string resolve(const std::string& flag, const std::string& configured, const RunConfig& c) {
  if (!flag.empty()) return flag;
  if (configured.empty()) return {};
  const fs::path p(configured);
  return (p.is_absolute() ? p : c.base_dir / p).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f << content;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

void emit_report(const json& report, const std::string& path, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
}

RunConfig prepare(const std::string& config_path) {
  RunConfig config = load_config(config_path);
  if (config.solver.threads > 0) set_thread_count(config.solver.threads);
  return config;
}

json instance_json(const WitnessInstance& w) {
  json out;
  auto measure = [](const std::vector<Atom>& mu) {
    json arr = json::array();
    for (const auto& a : mu) arr.push_back({{"x", a.x}, {"v", a.v}, {"weight", a.weight}});
    return arr;
  };
  if (!w.coupling.empty()) {
    json arr = json::array();
    for (const auto& a : w.coupling) {
      arr.push_back({{"x1", a.x1}, {"v1", a.v1}, {"x2", a.x2}, {"v2", a.v2}, {"weight", a.weight}});
    }
    out["coupling"] = arr;
  } else {
    out["mu1"] = measure(w.mu1);
    out["mu2"] = measure(w.mu2);
  }
  out["Q1"] = w.Q1;
  out["Q2"] = w.Q2;
  out["value"] = w.value;
  return out;
}

json box_json(const SampleBox& b) {
  return {{"x", {b.x_lo, b.x_hi}}, {"v", {b.v_lo, b.v_hi}}, {"Q", {b.Q_lo, b.Q_hi}}};
}

json certificate_json(const CertificateReport& r) {
  json out;
  if (r.a1) {
    const auto& a = *r.a1;
    out["assumption_A1"] = {{"pass", a.pass},
                            {"min_eigenvalue", a.min_eigenvalue},
                            {"min_hvv_eigenvalue", a.min_hvv_eigenvalue},
                            {"max_hvv_eigenvalue", a.max_hvv_eigenvalue},
                            {"argmin_v", to_json(a.argmin_v)},
                            {"argmin_Q", to_json(a.argmin_Q)},
                            {"evaluated", a.evaluated},
                            {"skipped", a.skipped}};
  } else {
    out["assumption_A1"] = nullptr;
  }
  if (r.a2) {
    const auto& a = *r.a2;
    out["assumption_A2"] = {{"pass", a.pass},         {"c", a.c},
                            {"M", a.M},               {"M_vQ", a.M_vQ},
                            {"M_xQ", a.M_xQ},         {"margin", a.margin},
                            {"dx_vanishing_samples", a.dx_vanishing},
                            {"evaluated", a.evaluated}, {"skipped", a.skipped}};
    if (a.analytic) {
      out["assumption_A2"]["analytic"] = {{"c", a.analytic->c},
                                          {"M", a.analytic->M},
                                          {"epsilon_threshold_c2", a.analytic->threshold_c2},
                                          {"epsilon_threshold_c1", a.analytic->threshold_c1}};
    }
  } else {
    out["assumption_A2"] = nullptr;
  }
  out["g_convexity"] = {{"pass", r.g.pass}, {"min_eigenvalue", r.g.min_eigenvalue}};
  out["delta"] = r.delta ? json(*r.delta) : json(nullptr);
  out["delta_formula"] = r.delta_formula;
  if (r.empirical) {
    out["empirical_quotient"] = {{"min", r.empirical->evaluated ? json(r.empirical->min_quotient) : json(nullptr)},
                                 {"evaluated", r.empirical->evaluated},
                                 {"skipped", r.empirical->skipped},
                                 {"argmin_pair", r.empirical->argmin_pair}};
    if (r.delta && r.empirical->evaluated) {
      out["ordering_holds"] = r.empirical->min_quotient >= 1.0 - *r.delta - 1e-6;
    }
  }
  out["sample_spec"] = {{"box", box_json(r.spec.box)},
                        {"samples", r.spec.samples},
                        {"seed", r.spec.seed},
                        {"pairs", r.pairs}};
  out["pass"] = r.pass;
  return out;
}

std::string fixed(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

int cmd_solve(const std::string& config_path, const SolveFlags& flags, std::ostream& out,
              std::ostream& log) {
  const RunConfig config = prepare(config_path);
  const ModelSpec model = build_model(config);
  const ParticleEnsemble m0 = build_ensemble(config);
  const TimeGrid grid = build_grid(config);
  const SolverOptions opts = build_solver_options(config, grid);
  const std::string report_path = resolve(flags.out, config.output.report, config);
  const std::string csv_path = resolve(flags.csv, config.output.q_csv, config);
  const std::string traj_path = resolve("", config.output.trajectory_csv, config);

  json report;
  report["command"] = "solve";
  report["config"] = echo(config);
  report["mode"] = flags.constant_only ? "constant" : "path";
  report["tol"] = opts.tol;

  if (flags.constant_only && !model.x_free()) {
    throw ConfigError("--constant-only: model.family " + config.model.family +
                      " depends on x; the constant reduction needs an x-independent model");
  }

  std::optional<ControlPath> Q;
  int exit_code = kOk;
  try {
    if (flags.constant_only) {
      const Vec q = solve_constant(model, m0, grid.horizon(), opts);
      Q = ControlPath::constant(grid, q);
      const auto E = error_map(model, m0, *Q);
      report["iterations"] = nullptr;
      report["residual_norm"] = E.l2_norm();
      report["residual_history"] = json::array();
      report["constant_flag"] = true;
      if (!(E.l2_norm() <= opts.tol)) exit_code = kNoConvergence;
    } else {
      const auto eq = solve(model, m0, grid, opts);
      Q = eq.Q;
      report["iterations"] = eq.iterations;
      report["residual_norm"] = eq.residual_norm;
      report["residual_history"] = eq.residual_history;
      report["constant_flag"] = eq.constant_flag;
    }
    report["status"] = exit_code == kOk ? "converged" : "no_convergence";
  } catch (const EquilibriumFailure& e) {
    report["status"] = "no_convergence";
    report["diagnostics"] = e.what();
    report["residual_history"] = e.history();
    report["last_iterate"] = to_json(e.last_iterate());
    emit_report(report, report_path, out);
    log << "solve: no convergence: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoConvergence && e.kind() != ErrorKind::SingularHessian &&
        e.kind() != ErrorKind::IntegrationBlowup) {
      throw;
    }
    report["status"] = "no_convergence";
    report["diagnostics"] = e.what();
    emit_report(report, report_path, out);
    log << "solve: no convergence: " << e.what() << "\n";
    return kNoConvergence;
  }

  report["Q"] = to_json(*Q);
  report["Q_mean"] = to_json(Q->mean());
  report["Q_max_deviation"] = Q->max_deviation_from_mean();
  if (model.x_free() && !flags.constant_only) {
    try {
      report["constant_solution"] = to_json(solve_constant(model, m0, grid.horizon(), opts));
    } catch (const Error& e) {
      report["constant_solution"] = nullptr;
      report["constant_solution_error"] = e.what();
    }
  }
  const auto rec = reconstruct(model, m0, *Q);
  report["value_samples"] = to_json(rec.value_samples);
  report["terminal_distribution"] = to_json(rec.pushforward.back());
  emit_report(report, report_path, out);

  if (!csv_path.empty()) {
    std::ostringstream csv;
    write_path_csv(csv, *Q, "Q");
    write_file(csv_path, csv.str());
  }
  if (!traj_path.empty()) {
    std::ostringstream csv;
    write_trajectory_csv(csv, solve_el(model, m0.point(0), *Q), grid);
    write_file(traj_path, csv.str());
  }
  log << "solve: " << report["status"].get<std::string>() << ", residual "
      << fixed(report["residual_norm"].get<double>(), 3) << ", mean Q";
  for (int i = 0; i < Q->dim(); ++i) log << ' ' << fixed(Q->mean()[i], 10);
  log << "\n";
  return exit_code;
}

int cmd_certify(const std::string& config_path, const CertifyFlags& flags, std::ostream& out,
                std::ostream& log) {
  RunConfig config = prepare(config_path);
  if (flags.samples) {
    if (*flags.samples < 1) throw ConfigError("--samples: must be positive");
    config.certify.samples = *flags.samples;
  }
  if (flags.seed) config.certify.seed = *flags.seed;
  const ModelSpec model = build_model(config);
  const ParticleEnsemble m0 = build_ensemble(config);
  const TimeGrid grid = build_grid(config);
  CertifyOptions options;
  options.sample = build_sample_spec(config, model);
  options.pairs = config.certify.pairs;

  const auto result = certify(model, m0, grid, options);
  json report;
  report["command"] = "certify";
  report["config"] = echo(config);
  report["certificate"] = certificate_json(result);
  emit_report(report, resolve(flags.out, config.output.report, config), out);

  auto row = [&](const std::string& name, const std::string& verdict, const std::string& detail) {
    log << std::left << std::setw(24) << name << std::setw(8) << verdict << detail << "\n";
  };
  row("check", "verdict", "detail");
  if (result.a1) {
    row("A1 (HpQ + I > 0)", result.a1->pass ? "pass" : "FAIL",
        "min eigenvalue " + fixed(result.a1->min_eigenvalue));
  }
  if (result.a2) {
    row("A2 (c^2 > 2 M^2)", result.a2->pass ? "pass" : "FAIL",
        "c " + fixed(result.a2->c) + ", M " + fixed(result.a2->M));
    if (result.a2->dx_vanishing > 0) {
      row("D_x L != 0", "warn", std::to_string(result.a2->dx_vanishing) + " samples with D_x L = 0");
    }
  }
  row("g convex", result.g.pass ? "pass" : "FAIL", "min eigenvalue " + fixed(result.g.min_eigenvalue));
  if (result.delta) row("delta", "-", fixed(*result.delta) + " (1 - delta = " + fixed(1.0 - *result.delta) + ")");
  if (result.empirical && result.empirical->evaluated) {
    row("empirical quotient", "-", "min " + fixed(result.empirical->min_quotient) + " over " +
                                       std::to_string(result.empirical->evaluated) + " pairs");
  }
  return result.pass ? kOk : kCheckFailed;
}

int cmd_counterexample(const std::string& config_path, const CounterexampleFlags& flags,
                       std::ostream& out, std::ostream& log) {
  const RunConfig config = prepare(config_path);
  WitnessSearchOptions options = config.counterexample.options;
  if (flags.budget) {
    if (*flags.budget < 1) throw ConfigError("--budget: must be positive");
    options.budget = *flags.budget;
  }
  if (flags.type != "lasry-lions" && flags.type != "displacement") {
    throw ConfigError("--type: expected lasry-lions or displacement");
  }
  const ModelSpec model = build_model(config);
  if (model.dim() != 1) throw ConfigError("model.dim: counterexample searches need dim 1");
  const auto witness = flags.type == "lasry-lions" ? find_lasry_lions_violation(model, options)
                                                   : find_displacement_violation(model, options);
  json report;
  report["command"] = "counterexample";
  report["config"] = echo(config);
  report["kind"] = std::string(to_string(witness.kind));
  report["found"] = witness.found;
  report["budget"] = options.budget;
  report["evaluations"] = witness.evaluations;
  report["negative"] = witness.negative ? instance_json(*witness.negative) : json(nullptr);
  report["positive"] = witness.positive ? instance_json(*witness.positive) : json(nullptr);
  if (witness.construction_best) report["two_atom_construction_best"] = *witness.construction_best;
  emit_report(report, resolve(flags.out, config.output.report, config), out);

  log << "counterexample (" << flags.type << "): " << (witness.found ? "both signs found" : "not found");
  if (witness.negative) log << ", negative " << fixed(witness.negative->value);
  if (witness.positive) log << ", positive " << fixed(witness.positive->value);
  log << "\n";
  return witness.found ? kOk : kNotFound;
}

int cmd_sensitivity_check(const std::string& config_path, const SensitivityFlags& flags,
                          std::ostream& out, std::ostream& log) {
  const RunConfig config = prepare(config_path);
  const ModelSpec model = build_model(config);
  const ParticleEnsemble m0 = build_ensemble(config);
  const TimeGrid grid = build_grid(config);
  const auto& sc = config.sensitivity;
  const double h = flags.h.value_or(sc.h);
  if (!(h > 0.0)) throw ConfigError("--h: must be positive");
  const int d = model.dim();

  const Vec x0 = sc.x0.value_or(m0.mean());
  const ControlPath Q = sc.Q ? ControlPath::constant(grid, *sc.Q) : default_initial_guess(model, grid);
  const Vec dir = sc.direction.size() ? sc.direction : Vec::Ones(d);
  const ControlPath Qtilde = ControlPath::constant(grid, dir);

  const Trajectory traj = solve_el(model, x0, Q);
  const SensitivityPath sens = solve_sensitivity(model, traj, Q, Qtilde);
  const Trajectory shifted = solve_el(model, x0, ControlPath(grid, Q.values() + h * Qtilde.values()));
  const Mat fd = (shifted.x - traj.x) / h;
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), sens.y.cwiseAbs().maxCoeff());
  const double fd_error = scale > 0.0 ? (sens.y - fd).cwiseAbs().maxCoeff() / scale : 0.0;

  json report;
  report["command"] = "sensitivity-check";
  report["config"] = echo(config);
  report["h"] = h;
  report["x0"] = to_json(x0);
  report["fd_relative_error"] = fd_error;
  report["y_terminal"] = to_json(Vec(sens.y.col(grid.steps())));
  report["sensitivity_terminal_residual"] = sens.terminal_residual;

  bool ok = fd_error <= 1e-3;
  if (model.x_free()) {
    // Constant direction: D_Q x_T = (I + T Hpp D2g)^-1 T HpQ Qtilde.
    const auto hh = hessians_H_state(model, x0, -model.terminal().gradient(traj.x_terminal), Q.at(0));
    const Mat J = Mat::Identity(d, d) + grid.horizon() * hh.hpp * model.terminal().hessian();
    const Vec closed_form = J.partialPivLu().solve(grid.horizon() * hh.hpQ * dir);
    const Vec yT = sens.y.col(grid.steps());
    const double lscale = std::max(closed_form.cwiseAbs().maxCoeff(), yT.cwiseAbs().maxCoeff());
    const double closed_form_error = lscale > 0.0 ? (yT - closed_form).cwiseAbs().maxCoeff() / lscale : 0.0;
    report["closed_form_D_Q_x_T"] = to_json(closed_form);
    report["closed_form_relative_error"] = closed_form_error;
    report["energy_estimate"] = nullptr;
    ok = ok && closed_form_error <= 1e-3;
    log << "sensitivity-check: FD relative error " << fixed(fd_error, 3)
        << ", closed-form relative error " << fixed(closed_form_error, 3) << "\n";
  } else {
    const CounterRng rng(sc.seed);
    json trials = json::array();
    bool all_hold = true;
    for (int k = 0; k <= sc.trials; ++k) {
      const ControlPath direction =
          k == 0 ? Qtilde : random_path(grid, d, rng, static_cast<std::uint64_t>(k), -1.0, 1.0);
      const auto s = k == 0 ? sens : solve_sensitivity(model, traj, Q, direction);
      // eps = c / (4 M^2) from the constants along this trajectory.
      const auto probe = energy_estimate_check(s, model, traj, Q, direction, 1.0);
      const double eps = probe.coupling > 0.0 ? probe.convexity / (4.0 * probe.coupling * probe.coupling) : 1.0;
      const auto e = energy_estimate_check(s, model, traj, Q, direction, eps);
      const bool holds = e.precondition_holds && e.lhs <= e.rhs;
      all_hold = all_hold && holds;
      trials.push_back({{"eps", eps}, {"lhs", e.lhs}, {"rhs", e.rhs}, {"c", e.convexity},
                        {"M", e.coupling}, {"precondition", e.precondition_holds}, {"holds", holds}});
    }
    report["energy_estimate"] = {{"trials", trials}, {"all_hold", all_hold}};
    ok = ok && all_hold;
    log << "sensitivity-check: FD relative error " << fixed(fd_error, 3) << ", energy estimate "
        << (all_hold ? "holds" : "FAILS") << " on " << trials.size() << " directions (lhs "
        << fixed(trials[0]["lhs"].get<double>()) << " <= rhs " << fixed(trials[0]["rhs"].get<double>())
        << ")\n";
  }
  report["pass"] = ok;
  emit_report(report, resolve(flags.out, config.output.report, config), out);
  return ok ? kOk : kCheckFailed;
}

int guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const EquilibriumFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::NoConvergence:
      case ErrorKind::SingularHessian:
      case ErrorKind::IntegrationBlowup:
        return kNoConvergence;
      default:
        return kConfigError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace mfgc::cli
