#include "mfgc/equilibrium.hpp"

#include "mfgc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfgc {
namespace {

bool recoverable(const Error& e) {
  return e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::NoConvergence ||
         e.kind() == ErrorKind::IntegrationBlowup;
}

std::optional<ErrorPath> try_error_map(const ModelSpec& model, const ParticleEnsemble& m0,
                                       const ControlPath& Q) {
  try {
    return error_map(model, m0, Q);
  } catch (const Error& e) {
    if (!recoverable(e)) throw;
    return std::nullopt;
  }
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw invalid_argument("solver tol must be positive");
  if (max_iter < 1) throw invalid_argument("solver max_iter must be positive");
  if (!(initial_step > 0.0)) throw invalid_argument("solver initial_step must be positive");
  if (fixed_step && !(*fixed_step > 0.0 && *fixed_step < 2.0)) {
    throw invalid_argument("solver fixed step must lie in (0, 2)");
  }
  if (divergence_window < 1) throw invalid_argument("divergence_window must be positive");
}

ControlPath default_initial_guess(const ModelSpec& model, const TimeGrid& grid) {
  if (model.is_production_family()) {
    return ControlPath::constant(grid, Vec::Constant(model.dim(), std::max(model.params().q_min, 1.0)));
  }
  return ControlPath::zero(grid, model.dim());
}

EquilibriumReport solve(const ModelSpec& model, const ParticleEnsemble& m0, const TimeGrid& grid,
                        const SolverOptions& opts) {
  opts.validate();
  ControlPath Q = opts.initial_guess ? *opts.initial_guess : default_initial_guess(model, grid);
  if (!(Q.grid() == grid) || Q.dim() != model.dim()) {
    throw Error(ErrorKind::GridMismatch, "initial guess does not match the grid or dimension");
  }

  std::vector<double> history;
  auto fail = [&](const std::string& why) -> EquilibriumFailure {
    std::ostringstream os;
    os << why << " after " << (history.empty() ? 0 : history.size() - 1) << " iterations, residual "
       << (history.empty() ? std::nan("") : history.back());
    return EquilibriumFailure(os.str(), history, Q);
  };

  auto first = try_error_map(model, m0, Q);
  if (!first) throw fail("error map not evaluable at the initial guess");
  ErrorPath E = std::move(*first);
  history.push_back(E.l2_norm());

  double tau = opts.fixed_step.value_or(opts.initial_step);
  int increases = 0;
  int iter = 0;
  while (E.l2_norm() > opts.tol) {
    if (iter >= opts.max_iter) throw fail("iteration budget exhausted");
    if (opts.fixed_step) {
      ControlPath next(grid, Q.values() - tau * E.values());
      auto En = try_error_map(model, m0, next);
      if (!En) throw fail("fixed step left the admissible region");
      increases = En->l2_norm() > E.l2_norm() ? increases + 1 : 0;
      Q = std::move(next);
      E = std::move(*En);
      if (increases >= opts.divergence_window) throw fail("residual grew for consecutive steps");
    } else {
      bool accepted = false;
      while (!accepted) {
        ControlPath next(grid, Q.values() - tau * E.values());
        auto En = try_error_map(model, m0, next);
        if (En && En->l2_norm() <= (1.0 - 1e-4 * tau) * E.l2_norm()) {
          Q = std::move(next);
          E = std::move(*En);
          accepted = true;
          tau = std::min(2.0 * tau, 1.0);
        } else {
          tau *= 0.5;
          if (tau < 1e-12) throw fail("step size underflow in backtracking");
        }
      }
    }
    ++iter;
    history.push_back(E.l2_norm());
  }

  EquilibriumReport report{Q, 0.0, iter, false, std::move(history), Vec(), {}};
  std::vector<Trajectory> trajectories;
  const ErrorPath check = error_map(model, m0, Q, &trajectories);
  report.residual_norm = check.l2_norm();
  report.constant_flag = Q.max_deviation_from_mean() <= 10.0 * opts.tol;
  report.value_samples.resize(m0.size());
  for (int i = 0; i < m0.size(); ++i) report.value_samples[i] = trajectories[i].cost;
  for (int k = 0; k < grid.nodes(); ++k) {
    Mat points(model.dim(), m0.size());
    for (int i = 0; i < m0.size(); ++i) points.col(i) = trajectories[i].x.col(k);
    report.pushforward.emplace_back(std::move(points), m0.weights());
  }
  return report;
}

ConstantError constant_error(const ModelSpec& model, const ParticleEnsemble& m0, const Vec& Q,
                             double horizon) {
  const int d = model.dim();
  const Mat& D2g = model.terminal().hessian();
  std::vector<Vec> velocity(m0.size());
  std::vector<Mat> gain(m0.size());
  parallel_for(m0.size(), [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    try {
      const Vec xT = solve_terminal_state_constant(model, m0.point(i), Q, horizon);
      const auto h = hessians_H_state(model, m0.point(i), -model.terminal().gradient(xT), Q);
      velocity[i] = h.v;
      if (model.terminal().is_zero()) {
        gain[i] = h.hpQ;
      } else {
        gain[i] = (Mat::Identity(d, d) + horizon * h.hpp * D2g).partialPivLu().solve(h.hpQ);
      }
    } catch (const Error& e) {
      throw e.with_context("particle " + std::to_string(i) + ": ");
    }
  });
  ConstantError out{Q, Mat::Identity(d, d)};
  for (int i = 0; i < m0.size(); ++i) {
    out.value += m0.weight(i) * velocity[i];
    out.jacobian += m0.weight(i) * gain[i];
  }
  return out;
}

Vec solve_constant(const ModelSpec& model, const ParticleEnsemble& m0, double horizon,
                   const SolverOptions& opts) {
  opts.validate();
  if (!model.x_free()) throw invalid_argument("solve_constant needs an x-independent model");
  if (!(horizon > 0.0)) throw invalid_argument("solve_constant: horizon must be positive");
  const TimeGrid grid(horizon, 2);
  Vec Q = opts.initial_guess ? opts.initial_guess->mean()
                             : default_initial_guess(model, grid).at(0);

  auto attempt = [&](const Vec& q) -> std::optional<ConstantError> {
    try {
      return constant_error(model, m0, q, horizon);
    } catch (const Error& e) {
      if (!recoverable(e)) throw;
      return std::nullopt;
    }
  };
  auto cur = attempt(Q);
  if (!cur) throw no_convergence("solve_constant: error not evaluable at the initial guess");
  // Residual in the L2([0,T]) norm of a constant path.
  const double to_l2 = std::sqrt(horizon);
  int it = 0;
  for (; it < std::min(opts.max_iter, 200); ++it) {
    const double rnorm = cur->value.norm();
    if (rnorm * to_l2 <= 1e-3 * opts.tol) break;
    Eigen::FullPivLU<Mat> lu(cur->jacobian);
    if (!lu.isInvertible()) throw singular_hessian("solve_constant: DE is singular");
    const Vec step = lu.solve(-cur->value);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      auto next = attempt(Q + t * step);
      if (next && next->value.norm() < rnorm) {
        Q += t * step;
        cur = std::move(next);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(cur->value.norm() * to_l2 <= opts.tol)) {
    std::ostringstream os;
    os << "solve_constant: residual " << cur->value.norm() * to_l2 << " after " << it
       << " Newton steps";
    throw no_convergence(os.str());
  }
  return Q;
}

Reconstruction reconstruct(const ModelSpec& model, const ParticleEnsemble& m0,
                           const ControlPath& Q) {
  std::vector<Trajectory> trajectories;
  error_map(model, m0, Q, &trajectories);
  Reconstruction out;
  out.value_samples.resize(m0.size());
  for (int i = 0; i < m0.size(); ++i) out.value_samples[i] = trajectories[i].cost;
  for (int k = 0; k < Q.grid().nodes(); ++k) {
    Mat points(model.dim(), m0.size());
    for (int i = 0; i < m0.size(); ++i) points.col(i) = trajectories[i].x.col(k);
    out.pushforward.emplace_back(std::move(points), m0.weights());
  }
  return out;
}

UniquenessProbe uniqueness_probe(const ModelSpec& model, const ParticleEnsemble& m0,
                                 const TimeGrid& grid, const SolverOptions& opts, int guesses,
                                 std::uint64_t seed, double lo, double hi) {
  const CounterRng rng(seed);
  UniquenessProbe probe;
  for (int g = 0; g < guesses; ++g) {
    SolverOptions o = opts;
    o.initial_guess = random_path(grid, model.dim(), rng, static_cast<std::uint64_t>(g), lo, hi);
    try {
      probe.solutions.push_back(solve(model, m0, grid, o).Q);
    } catch (const Error& e) {
      if (!recoverable(e)) throw;
      probe.failures.push_back(g);
    }
  }
  for (std::size_t a = 0; a < probe.solutions.size(); ++a) {
    for (std::size_t b = a + 1; b < probe.solutions.size(); ++b) {
      probe.max_pairwise_distance =
          std::max(probe.max_pairwise_distance,
                   l2_norm(grid, probe.solutions[a].values() - probe.solutions[b].values()));
    }
  }
  return probe;
}

double estimate_lipschitz(const ModelSpec& model, const ParticleEnsemble& m0,
                          const TimeGrid& grid, int pairs, std::uint64_t seed, double lo,
                          double hi) {
  const CounterRng rng(seed);
  double best = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const auto q1 = random_path(grid, model.dim(), rng, 2 * static_cast<std::uint64_t>(k), lo, hi);
    const auto q0 = random_path(grid, model.dim(), rng, 2 * static_cast<std::uint64_t>(k) + 1, lo, hi);
    const double gap = l2_norm(grid, q1.values() - q0.values());
    if (gap <= 0.0) continue;
    const auto e1 = try_error_map(model, m0, q1);
    const auto e0 = try_error_map(model, m0, q0);
    if (!e1 || !e0) continue;
    best = std::max(best, l2_norm(grid, e1->values() - e0->values()) / gap);
  }
  return best;
}

double theoretical_step(double monotonicity, double lipschitz) {
  if (!(monotonicity > 0.0) || !(lipschitz > 0.0)) {
    throw invalid_argument("theoretical step needs positive monotonicity and Lipschitz constants");
  }
  return monotonicity / (lipschitz * lipschitz);
}

}  // namespace mfgc
