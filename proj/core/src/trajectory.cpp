#include "mfgc/trajectory.hpp"

#include "mfgc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

namespace mfgc {
namespace {

bool is_constant(const ControlPath& Q) {
  const Mat& v = Q.values();
  for (int k = 1; k < v.cols(); ++k) {
    if (v.col(k) != v.col(0)) return false;
  }
  return true;
}

void fill_cost(const ModelSpec& model, const ControlPath& Q, Trajectory& traj) {
  const auto& grid = Q.grid();
  double running = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) {
    running += grid.weight(k) *
               eval_lagrangian_state(model, traj.x.col(k), traj.xdot.col(k), Q.at(k)).value;
  }
  traj.cost = running + model.terminal().value(traj.x_terminal);
}

// --- x-free terminal equation ----------------------------------------------------

struct TerminalEquation {
  Vec residual;
  Mat jacobian;
};

// F(x_T) = x_T - sum_k w_k D_pH(-Dg(x_T), Q_k) - x0 and its Jacobian
// I + (sum_k w_k Hpp_k) D2g.
TerminalEquation terminal_equation(const ModelSpec& model, const Vec& x0, const Vec& xT,
                                   const std::vector<std::pair<double, Vec>>& quadrature) {
  const int d = model.dim();
  const auto& g = model.terminal();
  const Vec p = -g.gradient(xT);
  Vec integral = Vec::Zero(d);
  Mat hpp_integral = Mat::Zero(d, d);
  for (const auto& [w, Qk] : quadrature) {
    if (g.is_zero()) {
      integral += w * dpH_state(model, x0, p, Qk);
    } else {
      const auto h = hessians_H_state(model, x0, p, Qk);
      integral += w * h.v;
      hpp_integral += w * h.hpp;
    }
  }
  TerminalEquation eq;
  eq.residual = xT - integral - x0;
  eq.jacobian = Mat::Identity(d, d) + hpp_integral * g.hessian();
  return eq;
}

std::optional<TerminalEquation> try_terminal_equation(
    const ModelSpec& model, const Vec& x0, const Vec& xT,
    const std::vector<std::pair<double, Vec>>& quadrature) {
  try {
    return terminal_equation(model, x0, xT, quadrature);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain) throw;
    return std::nullopt;
  }
}

// Scalar fallback: F is increasing in x_T, so bracket and bisect.
std::optional<Vec> bisect_terminal(const ModelSpec& model, const Vec& x0,
                                   const std::vector<std::pair<double, Vec>>& quadrature,
                                   double tol) {
  auto F = [&](double t) -> std::optional<double> {
    Vec xT(1);
    xT[0] = t;
    auto eq = try_terminal_equation(model, x0, xT, quadrature);
    if (!eq) return std::nullopt;
    return eq->residual[0];
  };
  double lo = x0[0], hi = x0[0];
  double width = 1.0;
  auto flo = F(lo);
  if (!flo) return std::nullopt;
  auto fhi = flo;
  for (int k = 0; k < 200 && *flo > 0.0; ++k) {
    hi = lo;
    lo -= width;
    width *= 2.0;
    flo = F(lo);
    if (!flo) return std::nullopt;
  }
  for (int k = 0; k < 200 && *fhi < 0.0; ++k) {
    lo = hi;
    hi += width;
    width *= 2.0;
    fhi = F(hi);
    if (!fhi) return std::nullopt;
  }
  if (*flo > 0.0 || *fhi < 0.0) return std::nullopt;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto fm = F(mid);
    if (!fm) return std::nullopt;
    if (std::abs(*fm) <= tol || hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) {
      Vec out(1);
      out[0] = mid;
      return out;
    }
    if (*fm < 0.0) lo = mid; else hi = mid;
  }
  return std::nullopt;
}

Vec solve_terminal(const ModelSpec& model, const Vec& x0,
                   const std::vector<std::pair<double, Vec>>& quadrature, int* iterations) {
  const double scale = std::max(1.0, x0.norm());
  const double target = 1e-13 * scale;
  const double accept = 1e-10 * scale;
  Vec xT = x0;
  auto eq = try_terminal_equation(model, x0, xT, quadrature);
  int it = 0;
  bool stalled = !eq.has_value();
  for (; !stalled && it < 100; ++it) {
    const double rnorm = eq->residual.norm();
    if (rnorm <= target) break;
    const Vec step = eq->jacobian.partialPivLu().solve(-eq->residual);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      const Vec trial = xT + t * step;
      auto next = try_terminal_equation(model, x0, trial, quadrature);
      if (next && next->residual.norm() < rnorm) {
        xT = trial;
        eq = std::move(next);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) stalled = true;
  }
  if (iterations) *iterations = it;
  if (eq && eq->residual.norm() <= accept) return xT;

  if (model.dim() == 1) {
    if (auto root = bisect_terminal(model, x0, quadrature, target)) return *root;
  }
  std::ostringstream os;
  os << "terminal-state Newton failed (residual "
     << (eq ? eq->residual.norm() : std::numeric_limits<double>::infinity()) << ")";
  throw no_convergence(os.str());
}

// --- RK4 on the Hamiltonian system with an attached linear block ------------------

struct StageCoefficients {
  Vec xdot;
  Vec pdot;
  Mat A;  // Jacobian of (xdot, pdot) w.r.t. (x, p)
  Mat B;  // Jacobian w.r.t. Q
};

StageCoefficients hamiltonian_rhs(const ModelSpec& model, const Vec& x, const Vec& p,
                                  const Vec& Q, bool need_jacobian) {
  const int d = model.dim();
  StageCoefficients out;
  const Vec v = dpH_state(model, x, p, Q);
  const auto ev = eval_lagrangian_state(model, x, v, Q);
  out.xdot = v;
  out.pdot = ev.dx;
  if (!need_jacobian) return out;

  Eigen::LLT<Mat> llt(ev.hvv);
  if (llt.info() != Eigen::Success) {
    throw singular_hessian("D2_vv L is not positive definite along the trajectory");
  }
  const Mat K = llt.solve(Mat::Identity(d, d));
  const Mat hvx = ev.hxv.transpose();
  out.A.resize(2 * d, 2 * d);
  out.A.topLeftCorner(d, d) = -K * hvx;
  out.A.topRightCorner(d, d) = K;
  out.A.bottomLeftCorner(d, d) = ev.hxx - ev.hxv * K * hvx;
  out.A.bottomRightCorner(d, d) = ev.hxv * K;
  out.B.resize(2 * d, d);
  out.B.topRows(d) = -K * ev.hvQ;
  out.B.bottomRows(d) = ev.hxQ - ev.hxv * K * ev.hvQ;
  return out;
}

struct FlowResult {
  Mat x;               // d x nodes
  Mat p;               // d x nodes
  std::vector<Mat> Z;  // attached block per node (only when stored)
  Mat Z_final;
};

// Integrates (x, p) from (x0, p0) together with a linear block Z solving
// Zdot = A Z + [B Qtilde | 0 ...]. Column 0 of Z carries the forcing when
// `forcing` is given.
FlowResult integrate_flow(const ModelSpec& model, const Vec& x0, const Vec& p0,
                          const ControlPath& Q, const Mat& Z0, const ControlPath* forcing,
                          bool store_block, double blowup_norm) {
  const auto& grid = Q.grid();
  const int d = model.dim();
  const double h = grid.dt();
  const bool with_block = Z0.size() > 0;

  FlowResult out;
  out.x.resize(d, grid.nodes());
  out.p.resize(d, grid.nodes());
  if (store_block) out.Z.reserve(grid.nodes());

  Vec x = x0, p = p0;
  Mat Z = Z0;
  out.x.col(0) = x;
  out.p.col(0) = p;
  if (store_block) out.Z.push_back(Z);

  auto block_rhs = [&](const StageCoefficients& c, const Mat& Zs, const Vec* qt) {
    Mat dZ = c.A * Zs;
    if (qt) dZ.col(0) += c.B * (*qt);
    return dZ;
  };

  for (int k = 0; k < grid.steps(); ++k) {
    const Vec q0 = Q.at(k), qm = Q.midpoint(k), q1 = Q.at(k + 1);
    Vec f0, fm, f1;
    const Vec* t0 = nullptr;
    const Vec* tm = nullptr;
    const Vec* t1 = nullptr;
    Vec qt0, qtm, qt1;
    if (forcing) {
      qt0 = forcing->at(k);
      qtm = forcing->midpoint(k);
      qt1 = forcing->at(k + 1);
      t0 = &qt0;
      tm = &qtm;
      t1 = &qt1;
    }

    const auto c1 = hamiltonian_rhs(model, x, p, q0, with_block);
    const Vec x2 = x + 0.5 * h * c1.xdot, p2 = p + 0.5 * h * c1.pdot;
    const auto c2 = hamiltonian_rhs(model, x2, p2, qm, with_block);
    const Vec x3 = x + 0.5 * h * c2.xdot, p3 = p + 0.5 * h * c2.pdot;
    const auto c3 = hamiltonian_rhs(model, x3, p3, qm, with_block);
    const Vec x4 = x + h * c3.xdot, p4 = p + h * c3.pdot;
    const auto c4 = hamiltonian_rhs(model, x4, p4, q1, with_block);

    if (with_block) {
      const Mat k1 = block_rhs(c1, Z, t0);
      const Mat k2 = block_rhs(c2, Z + 0.5 * h * k1, tm);
      const Mat k3 = block_rhs(c3, Z + 0.5 * h * k2, tm);
      const Mat k4 = block_rhs(c4, Z + h * k3, t1);
      Z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x += (h / 6.0) * (c1.xdot + 2.0 * c2.xdot + 2.0 * c3.xdot + c4.xdot);
    p += (h / 6.0) * (c1.pdot + 2.0 * c2.pdot + 2.0 * c3.pdot + c4.pdot);

    if (!x.allFinite() || !p.allFinite() || x.norm() > blowup_norm || p.norm() > blowup_norm) {
      std::ostringstream os;
      os << "state norm exceeded " << blowup_norm << " at t = " << grid.node(k + 1);
      throw Error(ErrorKind::IntegrationBlowup, os.str());
    }
    out.x.col(k + 1) = x;
    out.p.col(k + 1) = p;
    if (store_block) out.Z.push_back(Z);
  }
  out.Z_final = Z;
  return out;
}

std::optional<FlowResult> try_flow(const ModelSpec& model, const Vec& x0, const Vec& p0,
                                   const ControlPath& Q, const Mat& Z0, double blowup) {
  try {
    return integrate_flow(model, x0, p0, Q, Z0, nullptr, false, blowup);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain && e.kind() != ErrorKind::IntegrationBlowup &&
        e.kind() != ErrorKind::NoConvergence) {
      throw;
    }
    return std::nullopt;
  }
}

double estimate_condition(const Mat& J) {
  Eigen::JacobiSVD<Mat> svd(J);
  const auto& sv = svd.singularValues();
  return sv.minCoeff() > 0.0 ? sv.maxCoeff() / sv.minCoeff()
                             : std::numeric_limits<double>::infinity();
}

}  // namespace

Vec solve_terminal_state_constant(const ModelSpec& model, const Vec& x0, const Vec& Q,
                                  double horizon) {
  if (!model.x_free()) throw invalid_argument("terminal-state equation needs an x-free model");
  const std::vector<std::pair<double, Vec>> quadrature{{horizon, Q}};
  return solve_terminal(model, x0, quadrature, nullptr);
}

Trajectory solve_el_xfree(const ModelSpec& model, const Vec& x0, const ControlPath& Q) {
  if (!model.x_free()) throw invalid_argument("solve_el_xfree needs an x-independent model");
  if (x0.size() != model.dim() || Q.dim() != model.dim()) {
    throw invalid_argument("solve_el_xfree: dimension mismatch");
  }
  const auto& grid = Q.grid();
  const int d = model.dim();

  std::vector<std::pair<double, Vec>> quadrature;
  if (is_constant(Q)) {
    quadrature.emplace_back(grid.horizon(), Q.at(0));
  } else {
    for (int k = 0; k < grid.nodes(); ++k) quadrature.emplace_back(grid.weight(k), Q.at(k));
  }

  Trajectory traj;
  traj.x_terminal = solve_terminal(model, x0, quadrature, &traj.iterations);
  const Vec p = -model.terminal().gradient(traj.x_terminal);
  traj.terminal_residual = terminal_equation(model, x0, traj.x_terminal, quadrature).residual.norm();

  traj.xdot.resize(d, grid.nodes());
  traj.p = p.replicate(1, grid.nodes());
  if (is_constant(Q)) {
    traj.xdot = dpH_state(model, x0, p, Q.at(0)).replicate(1, grid.nodes());
  } else {
    for (int k = 0; k < grid.nodes(); ++k) traj.xdot.col(k) = dpH_state(model, x0, p, Q.at(k));
  }
  traj.x.resize(d, grid.nodes());
  traj.x.col(0) = x0;
  for (int k = 0; k < grid.steps(); ++k) {
    traj.x.col(k + 1) = traj.x.col(k) + 0.5 * grid.dt() * (traj.xdot.col(k) + traj.xdot.col(k + 1));
  }
  fill_cost(model, Q, traj);
  return traj;
}

Trajectory solve_el_shooting(const ModelSpec& model, const Vec& x0, const ControlPath& Q,
                             const ShootingOptions& options) {
  if (x0.size() != model.dim() || Q.dim() != model.dim()) {
    throw invalid_argument("solve_el_shooting: dimension mismatch");
  }
  const int d = model.dim();
  const auto& g = model.terminal();
  Mat Z0 = Mat::Zero(2 * d, d);
  Z0.bottomRows(d) = Mat::Identity(d, d);

  struct Eval {
    Vec p0;
    Vec residual;
    Mat jacobian;
  };
  auto evaluate = [&](const Vec& p0) -> std::optional<Eval> {
    auto flow = try_flow(model, x0, p0, Q, Z0, options.blowup_norm);
    if (!flow) return std::nullopt;
    const int last = Q.grid().steps();
    const Vec xT = flow->x.col(last);
    Eval e;
    e.p0 = p0;
    e.residual = flow->p.col(last) + g.gradient(xT);
    e.jacobian = flow->Z_final.bottomRows(d) + g.hessian() * flow->Z_final.topRows(d);
    return e;
  };

  std::optional<Eval> cur;
  for (const Vec& guess : {Vec(-g.gradient(x0)), Vec(Vec::Zero(d))}) {
    cur = evaluate(guess);
    if (cur) break;
  }
  if (!cur) throw domain_error("shooting: no admissible initial costate");

  const double scale = std::max(1.0, cur->p0.norm());
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double rnorm = cur->residual.norm();
    if (rnorm <= 1e-12 * scale) break;
    const Vec step = cur->jacobian.partialPivLu().solve(-cur->residual);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      auto next = evaluate(cur->p0 + t * step);
      if (next && next->residual.norm() < rnorm) {
        cur = std::move(next);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(cur->residual.norm() <= options.tolerance)) {
    std::ostringstream os;
    os << "shooting did not converge: residual " << cur->residual.norm()
       << ", Jacobian condition " << estimate_condition(cur->jacobian) << ", iterations " << it;
    throw no_convergence(os.str());
  }

  const auto flow = integrate_flow(model, x0, cur->p0, Q, Mat(), nullptr, false,
                                   options.blowup_norm);
  const auto& grid = Q.grid();
  Trajectory traj;
  traj.x = flow.x;
  traj.p = flow.p;
  traj.xdot.resize(d, grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) {
    traj.xdot.col(k) = dpH_state(model, traj.x.col(k), traj.p.col(k), Q.at(k));
  }
  traj.x_terminal = traj.x.col(grid.steps());
  traj.terminal_residual = cur->residual.norm();
  traj.iterations = it;
  fill_cost(model, Q, traj);
  return traj;
}

Trajectory solve_el(const ModelSpec& model, const Vec& x0, const ControlPath& Q) {
  return model.x_free() ? solve_el_xfree(model, x0, Q) : solve_el_shooting(model, x0, Q);
}

SensitivityPath solve_sensitivity(const ModelSpec& model, const Trajectory& traj,
                                  const ControlPath& Q, const ControlPath& Qtilde) {
  const auto& grid = Q.grid();
  if (!(Qtilde.grid() == grid) || Qtilde.dim() != model.dim() || traj.x.cols() != grid.nodes()) {
    throw Error(ErrorKind::GridMismatch, "sensitivity: trajectory, Q and Qtilde must share a grid");
  }
  const int d = model.dim();
  // Column 0: particular solution with y(0) = 0, pi(0) = 0 and forcing.
  // Columns 1..d: homogeneous solutions with y(0) = 0, pi(0) = e_j.
  Mat Z0 = Mat::Zero(2 * d, d + 1);
  Z0.bottomRightCorner(d, d) = Mat::Identity(d, d);
  const auto flow = integrate_flow(model, traj.x.col(0), traj.p.col(0), Q, Z0, &Qtilde, true,
                                   std::numeric_limits<double>::infinity());

  const Mat& D2g = model.terminal().hessian();
  const Mat& ZT = flow.Z_final;
  const Mat J = ZT.bottomRightCorner(d, d) + D2g * ZT.topRightCorner(d, d);
  const Vec rhs = -(ZT.col(0).tail(d) + D2g * ZT.col(0).head(d));
  Eigen::FullPivLU<Mat> lu(J);
  if (!lu.isInvertible()) throw singular_hessian("sensitivity: terminal system is singular");
  const Vec pi0 = lu.solve(rhs);

  Vec coeff(d + 1);
  coeff << 1.0, pi0;
  SensitivityPath out{Mat(d, grid.nodes()), Mat(d, grid.nodes()), Qtilde, 0.0};
  for (int k = 0; k < grid.nodes(); ++k) {
    const Vec state = flow.Z[k] * coeff;
    const Vec y = state.head(d);
    const Vec pi = state.tail(d);
    const Vec x = flow.x.col(k);
    const Vec v = dpH_state(model, x, flow.p.col(k), Q.at(k));
    const auto ev = eval_lagrangian_state(model, x, v, Q.at(k));
    Eigen::LLT<Mat> llt(ev.hvv);
    if (llt.info() != Eigen::Success) {
      throw singular_hessian("D2_vv L is not positive definite along the trajectory");
    }
    out.y.col(k) = y;
    out.ydot.col(k) = llt.solve(pi - ev.hxv.transpose() * y - ev.hvQ * Qtilde.at(k));
    if (k == grid.steps()) out.terminal_residual = (pi + D2g * y).norm();
  }
  return out;
}

EnergyEstimate energy_estimate_check(const SensitivityPath& sens, const ModelSpec& model,
                                     const Trajectory& traj, const ControlPath& Q,
                                     const ControlPath& Qtilde, double eps) {
  const auto& grid = Q.grid();
  const int d = model.dim();
  EnergyEstimate out;
  out.convexity = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.nodes(); ++k) {
    const auto ev = eval_lagrangian_state(model, traj.x.col(k), traj.xdot.col(k), Q.at(k));
    Mat block(2 * d, 2 * d);
    block << ev.hxx, ev.hxv, ev.hxv.transpose(), ev.hvv;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (block + block.transpose()));
    out.convexity = std::min(out.convexity, es.eigenvalues().minCoeff());
    const double nv = Eigen::JacobiSVD<Mat>(ev.hvQ).singularValues()(0);
    const double nx = Eigen::JacobiSVD<Mat>(ev.hxQ).singularValues()(0);
    out.coupling = std::max({out.coupling, nv, nx});
  }
  const double factor = out.convexity - 2.0 * out.coupling * out.coupling * eps;
  out.precondition_holds = eps > 0.0 && factor > 0.0;

  double energy = 0.0;
  double forcing = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) {
    energy += grid.weight(k) * (sens.ydot.col(k).squaredNorm() + sens.y.col(k).squaredNorm());
    forcing += grid.weight(k) * Qtilde.at(k).squaredNorm();
  }
  const Vec yT = sens.y.col(grid.steps());
  out.lhs = factor * energy + yT.dot(model.terminal().hessian() * yT);
  out.rhs = eps > 0.0 ? forcing / (4.0 * eps) : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace mfgc
