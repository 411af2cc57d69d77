#pragma once

#include "mfgc/model.hpp"
#include "mfgc/paths.hpp"

namespace mfgc {

// One agent's optimal path on the grid, in state coordinates (xdot, and the
// costate p = D_v L_state(x, xdot, Q)).
struct Trajectory {
  Mat x;     // d x nodes
  Mat xdot;  // d x nodes
  Mat p;     // d x nodes
  Vec x_terminal;
  double cost = 0.0;               // trapezoid running cost + g(x(T))
  double terminal_residual = 0.0;  // |p(T) + Dg(x(T))| (x-free: residual of the x_T equation)
  int iterations = 0;
};

struct SensitivityPath {
  Mat y;     // d x nodes
  Mat ydot;  // d x nodes
  ControlPath direction;
  double terminal_residual = 0.0;
};

struct ShootingOptions {
  double tolerance = 1e-9;  // accepted residual in p(T) + Dg(x(T))
  int max_iterations = 60;
  double blowup_norm = 1e8;
};

// x-independent models: xdot(t) = D_pH(-Dg(x_T), Q(t)) with x_T from the
// implicit terminal equation, solved by Newton (bisection fallback in d = 1).
Trajectory solve_el_xfree(const ModelSpec& model, const Vec& x0, const ControlPath& Q);

// Terminal state for a constant aggregate over horizon T:
// x_T - T D_pH(-Dg(x_T), Q) = x0.
Vec solve_terminal_state_constant(const ModelSpec& model, const Vec& x0, const Vec& Q,
                                  double horizon);

// General models: single shooting on the Hamiltonian system
//   xdot = D_pH(x,p,Q), pdot = D_xL(x, xdot, Q), x(0) = x0, p(T) = -Dg(x(T))
// with RK4 on the grid and Newton in p(0).
Trajectory solve_el_shooting(const ModelSpec& model, const Vec& x0, const ControlPath& Q,
                             const ShootingOptions& options = {});

// Chooses solve_el_xfree when the model allows it, else shooting.
Trajectory solve_el(const ModelSpec& model, const Vec& x0, const ControlPath& Q);

// Linearised Euler-Lagrange system along `traj` in direction Qtilde. The
// result is the exact derivative of the discrete RK4 flow, so it matches
// finite differences of solve_el_shooting to O(h).
SensitivityPath solve_sensitivity(const ModelSpec& model, const Trajectory& traj,
                                  const ControlPath& Q, const ControlPath& Qtilde);

struct EnergyEstimate {
  double lhs = 0.0;
  double rhs = 0.0;
  double convexity = 0.0;  // c: min eigenvalue of D2_(x,v) L along the trajectory
  double coupling = 0.0;   // M: max of |D2_vQ L|, |D2_xQ L| along the trajectory
  bool precondition_holds = false;  // c - 2 M^2 eps > 0
};

// lhs = (c - 2 M^2 eps) int(|ydot|^2 + |y|^2) + y(T)' D2g y(T),
// rhs = int |Qtilde|^2 / (4 eps).
EnergyEstimate energy_estimate_check(const SensitivityPath& sens, const ModelSpec& model,
                                     const Trajectory& traj, const ControlPath& Q,
                                     const ControlPath& Qtilde, double eps);

}  // namespace mfgc
