#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string_view>

namespace mfgc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Family {
  SeparableShifted,      // L(v,Q) = ell(-v + eps Q)
  Cournot,               // L(q,Q) = -q P(q + eps Q),  P'(z) = -z^s
  QuadraticXV,           // L(x,v,Q) = |x|^2 + |v|^2 + x.Q
  GeneralizedQuadratic,  // L(x,v,Q) = f(x) v^2 + g(x) + h(x) Q, per coordinate
  CournotX,              // L(x,q,Q) = -q P(q + eps Q) + c2 |x|^2 / 2,  P'(z) = c1 - z^s
  Custom,
};

// StateVelocity: the model's control is v = xdot.
// Production: the model's control is q = -xdot (Cournot families).
enum class VelocityConvention { StateVelocity, Production };

std::string_view to_string(Family family);
std::optional<Family> family_from_string(std::string_view name);
std::string_view to_string(VelocityConvention convention);

// Value and every first/second partial used downstream. Coordinates are the
// model's native control (q for production families).
struct LagrangianDerivatives {
  double value = 0.0;
  Vec dx;
  Vec dv;
  Mat hxx;
  Mat hxv;  // d^2 L / dx dv; the vx block is its transpose
  Mat hvv;
  Mat hxQ;
  Mat hvQ;
};

// c0 + c1 x + c2 x^2
struct Polynomial2 {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double x) const { return c0 + x * (c1 + x * c2); }
  double d1(double x) const { return c1 + 2.0 * c2 * x; }
  double d2() const { return 2.0 * c2; }
};

struct ModelParams {
  double epsilon = 0.0;

  // SeparableShifted: ell(w) = a/2 |w|^2 + b/4 |w|^4
  double ell_quadratic = 1.0;
  double ell_quartic = 0.0;

  // Cournot families. P(z) = c1 z - z^(s+1)/(s+1); Cournot proper has c1 = 0.
  double s = -0.5;
  double c1 = 0.0;
  double c2 = 1.0;  // CournotX state cost f(x) = c2 x^2 / 2
  double q_min = 1e-6;

  // GeneralizedQuadratic: f (kinetic), g (potential), h (coupling, affine)
  Polynomial2 kinetic{1.0, 0.0, 0.0};
  Polynomial2 potential{0.0, 0.0, 1.0};
  Polynomial2 coupling{0.0, 1.0, 0.0};
};

// User-supplied Lagrangian. When `derivatives` is empty, all partials come
// from central finite differences of `value`.
struct CustomLagrangian {
  std::function<double(const Vec& x, const Vec& v, const Vec& Q)> value;
  std::function<LagrangianDerivatives(const Vec& x, const Vec& v, const Vec& Q)> derivatives;
  std::function<bool(const Vec& x, const Vec& v, const Vec& Q)> admissible;
  bool x_dependent = true;
  double fd_step = 1e-5;
};

// g(x) = 1/2 (x - a)^T G (x - a), G symmetric positive semidefinite, or g = 0.
class TerminalCost {
 public:
  TerminalCost() = default;

  static TerminalCost zero(int dim);
  static TerminalCost quadratic(Mat weight, Vec center);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  const Mat& hessian() const { return weight_; }

  bool is_zero() const { return zero_; }
  const Mat& weight() const { return weight_; }
  const Vec& center() const { return center_; }
  int dim() const { return static_cast<int>(center_.size()); }

 private:
  bool zero_ = true;
  Mat weight_;
  Vec center_;
};

// Immutable description of a Lagrangian family, its parameters and the
// terminal cost. Cheap to copy; safe to share across threads.
class ModelSpec {
 public:
  static ModelSpec separable_shifted(int dim, double epsilon, double ell_quadratic = 1.0,
                                     double ell_quartic = 0.0);
  static ModelSpec cournot(int dim, double s, double epsilon, double q_min = 1e-6);
  static ModelSpec quadratic_xv(int dim);
  static ModelSpec generalized_quadratic(int dim, Polynomial2 kinetic, Polynomial2 potential,
                                         Polynomial2 coupling);
  static ModelSpec cournot_x(int dim, double s, double epsilon, double c1, double c2,
                             double q_min = 1e-6);
  static ModelSpec custom(int dim, CustomLagrangian lagrangian,
                          VelocityConvention convention = VelocityConvention::StateVelocity);

  ModelSpec with_terminal(TerminalCost terminal) const;

  Family family() const { return family_; }
  int dim() const { return dim_; }
  const ModelParams& params() const { return params_; }
  const TerminalCost& terminal() const { return terminal_; }
  VelocityConvention convention() const { return convention_; }
  const CustomLagrangian* custom_lagrangian() const;

  // +1 for StateVelocity, -1 for Production: xdot = sign * control.
  double velocity_sign() const {
    return convention_ == VelocityConvention::Production ? -1.0 : 1.0;
  }
  bool x_free() const;
  bool is_production_family() const {
    return family_ == Family::Cournot || family_ == Family::CournotX;
  }

  // Inverse demand primitive and derivatives (production families only).
  double demand(double z) const;
  double demand_d1(double z) const;
  double demand_d2(double z) const;
  // Smallest admissible control for aggregate component Q_i: q >= q_min - eps Q_i.
  double control_floor(double aggregate) const;

 private:
  ModelSpec() = default;

  Family family_ = Family::SeparableShifted;
  int dim_ = 1;
  ModelParams params_;
  TerminalCost terminal_;
  VelocityConvention convention_ = VelocityConvention::StateVelocity;
  std::shared_ptr<const CustomLagrangian> custom_;
};

// --- native-coordinate operations -------------------------------------------

LagrangianDerivatives eval_lagrangian(const ModelSpec& model, const Vec& x, const Vec& v,
                                      const Vec& Q);

// Central-difference derivatives of an arbitrary value function; step h for
// gradients, max(h, 1e-4) for second derivatives.
LagrangianDerivatives finite_difference_derivatives(
    const std::function<double(const Vec&, const Vec&, const Vec&)>& value, const Vec& x,
    const Vec& v, const Vec& Q, double h = 1e-5);

// Maximiser of p.v - L(x,v,Q), i.e. the unique v with D_v L(x,v,Q) = p.
Vec dpH(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q);
Vec dpH(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q, const Vec& warm_start);

struct HamiltonianHessians {
  Vec v;    // dpH(x,p,Q)
  Mat hpp;  // (D2_vv L)^-1
  Mat hpQ;  // (D2_vv L)^-1 (-D2_vQ L)
};

HamiltonianHessians hessians_H(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q);

// --- state-frame views (control = xdot) ---------------------------------------
//
// For production families L_state(x, xdot, Q) = L(x, -xdot, Q); these apply
// the sign flip so trajectory code never branches on the convention.

LagrangianDerivatives eval_lagrangian_state(const ModelSpec& model, const Vec& x, const Vec& xdot,
                                            const Vec& Q);
Vec dpH_state(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q);
HamiltonianHessians hessians_H_state(const ModelSpec& model, const Vec& x, const Vec& p,
                                     const Vec& Q);

}  // namespace mfgc
