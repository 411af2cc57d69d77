#include "mfgc/model.hpp"

#include "mfgc/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace mfgc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::IntegrationBlowup: return "IntegrationBlowup";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 6> kFamilyNames{{
    {Family::SeparableShifted, "separable_shifted"},
    {Family::Cournot, "cournot"},
    {Family::QuadraticXV, "quadratic_xv"},
    {Family::GeneralizedQuadratic, "generalized_quadratic"},
    {Family::CournotX, "cournot_x"},
    {Family::Custom, "custom"},
}};

void require(bool ok, const std::string& message) {
  if (!ok) throw invalid_argument(message);
}

LagrangianDerivatives zeros(int d) {
  LagrangianDerivatives out;
  out.dx = Vec::Zero(d);
  out.dv = Vec::Zero(d);
  out.hxx = Mat::Zero(d, d);
  out.hxv = Mat::Zero(d, d);
  out.hvv = Mat::Zero(d, d);
  out.hxQ = Mat::Zero(d, d);
  out.hvQ = Mat::Zero(d, d);
  return out;
}

void check_sizes(const ModelSpec& model, const Vec& x, const Vec& v, const Vec& Q) {
  const auto d = model.dim();
  if (x.size() != d || v.size() != d || Q.size() != d) {
    std::ostringstream os;
    os << "dimension mismatch: model dim " << d << ", got x " << x.size() << ", v " << v.size()
       << ", Q " << Q.size();
    throw invalid_argument(os.str());
  }
}

LagrangianDerivatives eval_separable_shifted(const ModelSpec& model, const Vec& v, const Vec& Q) {
  const auto& prm = model.params();
  const int d = model.dim();
  const Vec w = -v + prm.epsilon * Q;
  const double w2 = w.squaredNorm();
  const double a = prm.ell_quadratic;
  const double b = prm.ell_quartic;

  auto out = zeros(d);
  out.value = 0.5 * a * w2 + 0.25 * b * w2 * w2;
  const Vec grad_ell = (a + b * w2) * w;
  const Mat hess_ell = (a + b * w2) * Mat::Identity(d, d) + 2.0 * b * w * w.transpose();
  out.dv = -grad_ell;
  out.hvv = hess_ell;
  out.hvQ = -prm.epsilon * hess_ell;
  return out;
}

LagrangianDerivatives eval_production(const ModelSpec& model, const Vec& x, const Vec& q,
                                      const Vec& Q) {
  const auto& prm = model.params();
  const int d = model.dim();
  auto out = zeros(d);
  for (int i = 0; i < d; ++i) {
    const double z = q[i] + prm.epsilon * Q[i];
    if (!(z >= prm.q_min * (1.0 - 1e-12))) {
      std::ostringstream os;
      os.precision(17);
      os << "production model evaluated outside q + eps*Q >= q_min (component " << i
         << ", q + eps*Q = " << z << ", q_min = " << prm.q_min << ")";
      throw domain_error(os.str());
    }
    const double P = model.demand(z);
    const double P1 = model.demand_d1(z);
    const double P2 = model.demand_d2(z);
    out.value += -q[i] * P;
    out.dv[i] = -P - q[i] * P1;
    out.hvv(i, i) = -2.0 * P1 - q[i] * P2;
    out.hvQ(i, i) = prm.epsilon * (-P1 - q[i] * P2);
  }
  if (model.family() == Family::CournotX) {
    out.value += 0.5 * prm.c2 * x.squaredNorm();
    out.dx = prm.c2 * x;
    out.hxx = prm.c2 * Mat::Identity(d, d);
  }
  return out;
}

LagrangianDerivatives eval_quadratic_xv(const ModelSpec& model, const Vec& x, const Vec& v,
                                        const Vec& Q) {
  const int d = model.dim();
  auto out = zeros(d);
  out.value = x.squaredNorm() + v.squaredNorm() + x.dot(Q);
  out.dx = 2.0 * x + Q;
  out.dv = 2.0 * v;
  out.hxx = 2.0 * Mat::Identity(d, d);
  out.hvv = 2.0 * Mat::Identity(d, d);
  out.hxQ = Mat::Identity(d, d);
  return out;
}

LagrangianDerivatives eval_generalized_quadratic(const ModelSpec& model, const Vec& x,
                                                 const Vec& v, const Vec& Q) {
  const auto& prm = model.params();
  const auto& f = prm.kinetic;
  const auto& g = prm.potential;
  const auto& h = prm.coupling;
  const int d = model.dim();
  auto out = zeros(d);
  for (int i = 0; i < d; ++i) {
    const double xi = x[i];
    const double vi = v[i];
    out.value += f(xi) * vi * vi + g(xi) + h(xi) * Q[i];
    out.dx[i] = f.d1(xi) * vi * vi + g.d1(xi) + h.d1(xi) * Q[i];
    out.dv[i] = 2.0 * f(xi) * vi;
    out.hxx(i, i) = f.d2() * vi * vi + g.d2() + h.d2() * Q[i];
    out.hxv(i, i) = 2.0 * f.d1(xi) * vi;
    out.hvv(i, i) = 2.0 * f(xi);
    out.hxQ(i, i) = h.d1(xi);
  }
  return out;
}

LagrangianDerivatives eval_custom(const ModelSpec& model, const Vec& x, const Vec& v,
                                  const Vec& Q) {
  const auto* custom = model.custom_lagrangian();
  if (custom->admissible && !custom->admissible(x, v, Q)) {
    throw domain_error("custom Lagrangian evaluated outside its admissible region");
  }
  if (custom->derivatives) return custom->derivatives(x, v, Q);
  return finite_difference_derivatives(custom->value, x, v, Q, custom->fd_step);
}

// Solves D_q L_i(q) = p for one coordinate of a production family. D_q L is
// increasing in q on the admissible half-line, so Newton is safeguarded by a
// bisection bracket.
double solve_production_component(const ModelSpec& model, double p, double aggregate,
                                  double warm) {
  const auto& prm = model.params();
  const double eps = prm.epsilon;
  auto marginal = [&](double q, double* slope) {
    const double z = q + eps * aggregate;
    const double P = model.demand(z);
    const double P1 = model.demand_d1(z);
    const double P2 = model.demand_d2(z);
    if (slope) *slope = -2.0 * P1 - q * P2;
    return -P - q * P1;
  };

  const double floor = model.control_floor(aggregate);
  const double scale = std::max(1.0, std::abs(p));
  const double tol = 1e-13 * scale;

  double lo = floor;
  const double at_floor = marginal(lo, nullptr) - p;
  if (std::abs(at_floor) <= tol) return lo;
  if (at_floor > 0.0) {
    std::ostringstream os;
    os.precision(17);
    os << "maximiser of p*q - L leaves the admissible region (p = " << p
       << " is below D_qL at the floor q = " << floor << ")";
    throw domain_error(os.str());
  }

  double hi = std::max(floor + 1.0, warm);
  double step = std::max(1.0, hi - floor);
  double at_hi = marginal(hi, nullptr) - p;
  for (int k = 0; at_hi < 0.0; ++k) {
    if (k > 200 || !std::isfinite(at_hi)) throw no_convergence("dpH: failed to bracket root");
    lo = hi;
    step *= 2.0;
    hi = floor + step;
    at_hi = marginal(hi, nullptr) - p;
  }

  double q = std::clamp(warm, lo, hi);
  if (!(q > lo && q < hi)) q = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double r = marginal(q, &slope) - p;
    if (std::abs(r) <= tol) {
      if (slope <= 0.0) throw domain_error("production Lagrangian is not convex in q here");
      return q;
    }
    if (r < 0.0) lo = q; else hi = q;
    double next = q - r / slope;
    if (!(slope > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(q))) {
      return next;
    }
    q = next;
  }
  throw no_convergence("dpH: safeguarded Newton exhausted its iteration budget");
}

Vec solve_generic(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q, Vec v) {
  const double scale = std::max(1.0, p.norm());
  for (int it = 0; it < 100; ++it) {
    const auto ev = eval_lagrangian(model, x, v, Q);
    const Vec grad = ev.dv - p;
    const double gnorm = grad.norm();
    if (gnorm <= 1e-13 * scale) return v;

    Eigen::LLT<Mat> llt(ev.hvv);
    if (llt.info() != Eigen::Success) {
      throw domain_error("D2_vv L is not positive definite during dpH Newton");
    }
    const Vec dir = llt.solve(-grad);
    const double phi0 = ev.value - p.dot(v);
    const double slope = grad.dot(dir);

    double t = 1.0;
    bool accepted = false;
    while (t > 1e-14) {
      const Vec trial = v + t * dir;
      try {
        const auto et = eval_lagrangian(model, x, trial, Q);
        const double phi = et.value - p.dot(trial);
        if (phi <= phi0 + 1e-4 * t * slope || (et.dv - p).norm() < gnorm) {
          v = trial;
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Domain) throw;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (gnorm <= 1e-10 * scale) return v;
      throw no_convergence("dpH: line search failed");
    }
  }
  const auto ev = eval_lagrangian(model, x, v, Q);
  if ((ev.dv - p).norm() <= 1e-10 * scale) return v;
  throw no_convergence("dpH: Newton exhausted its iteration budget");
}

}  // namespace

std::string_view to_string(Family family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "unknown";
}

std::optional<Family> family_from_string(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  return std::nullopt;
}

std::string_view to_string(VelocityConvention convention) {
  return convention == VelocityConvention::Production ? "production" : "state_velocity";
}

// --- TerminalCost --------------------------------------------------------------

TerminalCost TerminalCost::zero(int dim) {
  require(dim > 0, "terminal cost dimension must be positive");
  TerminalCost g;
  g.zero_ = true;
  g.weight_ = Mat::Zero(dim, dim);
  g.center_ = Vec::Zero(dim);
  return g;
}

TerminalCost TerminalCost::quadratic(Mat weight, Vec center) {
  require(weight.rows() == weight.cols() && weight.rows() == center.size() && center.size() > 0,
          "terminal weight must be square and match the center dimension");
  require((weight - weight.transpose()).norm() <= 1e-12 * std::max(1.0, weight.norm()),
          "terminal weight must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(weight);
  require(es.eigenvalues().minCoeff() >= -1e-12, "terminal weight must be positive semidefinite");
  TerminalCost g;
  g.zero_ = false;
  g.weight_ = std::move(weight);
  g.center_ = std::move(center);
  return g;
}

double TerminalCost::value(const Vec& x) const {
  if (zero_) return 0.0;
  const Vec r = x - center_;
  return 0.5 * r.dot(weight_ * r);
}

Vec TerminalCost::gradient(const Vec& x) const {
  if (zero_) return Vec::Zero(x.size());
  return weight_ * (x - center_);
}

// --- ModelSpec -----------------------------------------------------------------

ModelSpec ModelSpec::separable_shifted(int dim, double epsilon, double ell_quadratic,
                                       double ell_quartic) {
  require(dim > 0, "dim must be positive");
  require(ell_quadratic > 0.0, "ell_quadratic must be positive");
  require(ell_quartic >= 0.0, "ell_quartic must be nonnegative");
  ModelSpec m;
  m.family_ = Family::SeparableShifted;
  m.dim_ = dim;
  m.params_.epsilon = epsilon;
  m.params_.ell_quadratic = ell_quadratic;
  m.params_.ell_quartic = ell_quartic;
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::cournot(int dim, double s, double epsilon, double q_min) {
  require(dim > 0, "dim must be positive");
  require(s > -1.0 && s < 0.0, "s must lie in (-1, 0)");
  require(epsilon >= 0.0, "epsilon must be nonnegative");
  require(q_min > 0.0, "q_min must be positive");
  ModelSpec m;
  m.family_ = Family::Cournot;
  m.dim_ = dim;
  m.params_.s = s;
  m.params_.epsilon = epsilon;
  m.params_.c1 = 0.0;
  m.params_.q_min = q_min;
  m.convention_ = VelocityConvention::Production;
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::quadratic_xv(int dim) {
  require(dim > 0, "dim must be positive");
  ModelSpec m;
  m.family_ = Family::QuadraticXV;
  m.dim_ = dim;
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::generalized_quadratic(int dim, Polynomial2 kinetic, Polynomial2 potential,
                                           Polynomial2 coupling) {
  require(dim > 0, "dim must be positive");
  const bool f_positive =
      (kinetic.c2 > 0.0 && kinetic.c1 * kinetic.c1 < 4.0 * kinetic.c0 * kinetic.c2) ||
      (kinetic.c2 == 0.0 && kinetic.c1 == 0.0 && kinetic.c0 > 0.0);
  require(f_positive, "kinetic coefficient f(x) must be positive for every x");
  require(coupling.c2 == 0.0, "coupling h(x) must be affine (h'' = 0)");
  ModelSpec m;
  m.family_ = Family::GeneralizedQuadratic;
  m.dim_ = dim;
  m.params_.kinetic = kinetic;
  m.params_.potential = potential;
  m.params_.coupling = coupling;
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::cournot_x(int dim, double s, double epsilon, double c1, double c2,
                               double q_min) {
  require(dim > 0, "dim must be positive");
  require(s > -1.0 && s < 0.0, "s must lie in (-1, 0)");
  require(epsilon >= 0.0, "epsilon must be nonnegative");
  require(c1 < 0.0, "c1 must be negative");
  require(c2 > 0.0, "c2 must be positive");
  require(q_min > 0.0, "q_min must be positive");
  ModelSpec m;
  m.family_ = Family::CournotX;
  m.dim_ = dim;
  m.params_.s = s;
  m.params_.epsilon = epsilon;
  m.params_.c1 = c1;
  m.params_.c2 = c2;
  m.params_.q_min = q_min;
  m.convention_ = VelocityConvention::Production;
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::custom(int dim, CustomLagrangian lagrangian, VelocityConvention convention) {
  require(dim > 0, "dim must be positive");
  require(static_cast<bool>(lagrangian.value), "custom Lagrangian needs a value function");
  require(lagrangian.fd_step > 0.0, "custom fd_step must be positive");
  ModelSpec m;
  m.family_ = Family::Custom;
  m.dim_ = dim;
  m.convention_ = convention;
  m.custom_ = std::make_shared<const CustomLagrangian>(std::move(lagrangian));
  m.terminal_ = TerminalCost::zero(dim);
  return m;
}

ModelSpec ModelSpec::with_terminal(TerminalCost terminal) const {
  require(terminal.dim() == dim_, "terminal cost dimension must match the model");
  ModelSpec m = *this;
  m.terminal_ = std::move(terminal);
  return m;
}

const CustomLagrangian* ModelSpec::custom_lagrangian() const { return custom_.get(); }

bool ModelSpec::x_free() const {
  switch (family_) {
    case Family::SeparableShifted:
    case Family::Cournot:
      return true;
    case Family::Custom:
      return !custom_->x_dependent;
    default:
      return false;
  }
}

double ModelSpec::demand(double z) const {
  const double s = params_.s;
  return params_.c1 * z - std::pow(z, s + 1.0) / (s + 1.0);
}

double ModelSpec::demand_d1(double z) const { return params_.c1 - std::pow(z, params_.s); }

double ModelSpec::demand_d2(double z) const {
  const double s = params_.s;
  return -s * std::pow(z, s - 1.0);
}

double ModelSpec::control_floor(double aggregate) const {
  return params_.q_min - params_.epsilon * aggregate;
}

// --- evaluation ------------------------------------------------------------------

LagrangianDerivatives eval_lagrangian(const ModelSpec& model, const Vec& x, const Vec& v,
                                      const Vec& Q) {
  check_sizes(model, x, v, Q);
  switch (model.family()) {
    case Family::SeparableShifted: return eval_separable_shifted(model, v, Q);
    case Family::Cournot:
    case Family::CournotX: return eval_production(model, x, v, Q);
    case Family::QuadraticXV: return eval_quadratic_xv(model, x, v, Q);
    case Family::GeneralizedQuadratic: return eval_generalized_quadratic(model, x, v, Q);
    case Family::Custom: return eval_custom(model, x, v, Q);
  }
  throw invalid_argument("unknown model family");
}

LagrangianDerivatives finite_difference_derivatives(
    const std::function<double(const Vec&, const Vec&, const Vec&)>& value, const Vec& x,
    const Vec& v, const Vec& Q, double h) {
  const int d = static_cast<int>(x.size());
  const int n = 3 * d;
  Vec z(n);
  z << x, v, Q;
  auto f = [&](const Vec& w) {
    return value(w.segment(0, d), w.segment(d, d), w.segment(2 * d, d));
  };

  auto out = zeros(d);
  out.value = f(z);
  Vec grad(n);
  for (int i = 0; i < n; ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    grad[i] = (f(zp) - f(zm)) / (2.0 * h);
  }
  const double hh = std::max(h, 1e-4);
  Mat hess(n, n);
  for (int i = 0; i < n; ++i) {
    Vec zp = z, zm = z;
    zp[i] += hh;
    zm[i] -= hh;
    hess(i, i) = (f(zp) - 2.0 * out.value + f(zm)) / (hh * hh);
    for (int j = 0; j < i; ++j) {
      Vec zpp = z, zpm = z, zmp = z, zmm = z;
      zpp[i] += hh; zpp[j] += hh;
      zpm[i] += hh; zpm[j] -= hh;
      zmp[i] -= hh; zmp[j] += hh;
      zmm[i] -= hh; zmm[j] -= hh;
      hess(i, j) = hess(j, i) = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * hh * hh);
    }
  }
  out.dx = grad.segment(0, d);
  out.dv = grad.segment(d, d);
  out.hxx = hess.block(0, 0, d, d);
  out.hxv = hess.block(0, d, d, d);
  out.hvv = hess.block(d, d, d, d);
  out.hxQ = hess.block(0, 2 * d, d, d);
  out.hvQ = hess.block(d, 2 * d, d, d);
  return out;
}

Vec dpH(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q) {
  if (model.is_production_family()) {
    Vec warm(model.dim());
    for (int i = 0; i < model.dim(); ++i) {
      warm[i] = std::max(model.control_floor(Q[i]) + 1.0, model.params().q_min);
    }
    return dpH(model, x, p, Q, warm);
  }
  return dpH(model, x, p, Q, Vec::Zero(model.dim()));
}

Vec dpH(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q, const Vec& warm_start) {
  check_sizes(model, x, p, Q);
  if (model.is_production_family()) {
    Vec q(model.dim());
    for (int i = 0; i < model.dim(); ++i) {
      q[i] = solve_production_component(model, p[i], Q[i], warm_start[i]);
    }
    return q;
  }
  return solve_generic(model, x, p, Q, warm_start);
}

HamiltonianHessians hessians_H(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q) {
  HamiltonianHessians out;
  out.v = dpH(model, x, p, Q);
  const auto ev = eval_lagrangian(model, x, out.v, Q);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ev.hvv + ev.hvv.transpose()));
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    std::ostringstream os;
    os << "D2_vv L is numerically singular (eigenvalues in [" << lo << ", " << hi << "])";
    throw singular_hessian(os.str());
  }
  out.hpp = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  out.hpQ = out.hpp * (-ev.hvQ);
  return out;
}

LagrangianDerivatives eval_lagrangian_state(const ModelSpec& model, const Vec& x, const Vec& xdot,
                                            const Vec& Q) {
  const double sign = model.velocity_sign();
  if (sign > 0.0) return eval_lagrangian(model, x, xdot, Q);
  auto ev = eval_lagrangian(model, x, -xdot, Q);
  ev.dv = -ev.dv;
  ev.hxv = -ev.hxv;
  ev.hvQ = -ev.hvQ;
  return ev;
}

Vec dpH_state(const ModelSpec& model, const Vec& x, const Vec& p, const Vec& Q) {
  const double sign = model.velocity_sign();
  return sign * dpH(model, x, sign * p, Q);
}

HamiltonianHessians hessians_H_state(const ModelSpec& model, const Vec& x, const Vec& p,
                                     const Vec& Q) {
  const double sign = model.velocity_sign();
  auto h = hessians_H(model, x, sign * p, Q);
  h.v *= sign;
  h.hpQ *= sign;
  return h;
}

}  // namespace mfgc
