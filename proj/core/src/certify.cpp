#include "mfgc/certify.hpp"

#include "mfgc/counter_rng.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfgc {
namespace {

std::vector<int> first_primes(int n) {
  std::vector<int> primes;
  for (int k = 2; static_cast<int>(primes.size()) < n; ++k) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > k) break;
      if (k % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(k);
  }
  return primes;
}

double radical_inverse(std::uint64_t i, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (i > 0) {
    result += f * static_cast<double>(i % base);
    i /= base;
    f /= base;
  }
  return result;
}

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

double min_sym_eigenvalue(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double operator_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(A).singularValues()(0);
}

struct Sample {
  Vec x, v, Q;
};

// Coordinates: x (only when the model depends on x), then v, then Q.
Sample sample_point(const ModelSpec& model, const HaltonSequence& seq, const SampleBox& box,
                    std::uint64_t index, bool with_x) {
  const int d = model.dim();
  const Vec u = seq.point(index);
  Sample s{Vec::Zero(d), Vec(d), Vec(d)};
  int j = 0;
  if (with_x) {
    for (int i = 0; i < d; ++i) s.x[i] = lerp(box.x_lo, box.x_hi, u[j++]);
  }
  for (int i = 0; i < d; ++i) s.v[i] = lerp(box.v_lo, box.v_hi, u[j++]);
  for (int i = 0; i < d; ++i) s.Q[i] = lerp(box.Q_lo, box.Q_hi, u[j++]);
  return s;
}

void validate_spec(const SampleSpec& spec) {
  const auto& b = spec.box;
  if (!(b.x_lo <= b.x_hi && b.v_lo <= b.v_hi && b.Q_lo <= b.Q_hi)) {
    throw invalid_argument("sample box has an empty range");
  }
  if (spec.samples < 1) throw invalid_argument("sample count must be positive");
}

}  // namespace

SampleBox default_box(const ModelSpec& model) {
  SampleBox box;
  if (model.is_production_family()) {
    box.v_lo = model.params().q_min;
    box.v_hi = 10.0;
    box.Q_lo = 0.0;
    box.Q_hi = 10.0;
  }
  return box;
}

HaltonSequence::HaltonSequence(int dim, std::uint64_t seed) : bases_(first_primes(dim)), shift_(dim) {
  const CounterRng rng(seed);
  for (int j = 0; j < dim; ++j) shift_[j] = rng.uniform(0x4a17, static_cast<std::uint64_t>(j));
}

Vec HaltonSequence::point(std::uint64_t index) const {
  Vec u(dim());
  for (int j = 0; j < dim(); ++j) {
    const double r = radical_inverse(index + 1, bases_[j]) + shift_[j];
    u[j] = r - std::floor(r);
  }
  return u;
}

A1Result check_A1(const ModelSpec& model, const SampleSpec& spec) {
  validate_spec(spec);
  const int d = model.dim();
  const bool with_x = !model.x_free();
  const HaltonSequence seq((with_x ? 3 : 2) * d, spec.seed);

  struct Local {
    bool ok = false;
    double eig = 0.0, hvv_min = 0.0, hvv_max = 0.0;
    Sample s;
  };
  std::vector<Local> local(spec.samples);
  parallel_for(local.size(), [&](std::size_t i) {
    Local& out = local[i];
    out.s = sample_point(model, seq, spec.box, i, with_x);
    try {
      const auto ev = eval_lagrangian(model, out.s.x, out.s.v, out.s.Q);
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ev.hvv + ev.hvv.transpose()));
      out.hvv_min = es.eigenvalues().minCoeff();
      out.hvv_max = es.eigenvalues().maxCoeff();
      if (!(out.hvv_min > 0.0)) {
        out.eig = -std::numeric_limits<double>::infinity();
      } else {
        const Mat tested = ev.hvv.llt().solve(-ev.hvQ) + Mat::Identity(d, d);
        out.eig = min_sym_eigenvalue(tested);
      }
      out.ok = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Domain) throw;
    }
  });

  A1Result r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  r.min_hvv_eigenvalue = std::numeric_limits<double>::infinity();
  r.max_hvv_eigenvalue = 0.0;
  for (const auto& l : local) {
    if (!l.ok) {
      ++r.skipped;
      continue;
    }
    ++r.evaluated;
    r.min_hvv_eigenvalue = std::min(r.min_hvv_eigenvalue, l.hvv_min);
    r.max_hvv_eigenvalue = std::max(r.max_hvv_eigenvalue, l.hvv_max);
    if (l.eig < r.min_eigenvalue) {
      r.min_eigenvalue = l.eig;
      r.argmin_v = l.s.v;
      r.argmin_Q = l.s.Q;
    }
  }
  r.pass = r.evaluated > 0 && r.min_eigenvalue > 0.0 && r.min_hvv_eigenvalue > 0.0;
  return r;
}

CournotXBounds cournot_x_bounds(const ModelSpec& model) {
  if (model.family() != Family::CournotX) {
    throw invalid_argument("cournot_x_bounds needs the x-dependent Cournot family");
  }
  const auto& p = model.params();
  const double floor_power = std::pow(p.q_min, p.s);
  CournotXBounds b;
  b.c = std::min(-2.0 * p.c1, p.c2);
  b.M = p.epsilon * (-p.c1 + floor_power);
  b.threshold_c2 = std::sqrt(2.0) * b.c / (-p.c2 + floor_power);
  b.threshold_c1 = std::sqrt(2.0) * b.c / (-p.c1 + floor_power);
  return b;
}

A2Result check_A2(const ModelSpec& model, const SampleSpec& spec) {
  validate_spec(spec);
  const int d = model.dim();
  const HaltonSequence seq(3 * d, spec.seed);

  struct Local {
    bool ok = false;
    bool dx_zero = false;
    double c = 0.0, mv = 0.0, mx = 0.0;
  };
  std::vector<Local> local(spec.samples);
  parallel_for(local.size(), [&](std::size_t i) {
    Local& out = local[i];
    const Sample s = sample_point(model, seq, spec.box, i, true);
    try {
      const auto ev = eval_lagrangian(model, s.x, s.v, s.Q);
      Mat block(2 * d, 2 * d);
      block << ev.hxx, ev.hxv, ev.hxv.transpose(), ev.hvv;
      out.c = min_sym_eigenvalue(block);
      out.mv = operator_norm(ev.hvQ);
      out.mx = operator_norm(ev.hxQ);
      out.dx_zero = ev.dx.norm() <= 1e-12;
      out.ok = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Domain) throw;
    }
  });

  A2Result r;
  r.c = std::numeric_limits<double>::infinity();
  for (const auto& l : local) {
    if (!l.ok) {
      ++r.skipped;
      continue;
    }
    ++r.evaluated;
    r.c = std::min(r.c, l.c);
    r.M_vQ = std::max(r.M_vQ, l.mv);
    r.M_xQ = std::max(r.M_xQ, l.mx);
    if (l.dx_zero) ++r.dx_vanishing;
  }
  r.M = std::max(r.M_vQ, r.M_xQ);
  r.margin = r.c * r.c - 2.0 * r.M * r.M;
  r.pass = r.evaluated > 0 && r.c > 0.0 && r.margin > 0.0;
  if (model.family() == Family::CournotX) r.analytic = cournot_x_bounds(model);
  return r;
}

GConvexity check_g_convexity(const ModelSpec& model) {
  const auto& g = model.terminal();
  GConvexity out;
  out.min_eigenvalue = g.is_zero() ? 0.0 : min_sym_eigenvalue(g.hessian());
  out.pass = out.min_eigenvalue >= 0.0;
  return out;
}

MonotonicityResult empirical_monotonicity(const ModelSpec& model, const ParticleEnsemble& m0,
                                          const TimeGrid& grid, int pairs, std::uint64_t seed,
                                          double lo, double hi) {
  const CounterRng rng(seed);
  const int modes = model.x_free() ? 0 : 2;
  MonotonicityResult r;
  r.min_quotient = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const auto stream = 2 * static_cast<std::uint64_t>(k);
    const auto q1 = random_path(grid, model.dim(), rng, stream, lo, hi, modes);
    const auto q0 = random_path(grid, model.dim(), rng, stream + 1, lo, hi, modes);
    try {
      const auto p = pairing(error_map(model, m0, q1), error_map(model, m0, q0), q1, q0);
      if (!(p.gap_sq > 1e-20)) {
        ++r.skipped;
        continue;
      }
      ++r.evaluated;
      const double quotient = p.inner / p.gap_sq;
      if (quotient < r.min_quotient) {
        r.min_quotient = quotient;
        r.argmin_pair = k;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Domain && e.kind() != ErrorKind::NoConvergence &&
          e.kind() != ErrorKind::IntegrationBlowup) {
        throw;
      }
      ++r.skipped;
    }
  }
  return r;
}

CertificateReport certify(const ModelSpec& model, const ParticleEnsemble& m0,
                          const TimeGrid& grid, const CertifyOptions& options) {
  CertificateReport report;
  report.spec = options.sample;
  report.pairs = options.pairs;
  report.g = check_g_convexity(model);
  bool assumptions = report.g.pass;
  if (model.x_free()) {
    report.a1 = check_A1(model, options.sample);
    assumptions = assumptions && report.a1->pass;
    report.delta_formula = "x_free";
    if (report.a1->pass && report.g.min_eigenvalue > 0.0 && report.a1->max_hvv_eigenvalue > 0.0) {
      report.delta = 1.0 / (1.0 + grid.horizon() * report.g.min_eigenvalue /
                                      report.a1->max_hvv_eigenvalue);
    }
  } else {
    report.a2 = check_A2(model, options.sample);
    assumptions = assumptions && report.a2->pass;
    report.delta_formula = "x_dependent";
    if (report.a2->pass && report.g.pass) {
      const double c_star = 2.0 * report.a2->M * report.a2->M / (report.a2->c * report.a2->c);
      report.delta = 0.5 * (1.0 + c_star);
    }
  }
  if (options.pairs > 0) {
    report.empirical = empirical_monotonicity(model, m0, grid, options.pairs, options.sample.seed,
                                              options.sample.box.Q_lo, options.sample.box.Q_hi);
  }
  report.pass = assumptions;
  return report;
}

}  // namespace mfgc
