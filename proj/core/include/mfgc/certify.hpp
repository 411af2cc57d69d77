#pragma once

#include "mfgc/aggregation.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mfgc {

// Per-coordinate sampling ranges. v is the model's native control.
struct SampleBox {
  double x_lo = -5.0, x_hi = 5.0;
  double v_lo = -5.0, v_hi = 5.0;
  double Q_lo = -5.0, Q_hi = 5.0;
};

// Production families: q in [q_min, 10], Q in [0, 10]; others [-5, 5].
SampleBox default_box(const ModelSpec& model);

struct SampleSpec {
  SampleBox box;
  int samples = 2000;
  std::uint64_t seed = 1;
};

// Scrambled Halton points in [0,1)^dim; point i depends only on (i, seed).
class HaltonSequence {
 public:
  HaltonSequence(int dim, std::uint64_t seed);
  Vec point(std::uint64_t index) const;
  int dim() const { return static_cast<int>(bases_.size()); }

 private:
  std::vector<int> bases_;
  Vec shift_;
};

struct A1Result {
  bool pass = false;
  double min_eigenvalue = 0.0;  // sym((D2_vv L)^-1 (-D2_vQ L) + I)
  double min_hvv_eigenvalue = 0.0;
  double max_hvv_eigenvalue = 0.0;
  Vec argmin_v;
  Vec argmin_Q;
  int evaluated = 0;
  int skipped = 0;
};

A1Result check_A1(const ModelSpec& model, const SampleSpec& spec);

// Closed-form constants of the x-dependent Cournot family.
struct CournotXBounds {
  double c = 0.0;                // min(-2 c1, c2)
  double M = 0.0;                // eps (-c1 + q_min^s)
  double threshold_c2 = 0.0;     // sqrt(2) c / (-c2 + q_min^s)
  double threshold_c1 = 0.0;     // sqrt(2) c / (-c1 + q_min^s)
};
CournotXBounds cournot_x_bounds(const ModelSpec& model);

struct A2Result {
  bool pass = false;
  double c = 0.0;     // min eigenvalue of D2_(x,v) L
  double M = 0.0;     // max(M_vQ, M_xQ)
  double M_vQ = 0.0;
  double M_xQ = 0.0;
  double margin = 0.0;  // c^2 - 2 M^2
  int dx_vanishing = 0;  // samples with |D_x L| <= 1e-12 (warning only)
  int evaluated = 0;
  int skipped = 0;
  std::optional<CournotXBounds> analytic;
};

A2Result check_A2(const ModelSpec& model, const SampleSpec& spec);

struct GConvexity {
  bool pass = false;
  double min_eigenvalue = 0.0;
};

GConvexity check_g_convexity(const ModelSpec& model);

struct MonotonicityResult {
  double min_quotient = 0.0;
  int evaluated = 0;
  int skipped = 0;
  int argmin_pair = -1;
};

// Minimum of <E[Q1]-E[Q0], Q1-Q0> / |Q1-Q0|^2 over `pairs` random pairs with
// values in [lo, hi]: constants for x-free models, smooth paths otherwise.
MonotonicityResult empirical_monotonicity(const ModelSpec& model, const ParticleEnsemble& m0,
                                          const TimeGrid& grid, int pairs, std::uint64_t seed,
                                          double lo, double hi);

struct CertifyOptions {
  SampleSpec sample;
  int pairs = 50;
};

struct CertificateReport {
  std::optional<A1Result> a1;
  std::optional<A2Result> a2;
  GConvexity g;
  std::optional<double> delta;
  std::string delta_formula;  // "x_free" or "x_dependent"
  std::optional<MonotonicityResult> empirical;
  SampleSpec spec;
  int pairs = 0;
  bool pass = false;
};

// Runs the checks applicable to the model: A1 for x-free models, A2 otherwise,
// convexity of g, the theoretical delta when its hypotheses hold, and the
// sampled monotonicity quotient when `pairs` > 0.
CertificateReport certify(const ModelSpec& model, const ParticleEnsemble& m0,
                          const TimeGrid& grid, const CertifyOptions& options);

}  // namespace mfgc
