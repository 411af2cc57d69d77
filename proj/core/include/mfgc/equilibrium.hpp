#pragma once

#include "mfgc/aggregation.hpp"
#include "mfgc/errors.hpp"

#include <optional>
#include <vector>

namespace mfgc {

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  double initial_step = 0.5;
  // Fixed damping in (0, 2); disables backtracking when set.
  std::optional<double> fixed_step;
  std::optional<ControlPath> initial_guess;
  int divergence_window = 20;

  void validate() const;
};

struct EquilibriumReport {
  ControlPath Q;
  double residual_norm = 0.0;
  int iterations = 0;
  bool constant_flag = false;
  std::vector<double> residual_history;
  Vec value_samples;                          // u(x0^i, 0)
  std::vector<ParticleEnsemble> pushforward;  // m(t_k), one per node
};

// NoConvergence carrying the iteration record.
class EquilibriumFailure : public Error {
 public:
  EquilibriumFailure(const std::string& message, std::vector<double> history, ControlPath last)
      : Error(ErrorKind::NoConvergence, message),
        history_(std::move(history)),
        last_(std::move(last)) {}

  const std::vector<double>& history() const { return history_; }
  const ControlPath& last_iterate() const { return last_; }

 private:
  std::vector<double> history_;
  ControlPath last_;
};

// Default starting point: zero, or max(q_min, 1) for production families.
ControlPath default_initial_guess(const ModelSpec& model, const TimeGrid& grid);

// Damped iteration Q <- Q - tau E[Q] until |E[Q]| <= tol. Throws
// EquilibriumFailure on budget exhaustion or divergence.
EquilibriumReport solve(const ModelSpec& model, const ParticleEnsemble& m0, const TimeGrid& grid,
                        const SolverOptions& opts = {});

// Constant aggregate for x-free models: Newton on
// Q + sum_i w_i D_pH(-Dg(x_T(x0^i, Q)), Q) = 0 with the exact Jacobian.
Vec solve_constant(const ModelSpec& model, const ParticleEnsemble& m0, double horizon,
                   const SolverOptions& opts = {});

// Mean error Ebar(Q) for a constant aggregate and its Jacobian.
struct ConstantError {
  Vec value;
  Mat jacobian;
};
ConstantError constant_error(const ModelSpec& model, const ParticleEnsemble& m0, const Vec& Q,
                             double horizon);

struct Reconstruction {
  Vec value_samples;
  std::vector<ParticleEnsemble> pushforward;
};

Reconstruction reconstruct(const ModelSpec& model, const ParticleEnsemble& m0,
                           const ControlPath& Q);

struct UniquenessProbe {
  std::vector<ControlPath> solutions;
  std::vector<int> failures;  // guess indices whose solve threw
  double max_pairwise_distance = 0.0;
};

// Solves from `guesses` random initial paths drawn in [lo, hi] and reports the
// largest pairwise L2 distance among the converged solutions.
UniquenessProbe uniqueness_probe(const ModelSpec& model, const ParticleEnsemble& m0,
                                 const TimeGrid& grid, const SolverOptions& opts, int guesses,
                                 std::uint64_t seed, double lo, double hi);

// max |E[Q1] - E[Q0]| / |Q1 - Q0| over random path pairs in [lo, hi].
double estimate_lipschitz(const ModelSpec& model, const ParticleEnsemble& m0,
                          const TimeGrid& grid, int pairs, std::uint64_t seed, double lo,
                          double hi);

// Contraction step (1 - delta) / Lambda^2 for a strongly monotone, Lipschitz E.
double theoretical_step(double monotonicity, double lipschitz);

}  // namespace mfgc
