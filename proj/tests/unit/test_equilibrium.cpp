#include "mfgc/equilibrium.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfgc;
using testutil::throws_kind;
using testutil::vec1;

namespace {

TerminalCost unit_g() { return TerminalCost::quadratic(Mat::Identity(1, 1), Vec::Zero(1)); }

ParticleEnsemble three_particles() {
  Mat pts(1, 3);
  pts << 1.5, 2.0, 3.0;
  Vec w(3);
  w << 0.3, 0.4, 0.3;
  return {pts, w};
}

ControlPath wavy_guess(const TimeGrid& grid, double centre) {
  Mat values(1, grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) {
    values(0, k) = centre + 0.3 * std::sin(4.0 * grid.node(k));
  }
  return {grid, values};
}

}  // namespace

TEST(Equilibrium, ExampleClosedFormAgainstBisection) {
  const oracle::Separable ref{0.5, 1.0, 0.0, 1.0, 1.0};
  const double expected = ref.equilibrium({{1.0, 1.0}});
  ASSERT_NEAR(expected, 0.4, 1e-12);

  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(unit_g());
  const auto m0 = ParticleEnsemble::dirac(vec1(1.0));
  const TimeGrid grid(1.0, 100);
  SolverOptions opts;
  opts.tol = 1e-10;
  opts.initial_guess = wavy_guess(grid, 0.0);
  const auto report = solve(model, m0, grid, opts);
  EXPECT_LE(report.residual_norm, 1e-10);
  EXPECT_TRUE(report.constant_flag);
  EXPECT_LT((report.Q.values().array() - expected).abs().maxCoeff(), 1e-6);
  const Vec constant = solve_constant(model, m0, 1.0, opts);
  EXPECT_NEAR(constant[0], expected, 1e-10);
  EXPECT_LT((report.Q.values().array() - constant[0]).abs().maxCoeff(), 1e-8);
}

TEST(Equilibrium, QuarticSeparableAgainstBisection) {
  const oracle::Separable ref{0.8, 1.0, 0.5, 2.0, 1.5};
  const double expected = ref.equilibrium({{1.5, 0.3}, {2.0, 0.4}, {3.0, 0.3}});
  const auto model = ModelSpec::separable_shifted(1, 0.8, 1.0, 0.5)
                         .with_terminal(TerminalCost::quadratic(Mat::Constant(1, 1, 2.0), Vec::Zero(1)));
  SolverOptions opts;
  opts.tol = 1e-11;
  EXPECT_NEAR(solve_constant(model, three_particles(), 1.5, opts)[0], expected, 1e-9);
  const auto report = solve(model, three_particles(), TimeGrid(1.5, 60), opts);
  EXPECT_NEAR(report.Q.mean()[0], expected, 1e-9);
}

TEST(Equilibrium, CournotConstantAgainstBisection) {
  const oracle::Cournot ref{-0.5, 1.0};
  const auto m0 = three_particles();
  const double T = 2.0;
  auto err = [&](double Q) {
    double e = Q;
    for (int i = 0; i < m0.size(); ++i) e -= m0.weight(i) * ref.control(m0.point(i)[0], Q, 1.0, T);
    return e;
  };
  const double expected = oracle::bisect(err, 0.0, 5.0, 80);
  const auto model = ModelSpec::cournot(1, -0.5, 1.0).with_terminal(unit_g());
  SolverOptions opts;
  opts.tol = 1e-11;
  EXPECT_NEAR(solve_constant(model, m0, T, opts)[0], expected, 1e-9);

  const TimeGrid grid(T, 80);
  opts.initial_guess = wavy_guess(grid, 1.0);
  const auto report = solve(model, m0, grid, opts);
  EXPECT_TRUE(report.constant_flag);
  EXPECT_LT(report.Q.max_deviation_from_mean(), 1e-9);
  EXPECT_NEAR(report.Q.mean()[0], expected, 1e-9);
}

TEST(Equilibrium, StateDependentModelConverges) {
  const auto model = ModelSpec::quadratic_xv(1);
  const auto m0 = three_particles();
  const TimeGrid grid(1.0, 80);
  SolverOptions opts;
  opts.tol = 1e-9;
  const auto report = solve(model, m0, grid, opts);
  EXPECT_LE(report.residual_norm, 1e-9);
  EXPECT_LE(error_map(model, m0, report.Q).l2_norm(), 1e-9);
  // Residual history is recorded once per accepted iterate and ends at the tolerance.
  ASSERT_FALSE(report.residual_history.empty());
  EXPECT_LE(report.residual_history.back(), 1e-9);
  EXPECT_FALSE(report.constant_flag);
}

TEST(Equilibrium, ReconstructionStartsFromInitialMeasure) {
  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(unit_g());
  const auto m0 = three_particles();
  const TimeGrid grid(1.0, 20);
  const auto report = solve(model, m0, grid);
  ASSERT_EQ(static_cast<int>(report.pushforward.size()), grid.nodes());
  EXPECT_EQ(report.pushforward.front().points(), m0.points());
  EXPECT_EQ(report.pushforward.back().weights(), m0.weights());
  EXPECT_EQ(report.value_samples.size(), m0.size());
  const auto traj = solve_el(model, m0.point(1), report.Q);
  EXPECT_NEAR(report.value_samples[1], traj.cost, 1e-12);
  EXPECT_NEAR(report.pushforward.back().point(1)[0], traj.x_terminal[0], 1e-12);
}

TEST(Equilibrium, ConstantJacobianMatchesFiniteDifferences) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0).with_terminal(unit_g());
  const auto m0 = three_particles();
  const Vec Q = vec1(0.7);
  const auto ce = constant_error(model, m0, Q, 2.0);
  const double h = 1e-6;
  const double fd = (constant_error(model, m0, vec1(0.7 + h), 2.0).value[0] -
                     constant_error(model, m0, vec1(0.7 - h), 2.0).value[0]) / (2 * h);
  EXPECT_NEAR(ce.jacobian(0, 0), fd, 1e-6);
}

TEST(Equilibrium, UniqueAcrossRandomInitialisations) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.9).with_terminal(unit_g());
  SolverOptions opts;
  opts.tol = 1e-10;
  const auto probe = uniqueness_probe(model, three_particles(), TimeGrid(1.0, 40), opts, 4, 9, 0.0, 3.0);
  EXPECT_TRUE(probe.failures.empty());
  EXPECT_EQ(probe.solutions.size(), 4u);
  EXPECT_LT(probe.max_pairwise_distance, 1e-7);
}

TEST(Equilibrium, FailureCarriesHistoryAndLastIterate) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0).with_terminal(unit_g());
  const TimeGrid grid(1.0, 20);
  SolverOptions opts;
  opts.tol = 1e-14;
  opts.max_iter = 2;
  try {
    solve(model, three_particles(), grid, opts);
    FAIL() << "expected EquilibriumFailure";
  } catch (const EquilibriumFailure& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoConvergence);
    EXPECT_FALSE(e.history().empty());
    EXPECT_EQ(e.last_iterate().grid(), grid);
  }
}

TEST(Equilibrium, OptionValidation) {
  const auto model = ModelSpec::separable_shifted(1, 0.5);
  const auto m0 = ParticleEnsemble::dirac(vec1(1.0));
  const TimeGrid grid(1.0, 10);
  SolverOptions opts;
  opts.fixed_step = 2.5;
  EXPECT_TRUE(throws_kind([&] { solve(model, m0, grid, opts); }, ErrorKind::InvalidArgument));
  opts = {};
  opts.tol = -1.0;
  EXPECT_TRUE(throws_kind([&] { solve(model, m0, grid, opts); }, ErrorKind::InvalidArgument));
  opts = {};
  opts.initial_guess = ControlPath::zero(TimeGrid(1.0, 11), 1);
  EXPECT_TRUE(throws_kind([&] { solve(model, m0, grid, opts); }, ErrorKind::GridMismatch));
  EXPECT_TRUE(throws_kind([&] { solve_constant(ModelSpec::quadratic_xv(1), m0, 1.0); },
                          ErrorKind::InvalidArgument));
}

TEST(Equilibrium, FixedStepIterationConverges) {
  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(unit_g());
  SolverOptions opts;
  opts.fixed_step = 0.5;
  opts.tol = 1e-10;
  const auto report = solve(model, ParticleEnsemble::dirac(vec1(1.0)), TimeGrid(1.0, 30), opts);
  EXPECT_NEAR(report.Q.mean()[0], 0.4, 1e-9);
}

TEST(Equilibrium, StepSizeFromConstants) {
  EXPECT_DOUBLE_EQ(theoretical_step(0.5, 2.0), 0.125);
  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(unit_g());
  const double lip = estimate_lipschitz(model, ParticleEnsemble::dirac(vec1(1.0)), TimeGrid(1.0, 20),
                                        10, 3, -2.0, 2.0);
  // E[Q] = Q + eps Q - (T eps Q + x0)/(1 + T) is affine with slope 1.25 on constants.
  EXPECT_GE(lip, 1.0);
  EXPECT_LE(lip, 1.5 + 1e-9);
}
