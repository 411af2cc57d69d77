#include "mfgc/model.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfgc;
using testutil::vec1;

TEST(CournotLagrangian, DerivativesMatchHandFormulas) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const oracle::Cournot ref{-0.5, 1.0};
  for (double q : {0.05, 0.4, 1.0, 3.7}) {
    for (double Q : {0.0, 0.3, 2.5}) {
      const auto d = eval_lagrangian(model, vec1(0.0), vec1(q), vec1(Q));
      EXPECT_NEAR(d.value, ref.L(q, Q), 1e-12);
      EXPECT_NEAR(d.dv[0], ref.Lq(q, Q), 1e-12);
      EXPECT_NEAR(d.hvv(0, 0), ref.Lqq(q, Q), 1e-10);
      EXPECT_NEAR(d.hvQ(0, 0), ref.LqQ(q, Q), 1e-10);
      EXPECT_EQ(d.dx[0], 0.0);
    }
  }
}

TEST(CournotLagrangian, ConvexInProductionForAllExponents) {
  for (double s : {-0.9, -0.5, -0.1}) {
    const oracle::Cournot ref{s, 1.0};
    for (double q : {1e-3, 0.5, 8.0}) EXPECT_GT(ref.Lqq(q, 1.0), 0.0);
    const auto model = ModelSpec::cournot(1, s, 1.0);
    EXPECT_GT(eval_lagrangian(model, vec1(0), vec1(0.7), vec1(1.0)).hvv(0, 0), 0.0);
  }
}

TEST(CournotHamiltonian, InvertsMarginalCost) {
  // s = -1/2, Q = 0: L_q(q) = 2 sqrt(q) + q^(1/2) = 3 sqrt(q), so p = 3 gives q = 1.
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  EXPECT_NEAR(dpH(model, vec1(0), vec1(3.0), vec1(0.0))[0], 1.0, 1e-12);

  const oracle::Cournot ref{-0.5, 1.0};
  for (double p : {0.5, 2.0, 7.5}) {
    for (double Q : {0.0, 0.8}) {
      EXPECT_NEAR(dpH(model, vec1(0), vec1(p), vec1(Q))[0], ref.dpH(p, Q), 1e-9);
    }
  }
}

TEST(CournotHamiltonian, HessiansAreInverseAndRatio) {
  const auto model = ModelSpec::cournot(1, -0.3, 0.8);
  const oracle::Cournot ref{-0.3, 0.8};
  const double p = 2.2, Q = 0.6;
  const auto h = hessians_H(model, vec1(0), vec1(p), vec1(Q));
  const double q = ref.dpH(p, Q);
  EXPECT_NEAR(h.v[0], q, 1e-9);
  EXPECT_NEAR(h.hpp(0, 0), 1.0 / ref.Lqq(q, Q), 1e-8);
  EXPECT_NEAR(h.hpQ(0, 0), -ref.LqQ(q, Q) / ref.Lqq(q, Q), 1e-8);
}

TEST(CournotX, AddsStateCostOnly) {
  const auto model = ModelSpec::cournot_x(1, -0.5, 0.5, -1.0, 2.0);
  const oracle::Cournot ref{-0.5, 0.5, -1.0};
  const auto d = eval_lagrangian(model, vec1(1.5), vec1(0.9), vec1(0.4));
  EXPECT_NEAR(d.value, ref.L(0.9, 0.4) + 2.0 * 1.5 * 1.5 / 2, 1e-12);
  EXPECT_NEAR(d.dx[0], 2.0 * 1.5, 1e-12);
  EXPECT_NEAR(d.hxx(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(d.dv[0], ref.Lq(0.9, 0.4), 1e-12);
  EXPECT_EQ(d.hxv(0, 0), 0.0);
  EXPECT_FALSE(model.x_free());
}

TEST(ProductionFrame, StateViewFlipsVelocity) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const auto native = eval_lagrangian(model, vec1(0), vec1(0.6), vec1(0.2));
  const auto state = eval_lagrangian_state(model, vec1(0), vec1(-0.6), vec1(0.2));
  EXPECT_DOUBLE_EQ(state.value, native.value);
  EXPECT_DOUBLE_EQ(state.dv[0], -native.dv[0]);
  EXPECT_DOUBLE_EQ(state.hvv(0, 0), native.hvv(0, 0));
  EXPECT_DOUBLE_EQ(state.hvQ(0, 0), -native.hvQ(0, 0));
  EXPECT_NEAR(dpH_state(model, vec1(0), vec1(-3.0), vec1(0.0))[0], -1.0, 1e-12);
}

TEST(QuadraticXV, ClosedFormDerivatives) {
  const auto model = ModelSpec::quadratic_xv(2);
  Vec x(2), v(2), Q(2);
  x << 1.0, -2.0;
  v << 0.5, 3.0;
  Q << 0.25, -1.0;
  const auto d = eval_lagrangian(model, x, v, Q);
  EXPECT_DOUBLE_EQ(d.value, x.squaredNorm() + v.squaredNorm() + x.dot(Q));
  EXPECT_TRUE(d.dx.isApprox(2 * x + Q));
  EXPECT_TRUE(d.dv.isApprox(2 * v));
  EXPECT_TRUE(d.hxQ.isApprox(Mat::Identity(2, 2)));
  EXPECT_TRUE(d.hvQ.isZero());
  EXPECT_TRUE(d.hxv.isZero());
}

TEST(SeparableShifted, QuarticHessianAndShift) {
  const double eps = 0.5, a = 1.0, b = 0.3;
  const auto model = ModelSpec::separable_shifted(1, eps, a, b);
  const double v = 0.4, Q = -1.1, w = -v + eps * Q;
  const auto d = eval_lagrangian(model, vec1(0), vec1(v), vec1(Q));
  EXPECT_NEAR(d.value, a * w * w / 2 + b * std::pow(w, 4) / 4, 1e-14);
  EXPECT_NEAR(d.dv[0], -(a * w + b * w * w * w), 1e-14);
  EXPECT_NEAR(d.hvv(0, 0), a + 3 * b * w * w, 1e-14);
  EXPECT_NEAR(d.hvQ(0, 0), -eps * (a + 3 * b * w * w), 1e-14);
  // The shift makes D_pQ H = eps identically.
  const auto h = hessians_H(model, vec1(0), vec1(0.9), vec1(Q));
  EXPECT_NEAR(h.hpQ(0, 0), eps, 1e-12);
}

TEST(GeneralizedQuadratic, AgreesWithFiniteDifferences) {
  const auto model = ModelSpec::generalized_quadratic(1, {1.5, 0.2, 0.1}, {0.0, 0.3, 1.0},
                                                      {0.5, 1.0, 0.0});
  auto value = [&](const Vec& x, const Vec& v, const Vec& Q) {
    return eval_lagrangian(model, x, v, Q).value;
  };
  const Vec x = vec1(0.7), v = vec1(-0.4), Q = vec1(1.3);
  const auto exact = eval_lagrangian(model, x, v, Q);
  const auto fd = finite_difference_derivatives(value, x, v, Q);
  EXPECT_NEAR(exact.dx[0], fd.dx[0], 1e-7);
  EXPECT_NEAR(exact.dv[0], fd.dv[0], 1e-7);
  EXPECT_NEAR(exact.hxv(0, 0), fd.hxv(0, 0), 1e-5);
  EXPECT_NEAR(exact.hvv(0, 0), fd.hvv(0, 0), 1e-5);
  EXPECT_NEAR(exact.hxQ(0, 0), fd.hxQ(0, 0), 1e-5);
}

TEST(CustomLagrangian, FiniteDifferenceFallbackReproducesQuadratic) {
  CustomLagrangian custom;
  custom.value = [](const Vec& x, const Vec& v, const Vec& Q) {
    return x.squaredNorm() + v.squaredNorm() + x.dot(Q);
  };
  const auto model = ModelSpec::custom(1, custom);
  const auto d = eval_lagrangian(model, vec1(0.3), vec1(-0.8), vec1(0.5));
  EXPECT_NEAR(d.dx[0], 2 * 0.3 + 0.5, 1e-7);
  EXPECT_NEAR(d.dv[0], -1.6, 1e-7);
  EXPECT_NEAR(d.hvv(0, 0), 2.0, 1e-5);
  EXPECT_NEAR(dpH(model, vec1(0.3), vec1(1.0), vec1(0.5))[0], 0.5, 1e-6);
}

TEST(ModelValidation, RejectsInadmissibleParameters) {
  using testutil::throws_kind;
  EXPECT_TRUE(throws_kind([] { ModelSpec::cournot(1, 0.5, 1.0); }, ErrorKind::InvalidArgument));
  EXPECT_TRUE(throws_kind([] { ModelSpec::cournot(1, -0.5, 1.0, 0.0); }, ErrorKind::InvalidArgument));
  EXPECT_TRUE(throws_kind([] { ModelSpec::separable_shifted(1, 0.5, -1.0); }, ErrorKind::InvalidArgument));
  EXPECT_TRUE(throws_kind([] { ModelSpec::cournot_x(1, -0.5, 1.0, 1.0, 1.0); }, ErrorKind::InvalidArgument));
  Mat indefinite(1, 1);
  indefinite << -1.0;
  EXPECT_TRUE(throws_kind([&] { TerminalCost::quadratic(indefinite, Vec::Zero(1)); },
                          ErrorKind::InvalidArgument));
}

TEST(ModelValidation, ProductionBelowFloorIsDomainError) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  EXPECT_TRUE(testutil::throws_kind(
      [&] { eval_lagrangian(model, vec1(0), vec1(-0.5), vec1(0.0)); }, ErrorKind::Domain));
}

TEST(TerminalCostTest, QuadraticAroundCenter) {
  Mat G(2, 2);
  G << 2.0, 0.5, 0.5, 1.0;
  Vec a(2), x(2);
  a << 1.0, -1.0;
  x << 0.0, 2.0;
  const auto g = TerminalCost::quadratic(G, a);
  EXPECT_NEAR(g.value(x), 0.5 * (x - a).dot(G * (x - a)), 1e-14);
  EXPECT_TRUE(g.gradient(x).isApprox(G * (x - a)));
  EXPECT_TRUE(TerminalCost::zero(2).gradient(x).isZero());
}

TEST(FamilyNames, RoundTrip) {
  for (auto f : {Family::SeparableShifted, Family::Cournot, Family::QuadraticXV,
                 Family::GeneralizedQuadratic, Family::CournotX}) {
    EXPECT_EQ(family_from_string(to_string(f)), f);
  }
  EXPECT_FALSE(family_from_string("cournot-x").has_value());
}
