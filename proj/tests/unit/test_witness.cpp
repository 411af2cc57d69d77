#include "mfgc/witness.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfgc;

namespace {

double mean_control(const std::vector<Atom>& mu) {
  double q = 0.0;
  for (const auto& a : mu) q += a.weight * a.v;
  return q;
}

void expect_self_contained(const ModelSpec& model, const ViolationWitness& w) {
  for (const auto* inst : {w.negative ? &*w.negative : nullptr, w.positive ? &*w.positive : nullptr}) {
    if (inst) {
      EXPECT_NEAR(recompute(model, w.kind, *inst), inst->value, 1e-12);
    }
  }
}

}  // namespace

TEST(LasryLionsValue, QuadraticXVDiracProducts) {
  const auto model = ModelSpec::quadratic_xv(1);
  auto value = [&](double x1, double x2, double v1, double v2) {
    return lasry_lions_value(model, {{x1, v1, 1.0}}, {{x2, v2, 1.0}});
  };
  EXPECT_NEAR(value(1, 0, 1, 0), 1.0, 1e-14);
  EXPECT_NEAR(value(1, 0, 0, 1), -1.0, 1e-14);
  EXPECT_NEAR(value(2.5, -1, 0.3, 0.7), (2.5 + 1) * (0.3 - 0.7), 1e-13);
}

TEST(LasryLionsValue, CournotMatchesDirectSum) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const oracle::Cournot ref{-0.5, 1.0};
  const std::vector<Atom> mu1{{0, 0.4, 0.7}, {0, 6.0, 0.3}};
  const std::vector<Atom> mu2{{0, 2.1, 1.0}};
  const double Q1 = mean_control(mu1), Q2 = mean_control(mu2);
  double expected = 0.0;
  for (const auto& a : mu1) expected += a.weight * (ref.L(a.v, Q1) - ref.L(a.v, Q2));
  for (const auto& a : mu2) expected -= a.weight * (ref.L(a.v, Q1) - ref.L(a.v, Q2));
  EXPECT_NEAR(lasry_lions_value(model, mu1, mu2), expected, 1e-12);
}

TEST(DisplacementValue, CournotTwoAtomFormula) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const oracle::Cournot ref{-0.5, 1.0};
  const double lambda = 0.6, q1 = 0.5, qbar = 4.0, q2 = 1.3;
  const std::vector<CouplingAtom> coupling{{0, q1, 0, q2, lambda}, {0, qbar, 0, q2, 1 - lambda}};
  const double Q1 = lambda * q1 + (1 - lambda) * qbar, Q2 = q2;
  const double expected = lambda * (ref.Lq(q1, Q1) - ref.Lq(q2, Q2)) * (q1 - q2) +
                          (1 - lambda) * (ref.Lq(qbar, Q1) - ref.Lq(q2, Q2)) * (qbar - q2);
  EXPECT_NEAR(displacement_value(model, coupling), expected, 1e-12);
}

TEST(DisplacementValue, EqualMeansArePositive) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const std::vector<CouplingAtom> swapped{{0, 1.0, 0, 3.0, 0.5}, {0, 3.0, 0, 1.0, 0.5}};
  EXPECT_GT(displacement_value(model, swapped), 0.0);
}

TEST(LasryLionsSearch, CournotFindsBothSigns) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const auto w = find_lasry_lions_violation(model);
  ASSERT_TRUE(w.found);
  EXPECT_LT(w.negative->value, -1e-8);
  EXPECT_GT(w.positive->value, 1e-8);
  EXPECT_LE(w.evaluations, WitnessSearchOptions{}.budget);
  expect_self_contained(model, w);
  // Negative side uses the two-atom against one-atom shape.
  EXPECT_EQ(w.negative->mu1.size(), 2u);
  EXPECT_EQ(w.negative->mu2.size(), 1u);
  const auto& mu1 = w.negative->mu1;
  const double q2 = w.negative->mu2[0].v;
  EXPECT_LT(std::min(mu1[0].v, mu1[1].v), q2);
  EXPECT_GT(std::max(mu1[0].v, mu1[1].v), q2);
}

TEST(LasryLionsSearch, QuadraticXVAnalyticWitness) {
  const auto model = ModelSpec::quadratic_xv(1);
  const auto w = find_lasry_lions_violation(model);
  ASSERT_TRUE(w.found);
  EXPECT_NEAR(w.negative->value, -1.0, 1e-12);
  EXPECT_NEAR(w.positive->value, 1.0, 1e-12);
  expect_self_contained(model, w);
}

TEST(LasryLionsSearch, NoCouplingMeansNotFound) {
  const auto w = find_lasry_lions_violation(ModelSpec::cournot(1, -0.5, 0.0));
  EXPECT_FALSE(w.found);
}

TEST(DisplacementSearch, CournotFindsBothSigns) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const auto w = find_displacement_violation(model);
  ASSERT_TRUE(w.found);
  EXPECT_EQ(w.kind, WitnessKind::Displacement);
  EXPECT_LT(w.negative->value, -1e-8);
  EXPECT_GT(w.positive->value, 1e-8);
  expect_self_contained(model, w);
  EXPECT_TRUE(w.construction_best.has_value());
}

TEST(DisplacementSearch, CournotXReducesToCournot) {
  const auto model = ModelSpec::cournot_x(1, -0.5, 0.5, -1.0, 1.0);
  const auto w = find_displacement_violation(model);
  EXPECT_TRUE(w.found);
  expect_self_contained(model, w);
}

TEST(DisplacementSearch, QuadraticXVIsMonotone) {
  const auto model = ModelSpec::quadratic_xv(1);
  WitnessSearchOptions opts;
  opts.budget = 50000;
  const auto w = find_displacement_violation(model, opts);
  EXPECT_FALSE(w.found);
  EXPECT_FALSE(w.negative.has_value());
  EXPECT_LE(w.evaluations, opts.budget);
}

TEST(WitnessSearch, DeterministicGivenSeed) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0);
  const auto a = find_displacement_violation(model);
  const auto b = find_displacement_violation(model);
  EXPECT_EQ(a.negative->value, b.negative->value);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(WitnessSearch, RequiresScalarModels) {
  EXPECT_TRUE(testutil::throws_kind([] { find_lasry_lions_violation(ModelSpec::quadratic_xv(2)); },
                                    ErrorKind::InvalidArgument));
}
