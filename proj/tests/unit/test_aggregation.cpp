#include "mfgc/aggregation.hpp"
#include "mfgc/parallel.hpp"
#include "mfgc/serialize.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mfgc;
using testutil::throws_kind;
using testutil::vec1;

TEST(Ensemble, ValidatesWeights) {
  Mat pts(1, 2);
  pts << 0.0, 1.0;
  Vec w(2);
  w << 0.7, 0.2;
  EXPECT_TRUE(throws_kind([&] { ParticleEnsemble(pts, w); }, ErrorKind::InvalidArgument));
  w << 1.2, -0.2;
  EXPECT_TRUE(throws_kind([&] { ParticleEnsemble(pts, w); }, ErrorKind::InvalidArgument));
  w << 0.25, 0.75;
  EXPECT_NEAR(ParticleEnsemble(pts, w).mean()[0], 0.75, 1e-15);
}

TEST(Ensemble, GaussianIsSeededAndNormalised) {
  Mat cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  Vec mean(2);
  mean << 2.0, -1.0;
  const auto a = ParticleEnsemble::gaussian(mean, cov, 4000, 17);
  const auto b = ParticleEnsemble::gaussian(mean, cov, 4000, 17);
  const auto c = ParticleEnsemble::gaussian(mean, cov, 4000, 18);
  EXPECT_EQ(a.points(), b.points());
  EXPECT_NE(a.points(), c.points());
  EXPECT_NEAR(a.weights().sum(), 1.0, 1e-12);
  EXPECT_LT((a.mean() - mean).norm(), 0.08);
  const Mat centred = a.points().colwise() - a.mean();
  const Mat sample_cov = centred * centred.transpose() / a.size();
  EXPECT_LT((sample_cov - cov).cwiseAbs().maxCoeff(), 0.08);
  EXPECT_EQ(a.provenance(), ParticleEnsemble::Provenance::Gaussian);
}

TEST(Ensemble, GridUsesCellMidpoints) {
  const auto g = ParticleEnsemble::uniform_grid(vec1(0.0), vec1(1.0), 4);
  ASSERT_EQ(g.size(), 4);
  EXPECT_DOUBLE_EQ(g.point(0)[0], 0.125);
  EXPECT_DOUBLE_EQ(g.point(3)[0], 0.875);
  EXPECT_DOUBLE_EQ(g.weight(2), 0.25);
  Vec lo(2), hi(2);
  lo << 0, 0;
  hi << 1, 2;
  EXPECT_EQ(ParticleEnsemble::uniform_grid(lo, hi, 3).size(), 9);
}

TEST(Ensemble, CsvRoundTripIsExact) {
  Mat pts(2, 3);
  pts << 0.1, 1.0 / 3.0, -2.5e-7, 4.0, 5.5, 1e10;
  Vec w(3);
  w << 0.2, 0.3, 0.5;
  const ParticleEnsemble e(pts, w);
  std::ostringstream first;
  e.write_csv(first);
  EXPECT_EQ(first.str().substr(0, 17), "x_1,x_2,weight\r\n0");
  std::istringstream in(first.str());
  const auto back = ParticleEnsemble::read_csv(in);
  EXPECT_EQ(back.points(), e.points());
  EXPECT_EQ(back.weights(), e.weights());
  std::ostringstream second;
  back.write_csv(second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Ensemble, CsvRejectsMalformedInput) {
  std::istringstream no_weight("x_1\n0.5\n");
  EXPECT_TRUE(throws_kind([&] { ParticleEnsemble::read_csv(no_weight); }, ErrorKind::Io));
  std::istringstream bad_number("x_1,weight\nabc,1\n");
  EXPECT_TRUE(throws_kind([&] { ParticleEnsemble::read_csv(bad_number); }, ErrorKind::Io));
  std::istringstream quoted("\"x_1\",\"weight\"\r\n\"0.5\",1\r\n");
  EXPECT_DOUBLE_EQ(ParticleEnsemble::read_csv(quoted).point(0)[0], 0.5);
}

TEST(ErrorMap, MatchesSeparableOracle) {
  const oracle::Separable ref{0.5, 1.0, 0.0, 1.0, 1.0};
  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(
      TerminalCost::quadratic(Mat::Identity(1, 1), Vec::Zero(1)));
  Mat pts(1, 3);
  pts << -1.0, 0.5, 2.0;
  Vec w(3);
  w << 0.2, 0.5, 0.3;
  const ParticleEnsemble m0(pts, w);
  const TimeGrid grid(1.0, 40);
  const double Q = 0.3;
  const auto E = error_map(model, m0, ControlPath::constant(grid, vec1(Q)));
  double expected = Q;
  for (int i = 0; i < 3; ++i) expected -= w[i] * ref.control(pts(0, i), Q);
  for (int k = 0; k < grid.nodes(); k += 13) EXPECT_NEAR(E.at(k)[0], expected, 1e-10);
  EXPECT_NEAR(E.l2_norm(), std::abs(expected), 1e-10);
}

TEST(ErrorMap, ZeroAtClosedFormEquilibrium) {
  const auto model = ModelSpec::separable_shifted(1, 0.5).with_terminal(
      TerminalCost::quadratic(Mat::Identity(1, 1), Vec::Zero(1)));
  const TimeGrid grid(1.0, 10);
  const auto E = error_map(model, ParticleEnsemble::dirac(vec1(1.0)),
                           ControlPath::constant(grid, vec1(0.4)));
  EXPECT_LT(E.l2_norm(), 1e-12);
}

TEST(ErrorMap, ParticleFailuresCarryIndex) {
  const auto model = ModelSpec::quadratic_xv(1);
  Mat pts(2, 1);
  pts << 0.0, 1.0;
  const ParticleEnsemble wrong_dim(pts, Vec::Ones(1));
  EXPECT_TRUE(throws_kind(
      [&] { error_map(model, wrong_dim, ControlPath::zero(TimeGrid(1.0, 5), 1)); },
      ErrorKind::InvalidArgument));
}

TEST(ErrorMap, IndependentOfThreadCount) {
  const auto model = ModelSpec::cournot(1, -0.5, 1.0).with_terminal(
      TerminalCost::quadratic(Mat::Identity(1, 1), Vec::Zero(1)));
  const auto m0 = ParticleEnsemble::gaussian(vec1(2.0), Mat::Constant(1, 1, 0.25), 32, 3);
  const TimeGrid grid(1.0, 30);
  const auto Q = ControlPath::constant(grid, vec1(0.5));
  set_thread_count(1);
  const auto serial = error_map(model, m0, Q);
  set_thread_count(4);
  const auto threaded = error_map(model, m0, Q);
  set_thread_count(0);
  EXPECT_EQ(serial.values(), threaded.values());
}

TEST(Pairing, InnerProductAndGridCheck) {
  const TimeGrid grid(2.0, 4);
  const auto q1 = ControlPath::constant(grid, vec1(1.0));
  const auto q0 = ControlPath::zero(grid, 1);
  const ErrorPath e1(grid, Mat::Constant(1, 5, 3.0));
  const ErrorPath e0(grid, Mat::Zero(1, 5));
  const auto p = pairing(e1, e0, q1, q0);
  EXPECT_DOUBLE_EQ(p.inner, 6.0);
  EXPECT_DOUBLE_EQ(p.gap_sq, 2.0);
  const ErrorPath other(TimeGrid(2.0, 5), Mat::Zero(1, 6));
  EXPECT_TRUE(throws_kind([&] { pairing(other, e0, q1, q0); }, ErrorKind::GridMismatch));
}

TEST(Serialize, PathCsvHasHeaderAndRoundTripDigits) {
  const TimeGrid grid(1.0, 2);
  Mat values(2, 3);
  values << 0.1, 0.2, 1.0 / 3.0, 1.0, 2.0, 3.0;
  std::ostringstream out;
  write_path_csv(out, ControlPath(grid, values), "Q");
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, 12), "t,Q_1,Q_2\r\n0");
  EXPECT_NE(text.find("0.3333333333333333"), std::string::npos);
  EXPECT_EQ(format_double(0.1), "0.1");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e-300, -123456.789, 0.1 + 0.2}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}
