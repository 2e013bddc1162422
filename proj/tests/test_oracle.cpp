#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "nmvm/oracle.hpp"
#include "support/oracles.hpp"

using namespace nmvm;

namespace {

MultivariateNMVM gaussian2() {
  Eigen::Matrix2d s;
  s << 1.0, 0.3, 0.3, 2.0;
  return MultivariateNMVM(Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d::Zero(), s, MixingModel::degenerate(1.0));
}

MultivariateNMVM gig3() {
  Eigen::Matrix3d s;
  s << 1.0, 0.2, 0.1, 0.2, 1.5, 0.3, 0.1, 0.3, 0.8;
  return MultivariateNMVM(Eigen::Vector3d(0.1, -0.2, 0.0), Eigen::Vector3d(0.3, 0.1, -0.1), s,
                          MixingModel::gig(1.0, 1.0, 1.0));
}

}  // namespace

TEST(Sampling, DeterministicAcrossThreadCounts) {
  const auto m = gig3();
  SampleOptions one{1000, 1}, many{1000, 4};
  const auto a = sample_nmvm(m, 10'000, 42, one);
  const auto b = sample_nmvm(m, 10'000, 42, many);
  const auto c = sample_nmvm(m, 10'000, 43, one);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.thetas, b.thetas);
  EXPECT_NE(a.draws, c.draws);
  EXPECT_EQ(a.aggregate, a.draws.rowwise().sum());
}

TEST(Sampling, RejectsEmptyRequest) {
  EXPECT_THROW(sample_nmvm(gig3(), 0, 1), Error);
}

TEST(Sampling, SemiDefiniteCovariance) {
  Eigen::Matrix2d s;
  s << 1.0, 1.0, 1.0, 1.0;
  const MultivariateNMVM m(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), s, MixingModel::degenerate(1.0));
  const auto b = sample_nmvm(m, 1000, 3);
  EXPECT_LT((b.draws.col(0) - b.draws.col(1)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(detail::psd_cholesky(bad), Error);
}

TEST(Sampling, GaussianMoments) {
  const auto m = gaussian2();
  const std::size_t n = 200'000;
  const auto b = sample_nmvm(m, n, 7);
  const Eigen::RowVectorXd mean = b.draws.colwise().mean();
  const Eigen::MatrixXd centred = b.draws.rowwise() - mean;
  const Eigen::MatrixXd cov = centred.transpose() * centred / double(n - 1);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT(std::fabs(mean(i) - m.mu()(i)), 4 * std::sqrt(m.sigma()(i, i) / n));
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((m.sigma()(i, i) * m.sigma()(j, j) + m.sigma()(i, j) * m.sigma()(i, j)) / n);
      EXPECT_LT(std::fabs(cov(i, j) - m.sigma()(i, j)), 4 * se);
    }
  }
}

TEST(Sampling, MixtureMean) {
  const auto m = gig3();
  const std::size_t n = 200'000;
  const auto b = sample_nmvm(m, n, 11);
  const double et = m.mixing().moment(1);
  const Eigen::VectorXd expected = m.mu() + et * m.gamma();
  const Eigen::RowVectorXd mean = b.draws.colwise().mean();
  const Eigen::MatrixXd centred = b.draws.rowwise() - mean;
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(centred.col(i).squaredNorm() / (n - 1) / n);
    EXPECT_LT(std::fabs(mean(i) - expected(i)), 4 * se) << i;
  }
  EXPECT_LT(std::fabs(b.thetas.mean() - et), 4 * std::sqrt(m.mixing().moment(2) - et * et) / std::sqrt(double(n)));
}

TEST(Sampling, WritesCsv) {
  const auto path = std::filesystem::temp_directory_path() / "nmvm_batch.csv";
  const auto b = sample_nmvm(gaussian2(), 5, 1);
  write_batch_csv(b, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x1,x2,theta");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 5);
  std::filesystem::remove(path);
}

TEST(Empirical, TailSelectionRule) {
  SampleBatch b;
  b.count = 100;
  b.draws = Eigen::MatrixXd(100, 1);
  for (int r = 0; r < 100; ++r) b.draws(r, 0) = double((r * 37) % 100);
  b.aggregate = b.draws.col(0);
  b.thetas = Eigen::VectorXd::Ones(100);
  const auto sel = select_tail(b, 0.95, 2);
  EXPECT_EQ(sel.threshold, 94.0);
  EXPECT_EQ(sel.rows.size(), 5u);
  EXPECT_EQ(sel.batch_rows.size(), 2u);
}

TEST(Empirical, GaussianTailMean) {
  const MultivariateNMVM m(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1),
                           MixingModel::degenerate(1.0));
  const auto b = sample_nmvm(m, 400'000, 5);
  const auto tm1 = empirical_tail_functional(b, 0.95, {Functional::TM, 1});
  EXPECT_LT(std::fabs(tm1.value - 2.0627128), 4 * tm1.std_error);
  const auto tcm1 = empirical_tail_functional(b, 0.95, {Functional::TCM, 1});
  EXPECT_NEAR(tcm1.value, 0.0, 1e-12);
}

TEST(Empirical, StandardErrorShrinks) {
  const auto m = gig3();
  const auto a = sample_nmvm(m, 100'000, 21);
  const auto b = sample_nmvm(m, 200'000, 22);
  const TailFunctional f{Functional::TM, 2};
  const double ratio = empirical_tail_functional(b, 0.95, f).std_error / empirical_tail_functional(a, 0.95, f).std_error;
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 0.95);
}

TEST(Empirical, CapitalsAddUp) {
  const auto m = gig3();
  const auto b = sample_nmvm(m, 50'000, 9);
  const auto sel = select_tail(b, 0.9);
  const double cte = empirical_tail_functional(b, sel, {Functional::TM, 1}).value;
  const double tv = empirical_tail_functional(b, sel, {Functional::TCM, 2}).value;
  const double t3 = empirical_tail_functional(b, sel, {Functional::TCM, 3}).value;
  double sc = 0, sv = 0, s3 = 0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    sc += empirical_tail_functional(b, sel, {Functional::CteAlloc, 1, i}).value;
    sv += empirical_tail_functional(b, sel, {Functional::TvAlloc, 2, i}).value;
    s3 += empirical_tail_functional(b, sel, {Functional::TcmAlloc, 3, i}).value;
  }
  EXPECT_NEAR(sc, cte, 1e-9 * std::fabs(cte));
  EXPECT_NEAR(sv, tv, 1e-9 * std::fabs(tv));
  EXPECT_NEAR(s3, t3, 1e-9 * std::max(1.0, std::fabs(t3)));
}

TEST(Empirical, EmptyTail) {
  SampleBatch b;
  b.count = 100;
  b.draws = Eigen::MatrixXd::Ones(100, 1);
  b.aggregate = b.draws.col(0);
  b.thetas = Eigen::VectorXd::Ones(100);
  try {
    empirical_tail_functional(b, 0.95, {Functional::TM, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTail);
  }
}

TEST(Empirical, SmallTailWarns) {
  const auto b = sample_nmvm(gaussian2(), 1000, 2);
  EXPECT_FALSE(empirical_tail_functional(b, 0.95, {Functional::TM, 1}).warning.empty());
}

TEST(Validation, AnalyticMatchesSimulation) {
  ValidationOptions opt;
  opt.warn = [](const std::string&) {};
  const auto r = validation_report(gig3(), {0.95}, 3, 300'000, 20240601, opt);
  EXPECT_EQ(r.rows.size(), 3u + 3u + 9u + 6u);
  for (const auto& row : r.rows) EXPECT_FALSE(row.flagged) << row.quantity << " z=" << row.z;
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.rows.front().quantity, "tm_1@0.95");
}

TEST(Validation, TamperedRowIsFlagged) {
  ValidationOptions opt;
  opt.warn = [](const std::string&) {};
  opt.tamper = [](ValidationRow& row) {
    if (row.quantity == "tm_2@0.95") row.analytic += 100 * row.std_error + 1;
  };
  const auto r = validation_report(gaussian2(), {0.95}, 2, 50'000, 1, opt);
  EXPECT_EQ(r.flagged, 1u);
  EXPECT_FALSE(r.passed());
}

TEST(Validation, AnalyticFunctionalDispatch) {
  const AllocationEngine e(gig3(), 0.95, 3);
  EXPECT_EQ(analytic_tail_functional(e, {Functional::TM, 2}), e.tails().tm(2));
  EXPECT_EQ(analytic_tail_functional(e, {Functional::TcmAlloc, 3, 1}), e.tcm(3).capitals(1));
  EXPECT_EQ(analytic_tail_functional(e, {Functional::CrossMoment, 2, 0, 2}), e.conditional_cross_moment(0, 2));
}
