#include "copabc/adjust/adjustments.hpp"
#include "copabc/core/rng.hpp"

#include <gtest/gtest.h>

using namespace copabc;

namespace {

WeightedSampleSet sample_from(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& s) {
  return WeightedSampleSet(theta, s);
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto ra = stable_ranks(std::span<const double>(a.data(), a.size()));
  const auto rb = stable_ranks(std::span<const double>(b.data(), b.size()));
  Eigen::VectorXd x(a.size()), y(b.size());
  for (Index i = 0; i < a.size(); ++i) x(i) = double(ra[i]), y(i) = double(rb[i]);
  return pearson_correlation(x, y);
}

}  // namespace

TEST(Regression, HandExample) {
  Eigen::MatrixXd theta(3, 1), s(3, 1);
  theta << 1, 2, 3;
  s << 1, 2, 3;
  RegressionFit fit;
  const auto out = regression_adjust(sample_from(theta, s), SummaryVector::Constant(1, 2.0), {0}, &fit);
  EXPECT_NEAR(fit.coefficients(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(fit.intercept(0), 2.0, 1e-12);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(out.params()(i, 0), 2.0, 1e-12);
}

TEST(Regression, ZeroRegressorLeavesParamsUnchanged) {
  Eigen::MatrixXd theta(5, 2), s = Eigen::MatrixXd::Constant(5, 2, 3.0);
  theta << 1, 5, 2, 4, 3, 3, 4, 2, 5, 1;
  ScopedWarningSink quiet;
  const auto out = regression_adjust(sample_from(theta, s), SummaryVector::Constant(2, 3.0), {0, 1});
  EXPECT_EQ(out.params(), theta);
}

TEST(Regression, ConstantThetaGivesZeroSlope) {
  SeededRng rng(1);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Constant(20, 1, 4.0), s(20, 2);
  for (Index i = 0; i < 20; ++i) s(i, 0) = rng.normal(), s(i, 1) = rng.normal();
  RegressionFit fit;
  const auto out = regression_adjust(sample_from(theta, s), SummaryVector::Zero(2), {0, 1}, &fit);
  EXPECT_LT(fit.coefficients.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.params().array() - 4.0).abs().maxCoeff(), 1e-12);
}

TEST(Regression, CollinearColumnDroppedWithWarning) {
  SeededRng rng(2);
  Eigen::MatrixXd theta(30, 1), s(30, 2);
  for (Index i = 0; i < 30; ++i) {
    s(i, 0) = rng.normal();
    s(i, 1) = 2.0 * s(i, 0);
    theta(i, 0) = 3.0 * s(i, 0) + 0.1 * rng.normal();
  }
  int warnings = 0;
  ScopedWarningSink sink([&](const std::string&) { ++warnings; });
  RegressionFit fit;
  regression_adjust(sample_from(theta, s), SummaryVector::Zero(2), {0, 1}, &fit);
  EXPECT_EQ(warnings, 1);
  EXPECT_EQ(fit.dropped.size(), 1u);
  // the surviving column carries the whole slope
  const double slope = fit.coefficients(0, 0) + 2.0 * fit.coefficients(1, 0);
  EXPECT_NEAR(slope, 3.0, 0.05);
}

TEST(Regression, TooFewRows) {
  Eigen::MatrixXd theta(3, 1), s(3, 2);
  theta << 1, 2, 3;
  s << 1, 0, 2, 1, 3, 5;
  EXPECT_THROW(regression_adjust(sample_from(theta, s), SummaryVector::Zero(2), {0, 1}), std::invalid_argument);
}

TEST(Regression, WeightedMeanIdentityAndIdempotence) {
  SeededRng rng(3);
  const Index n = 200;
  Eigen::MatrixXd theta(n, 2), s(n, 3);
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < 3; ++k) s(i, k) = rng.normal();
    theta(i, 0) = 1.0 + 2.0 * s(i, 0) - s(i, 2) + 0.3 * rng.normal();
    theta(i, 1) = -2.0 + 0.5 * s(i, 1) + 0.3 * rng.normal();
    w(i) = rng.uniform();
  }
  const WeightedSampleSet in(theta, s, w);
  const SummaryVector s_obs = Eigen::Vector3d(0.1, -0.2, 0.3);
  RegressionFit fit;
  const auto out = regression_adjust(in, s_obs, {0, 1, 2}, &fit);
  const Eigen::RowVectorXd wmean = out.weights().transpose() * out.params();
  const Eigen::RowVectorXd resid_mean = out.weights().transpose() * fit.residuals;
  EXPECT_LT((wmean - fit.intercept.transpose() - resid_mean).cwiseAbs().maxCoeff(), 1e-10);
  RegressionFit second;
  const auto again = regression_adjust(out, s_obs, {0, 1, 2}, &second);
  EXPECT_LT(second.coefficients.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((again.params() - out.params()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Regression, RecoversKnownSlopesUnderWeights) {
  SeededRng rng(4);
  const Index n = 500;
  Eigen::MatrixXd theta(n, 1), s(n, 2);
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    s(i, 0) = rng.normal();
    s(i, 1) = rng.normal();
    theta(i, 0) = 0.5 + 1.5 * (s(i, 0) - 1.0) - 0.7 * (s(i, 1) + 1.0);
    w(i) = 0.1 + rng.uniform();
  }
  RegressionFit fit;
  regression_adjust(WeightedSampleSet(theta, s, w), Eigen::Vector2d(1.0, -1.0), {0, 1}, &fit);
  EXPECT_NEAR(fit.coefficients(0, 0), 1.5, 1e-10);
  EXPECT_NEAR(fit.coefficients(1, 0), -0.7, 1e-10);
  EXPECT_NEAR(fit.intercept(0), 0.5, 1e-10);
}

TEST(MarginalAdjust, HandExample) {
  Eigen::MatrixXd theta(3, 1);
  theta << 0.3, 0.1, 0.2;
  std::vector<double> sample{5, 6, 7};
  std::vector<MarginalEstimate> m{MarginalEstimate(sample)};
  const auto out = marginal_adjust(WeightedSampleSet(theta, Eigen::MatrixXd(3, 0)), m);
  EXPECT_DOUBLE_EQ(out.params()(0, 0), 7.0);
  EXPECT_DOUBLE_EQ(out.params()(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(out.params()(2, 0), 6.0);
}

TEST(MarginalAdjust, SelfAdjustmentIsIdentity) {
  SeededRng rng(5);
  const Index n = 300;
  Eigen::MatrixXd theta(n, 1);
  for (Index i = 0; i < n; ++i) theta(i, 0) = rng.normal();
  std::vector<MarginalEstimate> m{MarginalEstimate(std::span<const double>(theta.data(), n))};
  const auto out = marginal_adjust(WeightedSampleSet(theta, Eigen::MatrixXd(n, 0)), m);
  EXPECT_LT((out.params() - theta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MarginalAdjust, RankPreservationOnRandomInstances) {
  SeededRng rng(6);
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = 10 + static_cast<Index>(rng.next_u64() % 200);
    const Index p = 1 + static_cast<Index>(rng.next_u64() % 3);
    Eigen::MatrixXd theta(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < p; ++k) theta(i, k) = rng.normal(0, 1 + k);
    std::vector<MarginalEstimate> ms;
    for (Index k = 0; k < p; ++k) {
      std::vector<double> v(static_cast<std::size_t>(n / 2 + 5));
      for (double& x : v) x = rng.gamma(2.0, 1.0 + k);
      ms.emplace_back(v);
    }
    const auto out = marginal_adjust(WeightedSampleSet(theta, Eigen::MatrixXd(n, 0)), ms);
    for (Index k = 0; k < p; ++k) {
      const auto r_in = stable_ranks(std::span<const double>(theta.col(k).data(), n));
      const Eigen::VectorXd col = out.params().col(k);
      // order statistic r of the output is the marginal quantile at r/(n+1)
      for (Index i = 0; i < n; ++i) {
        const double expected = ms[k].quantile(double(r_in[i]) / double(n + 1));
        ASSERT_DOUBLE_EQ(col(i), expected);
      }
      ASSERT_NEAR(spearman(theta.col(k), col), 1.0, 1e-12);
    }
  }
}

TEST(MarginalAdjust, Errors) {
  Eigen::MatrixXd theta(3, 2);
  theta.setRandom();
  std::vector<double> v{1, 2, 3};
  std::vector<MarginalEstimate> one{MarginalEstimate(v)};
  EXPECT_THROW(marginal_adjust(WeightedSampleSet(theta, Eigen::MatrixXd(3, 0)), one), std::invalid_argument);
  std::vector<MarginalEstimate> two{MarginalEstimate(v), MarginalEstimate(v)};
  EXPECT_THROW(marginal_adjust(WeightedSampleSet(theta, Eigen::MatrixXd(3, 0), Eigen::Vector3d(1, 2, 3)), two),
               std::invalid_argument);
}
