#include "copabc/abc/reference_table.hpp"
#include "copabc/copula/normal_scores.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/models/gk.hpp"
#include "copabc/models/gk_pipeline.hpp"
#include "copabc/models/twisted_normal.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace copabc;

namespace {

// F(x) for a g-and-k margin by bisection on z in Q(Phi(z)) = x.
double gk_cdf(double x, const GkParams& p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gk_transform(mid, p) < x ? lo : hi) = mid;
  }
  return normal_cdf(0.5 * (lo + hi));
}

double ks_statistic(std::vector<double> x, const GkParams& p) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = gk_cdf(x[i], p);
    d = std::max({d, std::abs(double(i + 1) / n - f), std::abs(f - double(i) / n)});
  }
  return d;
}

std::vector<double> column(const Eigen::MatrixXd& m, Index c) { return {m.col(c).data(), m.col(c).data() + m.rows()}; }

}  // namespace

// ---- twisted normal ----------------------------------------------------------

TEST(TwistedPrior, UntwistedVarianceOfFirstCoordinate) {
  const TwistedNormalModel m = TwistedNormalModel::make(3, 0.0);
  SeededRng rng(11);
  double s = 0, ss = 0;
  const int n = 100000;
  for (int r = 0; r < n; ++r) {
    const double t = twisted_prior_sample(m, rng)(0);
    s += t, ss += t * t;
  }
  const double mean = s / n;
  EXPECT_NEAR(ss / n - mean * mean, 100.0, 2.0);
}

TEST(TwistedPrior, SecondCoordinateHasZeroMean) {
  const TwistedNormalModel m = TwistedNormalModel::make(2, 0.1);
  SeededRng rng(12);
  double s = 0;
  const int n = 1000000;
  for (int r = 0; r < n; ++r) s += twisted_prior_sample(m, rng)(1);
  // sd of theta_2 is sqrt(1 + 2 b^2 100^2) ~ 14.2, so the MC se is 0.014
  EXPECT_NEAR(s / n, 0.0, 3.0 * std::sqrt(1.0 + 2.0 * 0.01 * 1e4) / std::sqrt(double(n)));
}

TEST(TwistedPrior, InverseTwistRestoresUnitVariance) {
  const TwistedNormalModel m = TwistedNormalModel::make(2, 0.1);
  SeededRng rng(13);
  double s = 0, ss = 0;
  const int n = 100000;
  for (int r = 0; r < n; ++r) {
    const ParameterVector t = twisted_prior_sample(m, rng);
    const double u = t(1) - m.b * t(0) * t(0) + 100.0 * m.b;
    s += u, ss += u * u;
  }
  EXPECT_NEAR(ss / n - (s / n) * (s / n), 1.0, 0.02);
}

TEST(TwistedPrior, ReproducibleForFixedSeed) {
  const TwistedNormalModel m = TwistedNormalModel::make(4);
  SeededRng a(5), b(5);
  for (int r = 0; r < 10; ++r) EXPECT_EQ(twisted_prior_sample(m, a), twisted_prior_sample(m, b));
}

TEST(TwistedPrior, LogDensityValues) {
  const TwistedNormalModel m = TwistedNormalModel::make(3, 0.1);
  EXPECT_DOUBLE_EQ(twisted_log_prior_density(m, Eigen::VectorXd::Zero(3)), -50.0);
  Eigen::VectorXd t(3);
  t << 4.0, -1.0, 0.5;
  Eigen::VectorXd tm = t;
  tm(0) = -4.0;
  EXPECT_DOUBLE_EQ(twisted_log_prior_density(m, t), twisted_log_prior_density(m, tm));
  const TwistedNormalModel flat = TwistedNormalModel::make(3, 0.0);
  EXPECT_NEAR(twisted_log_prior_density(flat, t), -16.0 / 200.0 - 0.5 - 0.125, 1e-14);
  EXPECT_THROW(twisted_log_prior_density(m, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(ToySimulate, NoiseCovarianceIsSigmaSquaredIdentity) {
  const TwistedNormalModel m = TwistedNormalModel::make(3, 0.1, 0.5);
  const ParameterVector theta = Eigen::Vector3d(1.0, -2.0, 3.0);
  SeededRng rng(14);
  Eigen::MatrixXd rows(100000, 3);
  for (Index r = 0; r < rows.rows(); ++r) rows.row(r) = toy_simulate(m, theta, rng).transpose();
  const Eigen::MatrixXd cov = sample_covariance(rows);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(cov(i, j), i == j ? 0.25 : 0.0, 0.005);
  EXPECT_NEAR(rows.col(1).mean(), -2.0, 0.01);
}

TEST(ToySimulate, DefaultSummaryMap) {
  const SummaryMap smap = toy_summary_map(4);
  EXPECT_EQ(smap.univariate(0), (IndexSet{0}));
  EXPECT_EQ(smap.univariate(1), (IndexSet{0, 1}));
  EXPECT_EQ(smap.univariate(3), (IndexSet{3}));
  EXPECT_EQ(smap.pairwise(1, 2), (IndexSet{0, 1, 2}));
}

// ---- g-and-k quantile ----------------------------------------------------------

TEST(GkQuantile, MedianIsLocation) {
  for (double g : {-1.0, 0.0, 2.0})
    for (double k : {-0.3, 0.0, 0.8}) EXPECT_DOUBLE_EQ(gk_quantile(0.5, GkParams{1.7, 0.4, g, k}), 1.7);
}

TEST(GkQuantile, NormalSpecialCase) {
  for (double q : {0.01, 0.2, 0.5, 0.9})
    EXPECT_NEAR(gk_quantile(q, GkParams{3.0, 2.0, 0.0, 0.0}), 3.0 + 2.0 * normal_quantile(q), 1e-12);
}

TEST(GkQuantile, MatchesFiftyDigitEvaluation) {
  using boost::multiprecision::cpp_dec_float_50;
  const cpp_dec_float_50 q("0.75"), g(2), k("0.5"), c("0.8");
  const cpp_dec_float_50 z = -boost::multiprecision::sqrt(cpp_dec_float_50(2)) * boost::math::erfc_inv(2 * q);
  const cpp_dec_float_50 e = boost::multiprecision::exp(-g * z);
  const cpp_dec_float_50 ref = (1 + c * (1 - e) / (1 + e)) * boost::multiprecision::pow(1 + z * z, k) * z;
  EXPECT_NEAR(gk_quantile(0.75, GkParams{0.0, 1.0, 2.0, 0.5}), ref.convert_to<double>(), 1e-14);
}

TEST(GkQuantile, LocationScaleEquivariance) {
  const GkParams unit{0.0, 1.0, 0.7, 0.3};
  const GkParams ls{-2.5, 3.5, 0.7, 0.3};
  for (double q = 0.005; q < 1.0; q += 0.01)
    EXPECT_NEAR(gk_quantile(q, ls), -2.5 + 3.5 * gk_quantile(q, unit), 1e-12);
}

// With c = 0.8 the quantile is increasing for k >= 0 or g = 0; negative k
// combined with skewness can fold the lower tail (e.g. g = 1, k = -0.2).
TEST(GkQuantile, StrictlyIncreasing) {
  for (const GkParams& p : {GkParams{0, 1, 3.0, 0.0}, GkParams{0, 0.01, -1, 0.5}, GkParams{1, 2, 0.3, 0.1},
                            GkParams{0, 1, 0.0, -0.4}}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < 10000; ++i) {
      const double v = gk_quantile(i / 10000.0, p);
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(GkQuantile, RejectsInvalidInput) {
  EXPECT_THROW(gk_quantile(0.0, GkParams{}), std::invalid_argument);
  EXPECT_THROW(gk_quantile(1.0, GkParams{}), std::invalid_argument);
  EXPECT_THROW(gk_quantile(0.5, GkParams{0, -1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(gk_quantile(0.5, GkParams{0, 1, 0, -0.5}), std::invalid_argument);
}

// ---- simulation ----------------------------------------------------------------

TEST(MultiGk, MarginsPassKolmogorovSmirnov) {
  MultiGkModel m;
  m.margins = {GkParams{0.0, 1.0, 0.8, 0.2}, GkParams{1.0, 0.5, -0.5, 0.0}};
  m.V = Eigen::Matrix2d{{1.0, 0.6}, {0.6, 1.0}};
  m.n = 10000;
  SeededRng rng(21);
  const Eigen::MatrixXd x = multigk_simulate(m, rng);
  EXPECT_LT(ks_statistic(column(x, 0), m.margins[0]), 0.02);
  EXPECT_LT(ks_statistic(column(x, 1), m.margins[1]), 0.02);
}

TEST(MultiGk, SingleMarginIsUnivariateGk) {
  MultiGkModel m;
  m.margins = {GkParams{0.0, 2.0, 1.0, 0.1}};
  m.V = Eigen::MatrixXd::Identity(1, 1);
  m.n = 10000;
  SeededRng rng(22);
  EXPECT_LT(ks_statistic(column(multigk_simulate(m, rng), 0), m.margins[0]), 0.02);
}

TEST(MultiGk, NormalMarginsReproduceV) {
  MultiGkModel m;
  m.margins.assign(3, GkParams{0.0, 1.0, 0.0, 0.0});
  m.V = Eigen::Matrix3d{{1.0, 0.5, -0.3}, {0.5, 1.0, 0.2}, {-0.3, 0.2, 1.0}};
  m.n = 10000;
  SeededRng rng(23);
  const Eigen::MatrixXd x = multigk_simulate(m, rng);
  for (Index i = 0; i < 3; ++i)
    for (Index j = i + 1; j < 3; ++j) {
      EXPECT_NEAR(pearson_correlation(x.col(i), x.col(j)), m.V(i, j), 0.03);
      EXPECT_NEAR(normal_scores_correlation(x.col(i), x.col(j)), m.V(i, j), 0.03);
    }
}

TEST(MultiGk, NormalScoresCorrelationSurvivesSkewedMargins) {
  MultiGkModel m;
  m.margins = {GkParams{0.0, 1.0, 2.0, 0.5}, GkParams{0.0, 0.1, -1.0, 0.3}};
  m.V = Eigen::Matrix2d{{1.0, -0.6}, {-0.6, 1.0}};
  m.n = 10000;
  SeededRng rng(24);
  const Eigen::MatrixXd x = multigk_simulate(m, rng);
  EXPECT_NEAR(normal_scores_correlation(x.col(0), x.col(1)), -0.6, 0.03);
}

TEST(MultiGk, RejectsIndefiniteV) {
  MultiGkModel m;
  m.margins.assign(3, GkParams{});
  m.V = Eigen::Matrix3d{{1.0, 0.9, 0.9}, {0.9, 1.0, -0.9}, {0.9, -0.9, 1.0}};
  m.n = 20;
  SeededRng rng(1);
  EXPECT_THROW(multigk_simulate(m, rng), numerical_error);
}

TEST(MultiGk, NormalReductionMoments) {
  MultiGkModel m;
  m.margins = {GkParams{3.0, 2.0, 0.0, 0.0}};
  m.V = Eigen::MatrixXd::Identity(1, 1);
  m.n = 100000;
  SeededRng rng(25);
  const Eigen::VectorXd x = multigk_simulate(m, rng).col(0);
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / double(x.size() - 1));
  EXPECT_NEAR(mean, 3.0, 0.02);
  EXPECT_NEAR(sd, 2.0, 0.02);
}

// ---- summaries -------------------------------------------------------------------

TEST(GkSummaries, HandExampleOneToEight) {
  // ceil rule at n = 8: L = x(2), x(4), x(6); E1, E3, E5, E7 = x(1), x(3), x(5), x(7)
  const std::vector<double> x{5, 3, 8, 1, 7, 2, 6, 4};
  const GkSummaries s = gk_summaries(x);
  EXPECT_DOUBLE_EQ(s.S_A, 4.0);
  EXPECT_DOUBLE_EQ(s.S_B, 4.0);
  EXPECT_DOUBLE_EQ(s.S_g, 0.0);
  EXPECT_DOUBLE_EQ(s.S_k, 1.0);
}

TEST(GkSummaries, MirrorSampleHasZeroSkewness) {
  SeededRng rng(31);
  std::vector<double> x{2.0};  // centre of symmetry; odd n keeps the ceil-rule quantiles paired
  for (int i = 0; i < 500; ++i) {
    const double d = std::abs(rng.normal()) + 1e-3;
    x.push_back(2.0 + d);
    x.push_back(2.0 - d);
  }
  EXPECT_EQ(gk_summaries(x).S_g, 0.0);
}

TEST(GkSummaries, StandardNormalQuartiles) {
  SeededRng rng(32);
  std::vector<double> x(200000);
  for (double& v : x) v = rng.normal();
  const GkSummaries s = gk_summaries(x);
  EXPECT_NEAR(s.S_A, 0.0, 0.01);
  EXPECT_NEAR(s.S_B, 2.0 * 0.6744897501960817, 0.01);
}

TEST(GkSummaries, Errors) {
  EXPECT_THROW(gk_summaries(std::vector<double>(7, 1.0)), std::invalid_argument);
  EXPECT_THROW(gk_summaries(std::vector<double>(20, 1.0)), numerical_error);
}

TEST(GkSummaries, NormalScoresInvariances) {
  SeededRng rng(33);
  Eigen::VectorXd a(500);
  for (Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  EXPECT_NEAR(normal_scores_correlation(a, a), 1.0, 1e-12);
  EXPECT_NEAR(normal_scores_correlation(a, a.array().exp().matrix()), 1.0, 1e-12);
}

TEST(GkSummaries, FastCorrelationEqualsPairwiseLambda) {
  MultiGkModel m;
  m.margins = {GkParams{0.0, 1.0, 0.5, 0.1}, GkParams{0.0, 1.0, -0.5, 0.2}, GkParams{0.0, 1.0, 0.0, 0.0}};
  m.V = Eigen::Matrix3d{{1.0, 0.4, 0.1}, {0.4, 1.0, -0.2}, {0.1, -0.2, 1.0}};
  m.n = 1757;
  SeededRng rng(34);
  const Eigen::MatrixXd x = multigk_simulate(m, rng);
  const SummaryVector s = multigk_summaries(x);
  ASSERT_EQ(s.size(), 15);
  EXPECT_NEAR(s(12), pairwise_lambda(x.col(0), x.col(1)), 1e-12);
  EXPECT_NEAR(s(13), pairwise_lambda(x.col(0), x.col(2)), 1e-12);
  EXPECT_NEAR(s(14), pairwise_lambda(x.col(1), x.col(2)), 1e-12);
  const GkSummaries g1 = gk_summaries(column(x, 1));
  EXPECT_EQ(s(4), g1.S_A);
  EXPECT_EQ(s(7), g1.S_k);
}

TEST(GkSummaries, TiesFallBackToRankAveraging) {
  Eigen::MatrixXd x(12, 2);
  for (Index r = 0; r < 12; ++r) {
    x(r, 0) = double(r % 6);
    x(r, 1) = double(r) + 0.5 * double(r % 3);
  }
  const SummaryVector s = multigk_summaries(x);
  EXPECT_NEAR(s(8), pairwise_lambda(x.col(0), x.col(1)), 1e-12);
}

// ---- Wishart -------------------------------------------------------------------

TEST(Wishart, UnitDiagonalAndPositiveDefinite) {
  SeededRng rng(41);
  for (int r = 0; r < 200; ++r) {
    const Eigen::MatrixXd v = wishart_correlation_sample(16, rng);
    for (Index i = 0; i < 16; ++i) EXPECT_EQ(v(i, i), 1.0);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(v).info(), Eigen::Success);
    EXPECT_TRUE(v.isApprox(v.transpose(), 0.0));
  }
}

TEST(Wishart, BivariateOffDiagonalIsCentred) {
  SeededRng rng(42);
  double s = 0.0;
  for (int r = 0; r < 10000; ++r) s += wishart_correlation_sample(2, rng)(0, 1);
  EXPECT_NEAR(s / 10000.0, 0.0, 0.02);
}

// ---- layout and model ------------------------------------------------------------

TEST(GkLayout, ParameterCounts) {
  EXPECT_EQ(gk_param_count(3), 15u);
  EXPECT_EQ(gk_param_count(10), 85u);
  EXPECT_EQ(gk_param_count(16), 184u);
  EXPECT_EQ(gk_margins_from_param_count(184), 16u);
  EXPECT_THROW(gk_margins_from_param_count(16), std::invalid_argument);
}

TEST(GkLayout, PackUnpackRoundTrip) {
  MultiGkModel m;
  m.margins = {GkParams{0.1, 0.2, 0.3, 0.4}, GkParams{0.5, 0.6, 0.7, 0.8}, GkParams{0.9, 1.0, 1.1, 1.2}};
  m.V = Eigen::Matrix3d{{1.0, 0.1, 0.2}, {0.1, 1.0, 0.3}, {0.2, 0.3, 1.0}};
  const ParameterVector t = gk_pack(m);
  EXPECT_EQ(t(12), 0.1);
  EXPECT_EQ(t(13), 0.2);
  EXPECT_EQ(t(14), 0.3);
  const MultiGkModel back = gk_unpack(t, 3, m.n);
  EXPECT_EQ(back.V, m.V);
  EXPECT_EQ(back.margins[2].k, 1.2);
  EXPECT_EQ(gk_param_name(3, 5), "B2");
  EXPECT_EQ(gk_param_name(3, 13), "nu1_3");
}

TEST(GkLayout, SummaryMap) {
  const SummaryMap smap = gk_summary_map(3);
  EXPECT_EQ(smap.univariate(0), (IndexSet{0}));
  EXPECT_EQ(smap.univariate(1), (IndexSet{1, 3}));
  EXPECT_EQ(smap.univariate(6), (IndexSet{6}));
  EXPECT_EQ(smap.univariate(14), (IndexSet{14}));
  EXPECT_EQ(smap.pairwise(1, 3), (IndexSet{1, 3}));
  EXPECT_EQ(smap.pairwise(5, 12), (IndexSet{5, 7, 12}));
}

TEST(GkModel, PriorDrawsStayInBox) {
  const SimulatorModel sm = gk_simulator_model(3, 100);
  SeededRng rng(51);
  for (int r = 0; r < 1000; ++r) {
    const ParameterVector t = sm.sample_prior(rng);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GT(t(Index(4 * i + 1)), 0.0);
      EXPECT_LT(t(Index(4 * i + 1)), 0.05);
      EXPECT_GT(t(Index(4 * i + 3)), -0.2);
      EXPECT_LT(t(Index(4 * i + 3)), 0.5);
    }
    EXPECT_NO_THROW(gk_unpack(t, 3, 100).validate());
  }
}

TEST(GkModel, ReferenceTableIsDeterministic) {
  const SimulatorModel sm = gk_simulator_model(2, 200);
  const ReferenceTable a = build_reference_table(sm, 50, 9, 1);
  const ReferenceTable b = build_reference_table(sm, 50, 9, 1);
  EXPECT_EQ(a.summaries(), b.summaries());
  EXPECT_EQ(a.summary_dim(), 9);
  EXPECT_TRUE((a.ratios().array() == 1.0).all());
}

TEST(GkPipeline, ValidThetaRepairsPilotMeans) {
  ParameterVector t = Eigen::VectorXd::Zero(15);
  t(1) = -0.01;
  t(3) = -0.7;
  t(12) = 0.99, t(13) = 0.99, t(14) = -0.99;
  RepairLog log;
  const ParameterVector v = gk_valid_theta(t, 3, GkBox{}, &log);
  EXPECT_GT(v(1), 0.0);
  EXPECT_GT(v(3), -0.5);
  EXPECT_NO_THROW(gk_unpack(v, 3, 10).validate());
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(gk_unpack(v, 3, 10).V).info(), Eigen::Success);
}

TEST(GkPipeline, BoxPriorIsFlatInsideAndZeroOutside) {
  const auto lp = gk_box_log_prior(2, {1, 3});
  EXPECT_NEAR(lp(Eigen::Vector2d(0.01, 0.1)), -std::log(0.05) - std::log(0.7), 1e-12);
  EXPECT_EQ(lp(Eigen::Vector2d(0.01, 0.6)), -std::numeric_limits<double>::infinity());
}

TEST(GkPipeline, SmallEndToEndRecoversScale) {
  const std::size_t q = 2;
  const Index n = 500;
  const ReferenceTable table = build_reference_table(gk_simulator_model(q, n), 20000, 3);
  const MultiGkModel truth = GkTruth{}.model(q, n);
  SeededRng rng(61);
  const SummaryVector s_obs = multigk_summaries(multigk_simulate(truth, rng));
  GkPipelineOptions opts;
  opts.quantile = 0.02;
  opts.scale_draws = 500;
  const GkPilot pilot = gk_pilot(table, s_obs, q, n, opts);
  EXPECT_NEAR(pilot.theta0(1), truth.margins[0].B, 0.005);
  ASSERT_EQ(pilot.sigma0.rows(), 9);
  const MleResult mle = gk_subset_mle(table, s_obs, q, n, {1, 3}, opts);
  ASSERT_TRUE(mle.hessian_ok);
  EXPECT_NEAR(mle.estimate(0), truth.margins[0].B, 4.0 * mle.se(0));
  EXPECT_NEAR(mle.estimate(1), truth.margins[0].k, 4.0 * mle.se(1));
}
