#include "copabc/diagnostics/density_grids.hpp"
#include "copabc/diagnostics/kl_experiment.hpp"
#include "copabc/models/twisted_normal.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace copabc;

namespace {

GridDensity2D gaussian_grid(const GridSpec& g, double mx, double my) {
  Eigen::MatrixXd raw(g.nx, g.ny);
  const Eigen::VectorXd xs = g.xs(), ys = g.ys();
  for (Index a = 0; a < g.nx; ++a)
    for (Index b = 0; b < g.ny; ++b) raw(a, b) = normal_pdf(xs(a) - mx) * normal_pdf(ys(b) - my);
  return GridDensity2D::normalised(g, raw);
}

}  // namespace

TEST(Grid, TrapezoidExactForLinear) {
  GridSpec g{0, 2, -1, 1, 11, 21};
  Eigen::MatrixXd v(11, 21);
  for (Index a = 0; a < 11; ++a)
    for (Index b = 0; b < 21; ++b) v(a, b) = 1.0 + g.xs()(a) + 3 * g.ys()(b);
  EXPECT_NEAR(trapezoid_integral(g, v), 2 * 2 + 2 * 2, 1e-12);  // area 4, mean of x is 1
  GridSpec bad = g;
  bad.nx = 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Kde2d, MatchesAnalyticProductDensity) {
  SeededRng rng(1);
  const Index n = 100000;
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.normal(), y(i) = rng.normal();
  GridSpec g{-4, 4, -4, 4, 81, 81};
  const GridDensity2D kde = kde2d(x, y, g);
  const GridDensity2D truth = gaussian_grid(g, 0, 0);
  EXPECT_LT((kde.values - truth.values).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_NEAR(kde.integral(), 1.0, 1e-12);
  EXPECT_THROW(kde2d(x.head(5), y.head(5), g), std::invalid_argument);
}

TEST(KlGrid, ShiftedGaussians) {
  GridSpec g{-8, 9, -8, 8, 341, 321};
  const GridDensity2D p = gaussian_grid(g, 0, 0), q = gaussian_grid(g, 1, 0);
  EXPECT_NEAR(kl_grid(p, q), 0.5, 1e-4);
  EXPECT_NEAR(kl_grid(p, p), 0.0, 1e-14);
}

TEST(KlGrid, AsymmetricAndGridChecked) {
  GridSpec g{-8, 8, -8, 8, 201, 201};
  Eigen::MatrixXd a(201, 201), b(201, 201);
  const Eigen::VectorXd xs = g.xs(), ys = g.ys();
  for (Index i = 0; i < 201; ++i)
    for (Index j = 0; j < 201; ++j) {
      a(i, j) = normal_pdf(xs(i)) * normal_pdf(ys(j));
      b(i, j) = normal_pdf(xs(i) / 2) / 2 * normal_pdf(ys(j));
    }
  const auto p = GridDensity2D::normalised(g, a), q = GridDensity2D::normalised(g, b);
  // closed forms for N(0,1) vs N(0,4) in one coordinate
  const double kl_pq = std::log(2.0) + 1.0 / 8.0 - 0.5;
  const double kl_qp = -std::log(2.0) + 2.0 - 0.5;
  EXPECT_NEAR(kl_grid(p, q), kl_pq, 1e-3);
  EXPECT_NEAR(kl_grid(q, p), kl_qp, 5e-3);
  GridSpec other = g;
  other.x_max = 7;
  EXPECT_THROW(kl_grid(p, GridDensity2D::normalised(other, a)), std::invalid_argument);
}

TEST(ToyTruth, ConjugatePairIsProductOfNormals) {
  auto model = TwistedNormalModel::make(4);
  model.y_obs(2) = 1.0;
  model.y_obs(3) = -2.0;
  const GridSpec g = toy_truth_grid_spec(model, 2, 3, 121);
  const GridDensity2D t = toy_posterior_grid(model, 2, 3, g);
  // N(y_j/2, 1/2) each
  const double sd = std::sqrt(0.5);
  Eigen::MatrixXd raw(121, 121);
  for (Index a = 0; a < 121; ++a)
    for (Index b = 0; b < 121; ++b)
      raw(a, b) = normal_pdf((g.xs()(a) - 0.5) / sd) * normal_pdf((g.ys()(b) + 1.0) / sd);
  const auto expected = GridDensity2D::normalised(g, raw);
  EXPECT_LT((t.values - expected.values).cwiseAbs().maxCoeff(), 1e-10);
  const auto [m3, s3] = toy_posterior_moments(model, 3);
  EXPECT_DOUBLE_EQ(m3, -1.0);
  EXPECT_DOUBLE_EQ(s3, sd);
}

TEST(ToyTruth, MarginalMomentsAgreeWithTwoDimensionalGrid) {
  const auto model = TwistedNormalModel::make(2);
  const GridSpec g = toy_truth_grid_spec(model, 0, 1, 400, 8.0);
  const GridDensity2D t = toy_posterior_grid(model, 0, 1, g);
  const Eigen::VectorXd xs = g.xs(), ys = g.ys();
  Eigen::MatrixXd fx(g.nx, g.ny), fy(g.nx, g.ny);
  for (Index a = 0; a < g.nx; ++a)
    for (Index b = 0; b < g.ny; ++b) fx(a, b) = xs(a) * t.values(a, b), fy(a, b) = ys(b) * t.values(a, b);
  const auto [m1, s1] = toy_posterior_moments(model, 0);
  const auto [m2, s2] = toy_posterior_moments(model, 1);
  EXPECT_NEAR(trapezoid_integral(g, fx), m1, 1e-3 * s1);
  EXPECT_NEAR(trapezoid_integral(g, fy), m2, 1e-3 * s2);
  // banana: theta_2 is positively associated with theta_1 near theta_1 = 10
  Eigen::MatrixXd fxy(g.nx, g.ny);
  for (Index a = 0; a < g.nx; ++a)
    for (Index b = 0; b < g.ny; ++b) fxy(a, b) = (xs(a) - m1) * (ys(b) - m2) * t.values(a, b);
  EXPECT_GT(trapezoid_integral(g, fxy), 0.0);
}

TEST(ToyTruth, MatchesHighVolumeAbcMoments) {
  // rejection on all summaries with a small tolerance approximates the posterior
  const auto model = TwistedNormalModel::make(2);
  const ReferenceTable t = build_reference_table(toy_simulator_model(model), 1000000, 5);
  const WeightedSampleSet s = abc_select(t, model.y_obs, {0, 1}, 0.002, DistanceSpec::euclidean());
  const auto [m1, s1] = toy_posterior_moments(model, 0);
  const auto [m2, s2] = toy_posterior_moments(model, 1);
  EXPECT_NEAR(s.params().col(0).mean(), m1, 0.1 * s1);
  EXPECT_NEAR(s.params().col(1).mean(), m2, 0.1 * s2);
}

TEST(KlExperiment, SmallRunIsDeterministicAndFinite) {
  const auto model = TwistedNormalModel::make(3);
  KlExperimentOptions opts;
  opts.N = 20000;
  opts.replicates = 2;
  opts.quantile = 0.05;
  opts.grid_nodes = 60;
  const std::vector<KlMethod> methods(kAllKlMethods.begin(), kAllKlMethods.end());
  const KlExperimentResult a = replicate_kl_experiment(model, methods, opts);
  opts.threads = 2;
  const KlExperimentResult b = replicate_kl_experiment(model, methods, opts);
  ASSERT_EQ(a.summaries.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_TRUE(std::isfinite(a.summaries[k].mean));
    EXPECT_GE(a.summaries[k].mean, 0.0);
    EXPECT_EQ(a.summaries[k].values, b.summaries[k].values);
  }
  EXPECT_EQ(parse_kl_method("regression+marg"), KlMethod::regression_marginal);
  EXPECT_FALSE(parse_kl_method("nope").has_value());
}
