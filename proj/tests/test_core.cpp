#include "copabc/abc/select.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/io.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/sample_set.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/summary_map.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace copabc;

TEST(Distance, IdentityIsZero) {
  Eigen::Vector2d a(1, 2);
  EXPECT_EQ(distance(a, a, DistanceSpec::euclidean()), 0.0);
}

TEST(Distance, MahalanobisHandExample) {
  Eigen::Vector2d a(2, 1), b(0, 0);
  Eigen::Matrix2d s = Eigen::Vector2d(4, 1).asDiagonal();
  EXPECT_NEAR(distance(a, b, DistanceSpec::mahalanobis(s)), std::sqrt(2.0), 1e-14);
}

TEST(Distance, IdentityScaleMatchesEuclidean) {
  SeededRng rng(3);
  const auto m = DistanceSpec::mahalanobis(Eigen::MatrixXd::Identity(4, 4));
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a(4), b(4);
    for (int k = 0; k < 4; ++k) a(k) = rng.normal(), b(k) = rng.normal();
    EXPECT_NEAR(distance(a, b, m), distance(a, b, DistanceSpec::euclidean()), 1e-13);
  }
}

TEST(Distance, SymmetricAndPositiveOnRandomInputs) {
  SeededRng rng(11);
  Eigen::MatrixXd A(3, 3);
  for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = rng.normal();
  const Eigen::MatrixXd scale = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
  for (const auto& spec : {DistanceSpec::euclidean(), DistanceSpec::mahalanobis(scale)}) {
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd a(3), b(3);
      for (int k = 0; k < 3; ++k) a(k) = rng.normal(), b(k) = rng.normal();
      EXPECT_NEAR(distance(a, b, spec), distance(b, a, spec), 1e-12);
      EXPECT_GT(distance(a, b, spec), 0.0);
      EXPECT_EQ(distance(a, a, spec), 0.0);
    }
  }
}

TEST(Distance, Errors) {
  EXPECT_THROW(distance(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3), DistanceSpec::euclidean()),
               std::invalid_argument);
  Eigen::Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(DistanceSpec::mahalanobis(indefinite), std::invalid_argument);
}

TEST(Kernel, ThresholdHandExample) {
  std::vector<double> d(100);
  std::iota(d.begin(), d.end(), 1.0);
  EXPECT_EQ(uniform_kernel_threshold(d, 0.05), 5.0);
  EXPECT_EQ(select_nearest(d, order_statistic_rank(0.05, d.size())).rows.size(), 5u);
  EXPECT_EQ(uniform_kernel_threshold(d, 1.0), 100.0);
}

TEST(Kernel, MillionRowOnePercentCount) {
  EXPECT_EQ(order_statistic_rank(0.01, 1000000), 10000u);
  std::vector<double> d(1000000);
  std::iota(d.begin(), d.end(), 0.5);
  std::shuffle(d.begin(), d.end(), std::mt19937_64(5));
  EXPECT_EQ(select_nearest(d, order_statistic_rank(0.01, d.size())).rows.size(), 10000u);
}

TEST(Kernel, PermutationInvariant) {
  SeededRng rng(2);
  std::vector<double> d(257);
  for (double& x : d) x = rng.uniform();
  const double h = uniform_kernel_threshold(d, 0.1);
  std::mt19937_64 g(9);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(d.begin(), d.end(), g);
    EXPECT_EQ(uniform_kernel_threshold(d, 0.1), h);
  }
}

TEST(Kernel, Errors) {
  std::vector<double> empty;
  EXPECT_THROW(uniform_kernel_threshold(empty, 0.5), std::invalid_argument);
  std::vector<double> d{1, 2};
  EXPECT_THROW(uniform_kernel_threshold(d, 0.0), std::invalid_argument);
  EXPECT_THROW(uniform_kernel_threshold(d, 1.5), std::invalid_argument);
}

TEST(Kernel, TiesAreAllAccepted) {
  std::vector<double> d{0.1, 0.2, 0.2, 0.2, 0.5};
  const auto sel = select_nearest(d, 2);
  EXPECT_EQ(sel.threshold, 0.2);
  EXPECT_EQ(sel.rows.size(), 4u);
}

TEST(MahalanobisScale, ConstantSimulatorGivesRidge) {
  const Eigen::MatrixXd s = estimate_mahalanobis_scale([] { return SummaryVector(Eigen::Vector2d(3, 4)); }, 10);
  EXPECT_TRUE(s.isApprox(1e-8 * Eigen::MatrixXd::Identity(2, 2), 1e-12));
  EXPECT_NO_THROW(DistanceSpec::mahalanobis(s));
}

TEST(MahalanobisScale, RecoversDiagonalCovariance) {
  SeededRng rng(17);
  const Eigen::MatrixXd s = estimate_mahalanobis_scale(
      [&] { return SummaryVector(Eigen::Vector2d(2.0 * rng.normal(), rng.normal())); }, 50000);
  EXPECT_NEAR(s(0, 0), 4.0, 0.05 * 4.0);
  EXPECT_NEAR(s(1, 1), 1.0, 0.05);
  EXPECT_NEAR(s(0, 1), 0.0, 0.05);
}

TEST(MahalanobisScale, NeedsEnoughSimulations) {
  EXPECT_THROW(estimate_mahalanobis_scale([] { return SummaryVector(Eigen::Vector3d(1, 2, 3)); }, 3),
               std::invalid_argument);
}

TEST(SampleSet, WeightsNormalised) {
  SeededRng rng(1);
  Eigen::VectorXd w(37);
  for (int i = 0; i < 37; ++i) w(i) = rng.uniform() * 1e6;
  WeightedSampleSet s(Eigen::MatrixXd::Zero(37, 2), Eigen::MatrixXd::Zero(37, 1), w);
  EXPECT_NEAR(s.weights().sum(), 1.0, 1e-12);
  WeightedSampleSet e(Eigen::MatrixXd::Zero(5, 2), Eigen::MatrixXd::Zero(5, 1));
  EXPECT_NEAR(e.weights().sum(), 1.0, 1e-12);
  EXPECT_TRUE(e.has_equal_weights());
  EXPECT_THROW(WeightedSampleSet(Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(0, 0)),
               std::invalid_argument);
}

TEST(Rng, ReproducibleStreams) {
  SeededRng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs = differs || x != c.normal();
  }
  EXPECT_TRUE(differs);
  SeededRng d1 = SeededRng(5).derive(1), d2 = SeededRng(5).derive(1), d3 = SeededRng(5).derive(2);
  EXPECT_EQ(d1.next_u64(), d2.next_u64());
  EXPECT_NE(d1.next_u64(), d3.next_u64());
}

TEST(Rng, UniformOpenInterval) {
  SeededRng r(0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Stats, NormalQuantileRoundTrip) {
  for (double u : {1e-10, 0.01, 0.25, 0.5, 0.75, 0.99}) EXPECT_NEAR(normal_cdf(normal_quantile(u)), u, 1e-14 + 1e-12 * u);
  EXPECT_NEAR(normal_quantile(0.75), 0.6744897501960817, 1e-15);
}

TEST(Stats, EmpiricalQuantileConvention) {
  std::vector<double> v{8, 1, 7, 2, 6, 3, 5, 4};
  EXPECT_EQ(empirical_quantile(v, 0.25), 2.0);  // k = 2
  EXPECT_EQ(empirical_quantile(v, 0.5), 4.0);   // k = 4
  EXPECT_EQ(empirical_quantile(v, 0.3), 3.0);   // k = ceil(2.4) = 3
}

TEST(SummaryMapTest, UnionAndOverride) {
  SummaryMap m(4, {{0}, {0, 1}, {2}}, {{{0, 2}, {3}}});
  EXPECT_EQ(m.pairwise(0, 1), (IndexSet{0, 1}));
  EXPECT_EQ(m.pairwise(1, 2), (IndexSet{0, 1, 2}));
  EXPECT_EQ(m.pairwise(2, 0), (IndexSet{3}));
  EXPECT_THROW(SummaryMap(2, {{0}, {}}), std::invalid_argument);
  EXPECT_THROW(SummaryMap(2, {{0}, {5}}), std::invalid_argument);
}

TEST(SummaryMapTest, ErrorNamesParameter) {
  try {
    SummaryMap(3, {{0}, {}, {1}});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Io, ShortestRoundTrip) {
  SeededRng r(8);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.normal() * std::pow(10.0, r.uniform(-30, 30));
    EXPECT_EQ(*io::parse_double(io::format_double(x)), x);
  }
  EXPECT_FALSE(io::parse_double("1.0x"));
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  std::vector<double> a(200), b(200);
  auto fill = [](std::vector<double>& out, std::size_t threads) {
    parallel_for(out.size(), threads, [&](std::size_t i) {
      SeededRng rng = SeededRng(3).derive(i);
      out[i] = rng.normal();
    });
  };
  fill(a, 1);
  fill(b, 4);
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(10, 2, [](std::size_t i) {
                 if (i == 5) throw std::runtime_error("x");
               }),
               std::runtime_error);
}
