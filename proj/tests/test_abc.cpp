#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/abc/table_io.hpp"
#include "copabc/models/twisted_normal.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <filesystem>

using namespace copabc;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("copabc_test_" + name)).string();
}

}  // namespace

TEST(ReferenceTable, RejectsEmptyRequest) {
  EXPECT_THROW(build_reference_table(toy_simulator_model(TwistedNormalModel::make(2)), 0, 1), std::invalid_argument);
}

TEST(ReferenceTable, Deterministic) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(2));
  const ReferenceTable a = build_reference_table(sim, 1000, 99, 1);
  const ReferenceTable b = build_reference_table(sim, 1000, 99, 3);
  EXPECT_TRUE(a == b);
  const ReferenceTable c = build_reference_table(sim, 1000, 100, 1);
  EXPECT_FALSE(a == c);
}

TEST(ReferenceTable, PriorMeanOfTheta1) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(2));
  const Index n = 100000;
  const ReferenceTable t = build_reference_table(sim, n, 7);
  EXPECT_NEAR(t.params().col(0).mean(), 0.0, 3.0 * 10.0 / std::sqrt(double(n)));
  EXPECT_TRUE(t.prior_as_importance());
}

TEST(ReferenceTable, RetriesFailingSimulations) {
  SimulatorModel m;
  m.id = "flaky";
  m.param_dim = 1;
  m.summary_dim = 1;
  m.sample_prior = [](SeededRng& r) { return ParameterVector::Constant(1, r.uniform()); };
  m.simulate = [](const ParameterVector& th, SeededRng&) -> SummaryVector {
    if (th(0) < 0.5) throw simulation_failure("low");
    return th;
  };
  const ReferenceTable t = build_reference_table(m, 500, 3);
  EXPECT_TRUE((t.params().array() >= 0.5).all());

  m.simulate = [](const ParameterVector&, SeededRng&) -> SummaryVector { throw simulation_failure("always"); };
  EXPECT_THROW(build_reference_table(m, 10, 3), numerical_error);
}

TEST(ReferenceTable, ImportanceRatios) {
  // prior N(0,1), importance N(0,4): ratio = p/f up to the constant of the unnormalised densities
  SimulatorModel m;
  m.id = "is";
  m.param_dim = 1;
  m.summary_dim = 1;
  m.sample_prior = [](SeededRng& r) { return ParameterVector::Constant(1, r.normal()); };
  m.sample_importance = [](SeededRng& r) { return ParameterVector::Constant(1, 2.0 * r.normal()); };
  m.log_prior_density = [](const ParameterVector& t) { return -0.5 * t(0) * t(0); };
  m.log_importance_density = [](const ParameterVector& t) { return -0.125 * t(0) * t(0); };
  m.simulate = [](const ParameterVector& t, SeededRng& r) { return SummaryVector::Constant(1, t(0) + r.normal()); };
  const ReferenceTable t = build_reference_table(m, 20000, 4);
  EXPECT_FALSE(t.prior_as_importance());
  const WeightedSampleSet all = abc_select(t, SummaryVector::Zero(1), {0}, 1.0, DistanceSpec::euclidean());
  // importance-weighted prior mean of theta^2 is 1
  EXPECT_NEAR(all.weights().dot(all.params().col(0).array().square().matrix()), 1.0, 0.05);
}

TEST(AbcSelect, FullQuantileKeepsEverythingEqualWeights) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(3));
  const ReferenceTable t = build_reference_table(sim, 500, 1);
  const WeightedSampleSet s = abc_select(t, SummaryVector::Zero(3), {0, 2}, 1.0, DistanceSpec::euclidean());
  EXPECT_EQ(s.size(), 500);
  EXPECT_TRUE(s.has_equal_weights());
}

TEST(AbcSelect, SizeIsCeilQuantileN) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(2));
  const ReferenceTable t = build_reference_table(sim, 1234, 2);
  EXPECT_EQ(abc_select(t, SummaryVector::Zero(2), {0, 1}, 0.05, DistanceSpec::euclidean()).size(), 62);
}

TEST(AbcSelect, NestedThresholdsGiveNestedSets) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(2));
  const ReferenceTable t = build_reference_table(sim, 5000, 8);
  const SummaryVector s_obs = TwistedNormalModel::make(2).y_obs;
  const Selection wide = select_rows(t, s_obs, {0}, 0.2, DistanceSpec::euclidean());
  const Selection narrow = select_rows(t, s_obs, {0}, 0.05, DistanceSpec::euclidean());
  EXPECT_TRUE(std::includes(wide.rows.begin(), wide.rows.end(), narrow.rows.begin(), narrow.rows.end()));
  // thresholding the wide set at the narrow h recovers the narrow set
  const auto d = projected_distances(t, s_obs, {0}, DistanceSpec::euclidean());
  std::vector<Index> refiltered;
  for (Index r : wide.rows)
    if (d[static_cast<std::size_t>(r)] <= narrow.threshold) refiltered.push_back(r);
  EXPECT_EQ(refiltered, narrow.rows);
}

TEST(AbcSelect, PosteriorMeanMatchesGridQuadrature) {
  const auto model = TwistedNormalModel::make(2);
  const ReferenceTable t = build_reference_table(toy_simulator_model(model), 1000000, 2024);
  const WeightedSampleSet s = abc_select(t, model.y_obs, {0}, 0.01, DistanceSpec::euclidean());
  EXPECT_EQ(s.size(), 10000);
  // oracle: posterior mean of theta_1 given s_1 = 10, N(10; theta, 1) N(theta; 0, 100)
  auto dens = [](double th) { return std::exp(-0.5 * (10 - th) * (10 - th) - th * th / 200.0); };
  using boost::math::quadrature::gauss_kronrod;
  const double z = gauss_kronrod<double, 61>::integrate(dens, -20.0, 40.0, 15, 1e-13);
  const double m1 = gauss_kronrod<double, 61>::integrate([&](double th) { return th * dens(th); }, -20.0, 40.0, 15,
                                                         1e-13);
  EXPECT_NEAR(s.params().col(0).mean(), m1 / z, 0.2);
}

TEST(AbcSelect, MahalanobisSubsetUsesSubBlock) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(3));
  const ReferenceTable t = build_reference_table(sim, 300, 5);
  Eigen::Matrix3d scale = Eigen::Vector3d(4, 1, 9).asDiagonal();
  const auto spec = DistanceSpec::mahalanobis(scale);
  const SummaryVector s_obs = SummaryVector::Zero(3);
  const auto d = projected_distances(t, s_obs, {0, 2}, spec);
  for (Index r = 0; r < 20; ++r) {
    const double a = t.summaries()(r, 0), c = t.summaries()(r, 2);
    EXPECT_NEAR(d[static_cast<std::size_t>(r)], std::sqrt(a * a / 4 + c * c / 9), 1e-12);
  }
}

TEST(AbcSelect, Errors) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(2));
  const ReferenceTable t = build_reference_table(sim, 50, 1);
  EXPECT_THROW(abc_select(t, SummaryVector::Zero(2), {}, 0.5, DistanceSpec::euclidean()), std::invalid_argument);
  EXPECT_THROW(abc_select(t, SummaryVector::Zero(2), {5}, 0.5, DistanceSpec::euclidean()), std::invalid_argument);
  SummaryVector inf_obs = SummaryVector::Constant(2, std::numeric_limits<double>::infinity());
  EXPECT_THROW(abc_select(t, inf_obs, {0}, 0.5, DistanceSpec::euclidean()), numerical_error);
}

TEST(TableIo, BinaryAndCsvRoundTrip) {
  const auto sim = toy_simulator_model(TwistedNormalModel::make(3));
  const ReferenceTable t = build_reference_table(sim, 777, 31);
  const std::string bin = temp_path("table.bin"), csv = temp_path("table.csv");
  save_reference_table(t, bin);
  EXPECT_TRUE(load_reference_table(bin) == t);
  export_reference_table_csv(t, csv);
  const ReferenceTable back = import_reference_table_csv(csv, 3, 3, t.seed(), t.model_id());
  EXPECT_TRUE(back == t);
  EXPECT_THROW(import_reference_table_csv(csv, 2, 3), std::invalid_argument);
  std::filesystem::remove(bin);
  std::filesystem::remove(csv);
}
