#pragma once

#include "copabc/copula/marginal.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/sample_set.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/types.hpp"

#include <Eigen/QR>

#include <span>
#include <string>
#include <vector>

namespace copabc {

/// Weighted least-squares fit theta = alpha + beta^T (s[subset] - s_obs[subset]) + eps.
struct RegressionFit {
  Eigen::VectorXd intercept;     // alpha, length p
  Eigen::MatrixXd coefficients;  // beta, |subset| x p; dropped columns are zero rows
  Eigen::MatrixXd residuals;     // n x p
  IndexSet dropped;              // positions within `subset` removed as collinear
};

inline RegressionFit fit_regression(const WeightedSampleSet& samples, const SummaryVector& s_obs,
                                    const IndexSet& subset) {
  require(!subset.empty(), "regression_adjust: empty summary subset");
  require(s_obs.size() == samples.summary_dim(), "regression_adjust: observed summary has wrong dimension");
  const Index n = samples.size();
  const auto d = static_cast<Index>(subset.size());
  require(n > d + 1, "regression_adjust: need more than |subset|+1 samples (have " + std::to_string(n) +
                         " rows for " + std::to_string(d) + " regressors)");
  const Eigen::VectorXd& w = samples.weights();
  const Eigen::MatrixXd& theta = samples.params();

  Eigen::MatrixXd X(n, d);
  for (Index c = 0; c < d; ++c) {
    const auto k = static_cast<Index>(subset[static_cast<std::size_t>(c)]);
    require(k < samples.summary_dim(), "regression_adjust: summary index out of range");
    X.col(c) = samples.summaries().col(k).array() - s_obs(k);
  }

  // Centering by the weighted means makes the intercept orthogonal to the
  // regressors, so a constant regressor becomes a zero column and is dropped
  // rather than competing with the intercept.
  const double wsum = w.sum();
  const Eigen::RowVectorXd xbar = (w.transpose() * X) / wsum;
  const Eigen::RowVectorXd tbar = (w.transpose() * theta) / wsum;
  const Eigen::VectorXd sw = w.array().sqrt();
  Eigen::MatrixXd Z = sw.asDiagonal() * (X.rowwise() - xbar);
  const Eigen::MatrixXd T = sw.asDiagonal() * (theta.rowwise() - tbar);

  // Rank is judged on unit-norm columns so summaries on different scales are
  // treated alike.
  Eigen::VectorXd norms = Z.colwise().norm().transpose();
  const double max_norm = norms.maxCoeff();
  for (Index c = 0; c < d; ++c) {
    if (norms(c) <= 1e-14 * std::max(1.0, max_norm)) norms(c) = 0.0;
    if (norms(c) > 0.0) Z.col(c) /= norms(c);
  }

  RegressionFit fit;
  fit.coefficients = Eigen::MatrixXd::Zero(d, theta.cols());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  std::vector<bool> kept(static_cast<std::size_t>(d), false);
  for (Index r = 0; r < rank; ++r) {
    const Index c = qr.colsPermutation().indices()(r);
    if (norms(c) > 0.0) kept[static_cast<std::size_t>(c)] = true;
  }
  if (rank > 0) {
    const Eigen::MatrixXd b = qr.solve(T);
    for (Index c = 0; c < d; ++c)
      if (kept[static_cast<std::size_t>(c)]) fit.coefficients.row(c) = b.row(c) / norms(c);
  }
  for (Index c = 0; c < d; ++c)
    if (!kept[static_cast<std::size_t>(c)]) fit.dropped.push_back(static_cast<std::size_t>(c));
  if (!fit.dropped.empty())
    warn("regression_adjust: " + std::to_string(fit.dropped.size()) + " of " + std::to_string(d) +
         " summary columns are collinear and were dropped");

  fit.intercept = (tbar - xbar * fit.coefficients).transpose();
  fit.residuals = (theta - X * fit.coefficients).rowwise() - fit.intercept.transpose();
  return fit;
}

/// theta* = theta - beta^T (s - s_obs); summaries and weights are unchanged.
inline WeightedSampleSet regression_adjust(const WeightedSampleSet& samples, const SummaryVector& s_obs,
                                           const IndexSet& subset, RegressionFit* fit_out = nullptr) {
  RegressionFit fit = fit_regression(samples, s_obs, subset);
  Eigen::MatrixXd adjusted = fit.residuals.rowwise() + fit.intercept.transpose();
  if (fit_out) *fit_out = std::move(fit);
  return samples.with_params(std::move(adjusted));
}

/// Replaces the value of rank r in `column` with marginal.quantile(r/(n+1)).
/// Ranks are stable in input order, so the column's ordering is preserved.
template <class Marginal>
void adjust_column_to_marginal(Eigen::Ref<Eigen::VectorXd> column, const Marginal& marginal) {
  const auto n = static_cast<std::size_t>(column.size());
  const std::vector<std::size_t> ranks = stable_ranks(std::span<const double>(column.data(), n));
  const double denom = static_cast<double>(n) + 1.0;
  for (std::size_t r = 0; r < n; ++r)
    column(static_cast<Index>(r)) = marginal.quantile(static_cast<double>(ranks[r]) / denom);
}

/// Order-statistic replacement of every parameter column by the matching
/// marginal estimate. Requires an equally weighted sample.
inline WeightedSampleSet marginal_adjust(const WeightedSampleSet& joint, std::span<const MarginalEstimate> marginals) {
  require(static_cast<Index>(marginals.size()) == joint.param_dim(),
          "marginal_adjust: need one marginal estimate per parameter");
  require(joint.has_equal_weights(1e-9), "marginal_adjust: sample must be equally weighted");
  Eigen::MatrixXd params = joint.params();
  for (Index i = 0; i < params.cols(); ++i) {
    require(marginals[static_cast<std::size_t>(i)].size() > 0, "marginal_adjust: empty marginal estimate");
    adjust_column_to_marginal(params.col(i), marginals[static_cast<std::size_t>(i)]);
  }
  return joint.with_params(std::move(params));
}

}  // namespace copabc
