#pragma once

#include "copabc/core/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace copabc {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// Upper tail 1 - Phi(x), accurate for large x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

/// Phi^{-1}(u) for u in (0,1). Returns -inf/+inf at the endpoints.
inline double normal_quantile(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("normal_quantile: probability outside [0,1]");
  if (u == 0.0) return -std::numeric_limits<double>::infinity();
  if (u == 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

/// Order-statistic index k = ceil(prob * n), clamped to [1, n]. A relative
/// slack of 1e-12 absorbs representation error in prob * n (0.01 * 1e6 is
/// exactly 10000 samples, not 10001).
inline std::size_t order_statistic_rank(double prob, std::size_t n) {
  const double x = prob * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(x - 1e-12 * std::max(1.0, x)));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Empirical quantile: the k-th smallest value with k = ceil(prob * n).
inline double empirical_quantile(std::span<const double> values, double prob) {
  require(!values.empty(), "empirical_quantile: empty input");
  require(prob > 0.0 && prob <= 1.0, "empirical_quantile: probability outside (0,1]");
  std::vector<double> work(values.begin(), values.end());
  const std::size_t k = order_statistic_rank(prob, work.size());
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
  return work[k - 1];
}

/// Ranks 1..n with ties broken by input order (stable).
inline std::vector<std::size_t> stable_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

/// Order permutation (indices sorted by value, stable).
inline std::vector<std::size_t> stable_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

inline double weighted_mean(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& w) {
  return x.dot(w) / w.sum();
}

inline double weighted_sd(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& w) {
  const double m = weighted_mean(x, w);
  const double wsum = w.sum();
  const double w2 = w.squaredNorm();
  const double var = ((x.array() - m).square() * w.array()).sum() / wsum;
  // reliability-weights correction; equals n/(n-1) for equal weights
  const double denom = 1.0 - w2 / (wsum * wsum);
  return denom > 0.0 ? std::sqrt(var / denom) : 0.0;
}

/// Kish effective sample size.
inline double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& w) {
  const double s = w.sum();
  return s * s / w.squaredNorm();
}

inline double pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma;
  const Eigen::ArrayXd db = b.array() - mb;
  const double saa = da.square().sum();
  const double sbb = db.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw numerical_error("pearson_correlation: zero variance");
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double weighted_pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                                           const Eigen::Ref<const Eigen::VectorXd>& b,
                                           const Eigen::Ref<const Eigen::VectorXd>& w) {
  const double ma = weighted_mean(a, w);
  const double mb = weighted_mean(b, w);
  const Eigen::ArrayXd da = a.array() - ma;
  const Eigen::ArrayXd db = b.array() - mb;
  const double saa = (w.array() * da.square()).sum();
  const double sbb = (w.array() * db.square()).sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw numerical_error("weighted_pearson_correlation: zero variance");
  return std::clamp((w.array() * da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Sample covariance (denominator m - 1) of the rows of `rows`.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  require(rows.rows() >= 2, "sample_covariance: need at least two rows");
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);
}

}  // namespace copabc
