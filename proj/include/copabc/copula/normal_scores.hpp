#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/stats.hpp"

#include <span>
#include <vector>

namespace copabc {

/// Phi^{-1}(r/(n+1)) for the stable ranks r of `values`. Upper-half scores are
/// computed as the negation of their mirror, so tie-free output sums to zero.
inline Eigen::VectorXd normal_scores(std::span<const double> values) {
  require(!values.empty(), "normal_scores: empty input");
  const std::size_t n = values.size();
  const std::vector<std::size_t> ranks = stable_ranks(values);
  const double denom = static_cast<double>(n) + 1.0;
  Eigen::VectorXd out(static_cast<Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t r = ranks[k];
    const std::size_t mirror = n + 1 - r;
    out(static_cast<Index>(k)) = r <= mirror ? normal_quantile(static_cast<double>(r) / denom)
                                             : -normal_quantile(static_cast<double>(mirror) / denom);
  }
  return out;
}

inline Eigen::VectorXd normal_scores(const Eigen::Ref<const Eigen::VectorXd>& values) {
  return normal_scores(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Weighted normal scores: Phi^{-1}(u_r) with u_r = (n (C_r - w_r/2) + 1/2)/(n+1),
/// the same plotting positions as the weighted marginal CDF.
inline Eigen::VectorXd weighted_normal_scores(const Eigen::Ref<const Eigen::VectorXd>& values,
                                              const Eigen::Ref<const Eigen::VectorXd>& weights) {
  require(values.size() == weights.size() && values.size() > 0, "weighted_normal_scores: size mismatch");
  const auto n = static_cast<std::size_t>(values.size());
  const std::vector<std::size_t> order = stable_order(std::span<const double>(values.data(), n));
  const double total = weights.sum();
  require(total > 0.0, "weighted_normal_scores: weights sum to zero");
  const double nn = static_cast<double>(n);
  Eigen::VectorXd out(values.size());
  double c = 0.0;
  for (std::size_t idx : order) {
    const double w = weights(static_cast<Index>(idx)) / total;
    c += w;
    const double u = (nn * (c - 0.5 * w) + 0.5) / (nn + 1.0);
    out(static_cast<Index>(idx)) = normal_quantile(u);
  }
  return out;
}

/// Sample correlation of the normal scores of two columns.
inline double pairwise_lambda(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  require(a.size() == b.size(), "pairwise_lambda: columns differ in length");
  require(a.size() >= 3, "pairwise_lambda: need at least 3 samples");
  return pearson_correlation(normal_scores(a), normal_scores(b));
}

/// Weighted variant: weighted scores and weighted Pearson correlation. With
/// equal weights this equals pairwise_lambda.
inline double pairwise_lambda(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                              const Eigen::Ref<const Eigen::VectorXd>& weights) {
  require(a.size() == b.size() && a.size() == weights.size(), "pairwise_lambda: columns differ in length");
  require(a.size() >= 3, "pairwise_lambda: need at least 3 samples");
  return weighted_pearson_correlation(weighted_normal_scores(a, weights), weighted_normal_scores(b, weights), weights);
}

}  // namespace copabc
