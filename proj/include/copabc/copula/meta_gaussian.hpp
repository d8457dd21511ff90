#pragma once

#include "copabc/copula/correlation.hpp"
#include "copabc/copula/marginal.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/sample_set.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <vector>

namespace copabc {

/// Meta-Gaussian distribution: arbitrary continuous marginals joined by a
/// Gaussian copula with correlation matrix Lambda. With eta_i = Phi^{-1}(G_i(theta_i)),
///
///   log g(theta) = -1/2 log|Lambda| + 1/2 eta^T (I - Lambda^{-1}) eta + sum_i log g_i(theta_i).
///
/// `Marginal` needs cdf, quantile, normal_score, log_density and iqr.
template <class Marginal>
class MetaGaussian {
 public:
  MetaGaussian() = default;

  MetaGaussian(std::vector<Marginal> marginals, Eigen::MatrixXd correlation, RepairLog repair = {})
      : marginals_(std::move(marginals)), correlation_(std::move(correlation)), repair_(repair) {
    const auto p = static_cast<Index>(marginals_.size());
    require(p >= 1, "MetaGaussian: need at least one marginal");
    require(correlation_.rows() == p && correlation_.cols() == p, "MetaGaussian: correlation has wrong shape");
    require(correlation_.isApprox(correlation_.transpose(), 1e-12), "MetaGaussian: correlation not symmetric");
    for (Index i = 0; i < p; ++i)
      require(std::abs(correlation_(i, i) - 1.0) < 1e-12, "MetaGaussian: correlation diagonal must be 1");
    llt_.compute(correlation_);
    if (llt_.info() != Eigen::Success) throw numerical_error("MetaGaussian: correlation is not positive definite");
    precision_minus_identity_ = llt_.solve(Eigen::MatrixXd::Identity(p, p)) - Eigen::MatrixXd::Identity(p, p);
    log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  std::size_t dim() const { return marginals_.size(); }
  const std::vector<Marginal>& marginals() const { return marginals_; }
  const Marginal& marginal(std::size_t i) const { return marginals_.at(i); }
  const Eigen::MatrixXd& correlation() const { return correlation_; }
  const RepairLog& repair_log() const { return repair_; }
  double log_det() const { return log_det_; }
  const Eigen::MatrixXd& cholesky_factor() const { return llt_.matrixLLT(); }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    require(theta.size() == static_cast<Index>(dim()), "copula_log_density: dimension mismatch");
    require(theta.allFinite(), "copula_log_density: non-finite parameter");
    Eigen::VectorXd eta(theta.size());
    double marg = 0.0;
    for (Index i = 0; i < theta.size(); ++i) {
      const auto& m = marginals_[static_cast<std::size_t>(i)];
      const double lg = m.log_density(theta(i));
      if (lg == -std::numeric_limits<double>::infinity()) return lg;
      marg += lg;
      eta(i) = m.normal_score(theta(i));
    }
    return -0.5 * log_det_ - 0.5 * eta.dot(precision_minus_identity_ * eta) + marg;
  }

  /// The meta-Gaussian on a subset of coordinates (marginals of a Gaussian
  /// copula are Gaussian copulas with the sub-matrix of Lambda).
  MetaGaussian sub(const IndexSet& subset) const {
    require(!subset.empty(), "MetaGaussian::sub: empty subset");
    std::vector<Marginal> ms;
    const auto d = static_cast<Index>(subset.size());
    Eigen::MatrixXd c(d, d);
    for (Index a = 0; a < d; ++a) {
      const std::size_t i = subset[static_cast<std::size_t>(a)];
      require(i < dim(), "MetaGaussian::sub: index out of range");
      ms.push_back(marginals_[i]);
      for (Index b = 0; b < d; ++b)
        c(a, b) = correlation_(static_cast<Index>(i), static_cast<Index>(subset[static_cast<std::size_t>(b)]));
    }
    return MetaGaussian(std::move(ms), std::move(c), repair_);
  }

  /// m draws: eta ~ N(0, Lambda) via Cholesky, theta_i = G_i^{-1}(Phi(eta_i)).
  Eigen::MatrixXd sample(Index m, SeededRng& rng) const {
    require(m >= 1, "copula_sample: m must be at least 1");
    const auto p = static_cast<Index>(dim());
    const Eigen::MatrixXd L = llt_.matrixL();
    Eigen::MatrixXd out(m, p);
    Eigen::VectorXd z(p);
    for (Index r = 0; r < m; ++r) {
      for (Index i = 0; i < p; ++i) z(i) = rng.normal();
      const Eigen::VectorXd eta = L * z;
      for (Index i = 0; i < p; ++i) out(r, i) = marginals_[static_cast<std::size_t>(i)].quantile(normal_cdf(eta(i)));
    }
    return out;
  }

 private:
  std::vector<Marginal> marginals_;
  Eigen::MatrixXd correlation_;
  RepairLog repair_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd precision_minus_identity_;  // Lambda^{-1} - I
  double log_det_ = 0.0;
};

using CopulaPosterior = MetaGaussian<MarginalEstimate>;

template <class Marginal>
double copula_log_density(const MetaGaussian<Marginal>& post, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return post.log_density(theta);
}

/// Equally weighted draws; the summaries block is empty.
template <class Marginal>
WeightedSampleSet copula_sample(const MetaGaussian<Marginal>& post, Index m, SeededRng& rng) {
  Eigen::MatrixXd params = post.sample(m, rng);
  return WeightedSampleSet(std::move(params), Eigen::MatrixXd(m, 0));
}

}  // namespace copabc
