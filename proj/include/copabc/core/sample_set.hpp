#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/types.hpp"

#include <cmath>

namespace copabc {

/// Parameter draws paired with their summaries and importance weights.
/// Weights are normalised to sum to one on construction.
class WeightedSampleSet {
 public:
  WeightedSampleSet() = default;

  WeightedSampleSet(Eigen::MatrixXd params, Eigen::MatrixXd summaries, Eigen::VectorXd weights)
      : params_(std::move(params)), summaries_(std::move(summaries)), weights_(std::move(weights)) {
    require(params_.rows() == summaries_.rows() && params_.rows() == weights_.size(),
            "WeightedSampleSet: row counts disagree");
    require(params_.rows() > 0, "WeightedSampleSet: empty sample");
    require((weights_.array() >= 0.0).all() && weights_.allFinite(),
            "WeightedSampleSet: weights must be finite and nonnegative");
    const double total = weights_.sum();
    require(total > 0.0, "WeightedSampleSet: weights sum to zero");
    weights_ /= total;
  }

  /// Equal weights.
  WeightedSampleSet(Eigen::MatrixXd params, Eigen::MatrixXd summaries)
      : params_(std::move(params)), summaries_(std::move(summaries)) {
    require(params_.rows() == summaries_.rows(), "WeightedSampleSet: row counts disagree");
    require(params_.rows() > 0, "WeightedSampleSet: empty sample");
    weights_ = Eigen::VectorXd::Constant(params_.rows(), 1.0 / static_cast<double>(params_.rows()));
  }

  Index size() const { return params_.rows(); }
  Index param_dim() const { return params_.cols(); }
  Index summary_dim() const { return summaries_.cols(); }

  const Eigen::MatrixXd& params() const { return params_; }
  const Eigen::MatrixXd& summaries() const { return summaries_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  bool has_equal_weights(double rel_tol = 1e-12) const {
    const double target = 1.0 / static_cast<double>(size());
    return ((weights_.array() - target).abs() <= rel_tol * target).all();
  }

  WeightedSampleSet with_params(Eigen::MatrixXd params) const {
    require(params.rows() == params_.rows(), "with_params: row count mismatch");
    return WeightedSampleSet(std::move(params), summaries_, weights_);
  }

 private:
  Eigen::MatrixXd params_;
  Eigen::MatrixXd summaries_;
  Eigen::VectorXd weights_;
};

}  // namespace copabc
