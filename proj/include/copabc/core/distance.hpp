#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace copabc {

enum class DistanceKind { euclidean, mahalanobis };

inline std::string to_string(DistanceKind kind) {
  return kind == DistanceKind::euclidean ? "euclidean" : "mahalanobis";
}

/// Distance between summary vectors. Mahalanobis carries its scale matrix
/// (Sigma_0) together with a whitening factor W = L^{-1}, where
/// Sigma_0 = L L^T, so that d(a, b) = |W (a - b)|.
class DistanceSpec {
 public:
  static DistanceSpec euclidean() { return DistanceSpec(); }

  static DistanceSpec mahalanobis(const Eigen::MatrixXd& scale) {
    require(scale.rows() == scale.cols() && scale.rows() > 0, "mahalanobis: scale must be square");
    require(scale.allFinite(), "mahalanobis: scale has non-finite entries");
    require((scale - scale.transpose()).cwiseAbs().maxCoeff() <=
                1e-10 * std::max(1.0, scale.cwiseAbs().maxCoeff()),
            "mahalanobis: scale must be symmetric");
    const Eigen::MatrixXd sym = 0.5 * (scale + scale.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
      throw std::invalid_argument("mahalanobis: scale matrix is not positive definite");
    DistanceSpec spec;
    spec.kind_ = DistanceKind::mahalanobis;
    spec.scale_ = sym;
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("mahalanobis: Cholesky factorisation of scale failed");
    const Index d = sym.rows();
    spec.whitener_ = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
    return spec;
  }

  DistanceKind kind() const { return kind_; }
  const std::optional<Eigen::MatrixXd>& scale() const { return scale_; }
  const Eigen::MatrixXd& whitener() const { return whitener_; }

  /// The same distance on the coordinates in `subset` (Mahalanobis uses the
  /// corresponding sub-block of the scale matrix).
  DistanceSpec restrict(const IndexSet& subset) const {
    if (kind_ == DistanceKind::euclidean) return *this;
    const Index d = static_cast<Index>(subset.size());
    Eigen::MatrixXd sub(d, d);
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) {
        require(subset[a] < static_cast<std::size_t>(scale_->rows()), "restrict: index out of range");
        sub(a, b) = (*scale_)(static_cast<Index>(subset[a]), static_cast<Index>(subset[b]));
      }
    return mahalanobis(sub);
  }

  std::size_t dimension_hint() const { return scale_ ? static_cast<std::size_t>(scale_->rows()) : 0; }

 private:
  DistanceSpec() = default;

  DistanceKind kind_ = DistanceKind::euclidean;
  std::optional<Eigen::MatrixXd> scale_;
  Eigen::MatrixXd whitener_;
};

inline double distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                       const DistanceSpec& spec) {
  require(a.size() == b.size(), "distance: dimension mismatch");
  if (spec.kind() == DistanceKind::euclidean) return (a - b).norm();
  require(spec.whitener().rows() == a.size(), "distance: scale matrix dimension mismatch");
  return (spec.whitener().triangularView<Eigen::Lower>() * (a - b)).norm();
}

/// Threshold h for the uniform kernel: the k-th smallest distance with
/// k = ceil(quantile * N). Ties with h are all accepted downstream.
inline double uniform_kernel_threshold(std::span<const double> distances, double acceptance_quantile) {
  require(!distances.empty(), "uniform_kernel_threshold: no distances");
  require(acceptance_quantile > 0.0 && acceptance_quantile <= 1.0,
          "uniform_kernel_threshold: quantile outside (0,1]");
  for (double d : distances)
    require(std::isfinite(d) && d >= 0.0, "uniform_kernel_threshold: distances must be finite and nonnegative");
  return empirical_quantile(distances, acceptance_quantile);
}

/// Sample covariance of m simulated summaries at a fixed parameter. If the
/// estimate is not numerically positive definite a ridge eps * I is added with
/// eps = 1e-8 * mean(diag), or 1e-8 when the diagonal is identically zero.
inline Eigen::MatrixXd estimate_mahalanobis_scale(const std::function<SummaryVector()>& simulate,
                                                  std::size_t m) {
  require(m >= 2, "estimate_mahalanobis_scale: need at least two simulations");
  SummaryVector first = simulate();
  const Index q = first.size();
  require(m >= static_cast<std::size_t>(q) + 1, "estimate_mahalanobis_scale: need m >= q + 1");
  Eigen::MatrixXd rows(static_cast<Index>(m), q);
  rows.row(0) = first.transpose();
  for (Index r = 1; r < static_cast<Index>(m); ++r) {
    SummaryVector s = simulate();
    require(s.size() == q, "estimate_mahalanobis_scale: simulator changed dimension");
    rows.row(r) = s.transpose();
  }
  Eigen::MatrixXd cov = sample_covariance(rows);
  cov = (0.5 * (cov + cov.transpose())).eval();
  const double mean_diag = cov.diagonal().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (!(min_eig > 1e-12 * std::max(max_eig, 0.0)) || !(min_eig > 0.0)) {
    const double eps = mean_diag > 0.0 ? 1e-8 * mean_diag : 1e-8;
    cov.diagonal().array() += eps;
  }
  return cov;
}

}  // namespace copabc
