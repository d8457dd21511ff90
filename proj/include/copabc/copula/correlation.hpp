#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <string>
#include <utility>

namespace copabc {

inline constexpr double kEigenvalueFloor = 1e-6;

struct RepairLog {
  bool repaired = false;
  double eigenvalue_floor = kEigenvalueFloor;
  double min_eigenvalue_before = 1.0;
  double min_eigenvalue_after = 1.0;
  double max_abs_change = 0.0;  // largest |entry change| caused by the repair
  int iterations = 0;
};

struct AssembledCorrelation {
  Eigen::MatrixXd matrix;
  RepairLog log;
};

/// Pairwise estimates keyed by (i, j) with i < j, 0-based.
using PairCorrelations = std::map<std::pair<std::size_t, std::size_t>, double>;

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Eigenvalue clipping at `floor` followed by rescaling to unit diagonal,
/// repeated until the minimum eigenvalue reaches the floor. If rescaling keeps
/// pushing it just below, a final shrink toward the identity closes the gap.
inline AssembledCorrelation repair_correlation(const Eigen::MatrixXd& input, double floor = kEigenvalueFloor) {
  require(input.rows() == input.cols(), "repair_correlation: matrix must be square");
  require(floor > 0.0 && floor < 1.0, "repair_correlation: eigenvalue floor must lie in (0,1)");
  AssembledCorrelation out;
  out.log.eigenvalue_floor = floor;
  Eigen::MatrixXd m = 0.5 * (input + input.transpose());
  m.diagonal().setOnes();
  out.log.min_eigenvalue_before = min_eigenvalue(m);
  out.log.min_eigenvalue_after = out.log.min_eigenvalue_before;
  if (out.log.min_eigenvalue_before >= floor) {
    out.matrix = std::move(m);
    return out;
  }
  out.log.repaired = true;
  const Eigen::MatrixXd original = m;
  double lambda_min = out.log.min_eigenvalue_before;
  for (int it = 0; it < 50 && lambda_min < floor; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(floor);
    m = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = m.diagonal().cwiseSqrt().cwiseInverse();
    m = d.asDiagonal() * m * d.asDiagonal();
    m = (0.5 * (m + m.transpose())).eval();
    m.diagonal().setOnes();
    lambda_min = min_eigenvalue(m);
    out.log.iterations = it + 1;
  }
  if (lambda_min < floor) {
    const double t = (floor - lambda_min) / (1.0 - lambda_min) * (1.0 + 1e-9);
    m = (1.0 - t) * m + t * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    m.diagonal().setOnes();
    lambda_min = min_eigenvalue(m);
  }
  out.log.min_eigenvalue_after = lambda_min;
  out.log.max_abs_change = (m - original).cwiseAbs().maxCoeff();
  warn("correlation matrix was not positive definite (min eigenvalue " +
       std::to_string(out.log.min_eigenvalue_before) + "); repaired with max entry change " +
       std::to_string(out.log.max_abs_change));
  out.matrix = std::move(m);
  return out;
}

/// Unit-diagonal symmetric matrix from all p(p-1)/2 pairwise estimates, with
/// positive-definiteness repair when needed.
inline AssembledCorrelation assemble_correlation(const PairCorrelations& pairs, std::size_t p,
                                                 double floor = kEigenvalueFloor) {
  require(p >= 1, "assemble_correlation: dimension must be positive");
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Index>(p), static_cast<Index>(p));
  for (const auto& [key, value] : pairs) {
    const auto [i, j] = key;
    require(i < j && j < p, "assemble_correlation: pair index out of range");
    require(std::isfinite(value) && std::abs(value) <= 1.0, "assemble_correlation: |lambda| exceeds 1");
    m(static_cast<Index>(i), static_cast<Index>(j)) = value;
    m(static_cast<Index>(j), static_cast<Index>(i)) = value;
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (!pairs.count({i, j}))
        throw std::invalid_argument("assemble_correlation: missing pair (" + std::to_string(i + 1) + "," +
                                    std::to_string(j + 1) + ")");
  return repair_correlation(m, floor);
}

}  // namespace copabc
