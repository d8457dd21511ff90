#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace copabc {

struct RegressionStats {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  double scale = 0.0;  // residual scale: MAD-based for Huber, sqrt(RSS/(n-p)) for least squares
  int iterations = 0;
  bool robust = false;  // false when the least-squares fallback was used
};

namespace detail {

inline void require_full_rank(const Eigen::MatrixXd& X, const char* who) {
  require(X.rows() > X.cols(), std::string(who) + ": need more rows than columns");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw numerical_error(std::string(who) + ": design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                          " < " + std::to_string(X.cols()) + ")");
}

inline double median_of(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m)));
}

// MAD scale of residuals about zero, as for regression M-estimation.
inline double mad_scale(const Eigen::VectorXd& r) {
  std::vector<double> a(static_cast<std::size_t>(r.size()));
  for (Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r(i));
  return median_of(std::move(a)) / 0.6744897501960817;
}

}  // namespace detail

/// Ordinary least squares with classical t-statistics.
inline RegressionStats least_squares_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require(X.rows() == y.size(), "least_squares_fit: X and y disagree on n");
  detail::require_full_rank(X, "least_squares_fit");
  const Index n = X.rows(), p = X.cols();
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  RegressionStats out;
  out.coef = ldlt.solve(X.transpose() * y);
  const Eigen::VectorXd r = y - X * out.coef;
  const double s2 = r.squaredNorm() / double(n - p);
  out.scale = std::sqrt(s2);
  out.se = (s2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p)).diagonal()).cwiseSqrt();
  if (!(out.scale > 0.0)) throw simulation_failure("least_squares_fit: zero residual variance");
  out.t = out.coef.cwiseQuotient(out.se);
  return out;
}

struct HuberOptions {
  double c = 1.345;
  int max_iterations = 50;
  double tolerance = 1e-6;  // on the relative change of the residual vector
};

/// Huber M-estimate by iteratively reweighted least squares, scale
/// re-estimated by the residual MAD at every step, with t-statistics from
/// the sandwich variance
///   s^2 [sum psi(r/s)^2 / (n - p)] / [mean psi'(r/s)]^2 (X'X)^{-1}.
/// Falls back to least squares with a warning if the iteration does not
/// settle or the robust scale degenerates.
inline RegressionStats huber_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HuberOptions& opts = {}) {
  require(X.rows() == y.size(), "huber_fit: X and y disagree on n");
  require(opts.c > 0.0 && opts.max_iterations >= 1, "huber_fit: bad options");
  const RegressionStats ls = least_squares_fit(X, y);
  const Index n = X.rows(), p = X.cols();
  auto fallback = [&](const std::string& why) {
    warn("huber_fit: " + why + "; using least-squares t-statistics");
    return ls;
  };

  Eigen::VectorXd beta = ls.coef;
  Eigen::VectorXd r = y - X * beta;
  double s = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations && !converged; ++it) {
    s = detail::mad_scale(r);
    if (!(s > 0.0)) return fallback("zero MAD scale");
    Eigen::VectorXd w(n);
    for (Index i = 0; i < n; ++i) {
      const double u = std::abs(r(i)) / s;
      w(i) = u <= opts.c ? 1.0 : opts.c / u;
    }
    const Eigen::MatrixXd xw = w.cwiseSqrt().asDiagonal() * X;
    beta = xw.colPivHouseholderQr().solve(w.cwiseSqrt().cwiseProduct(y));
    const Eigen::VectorXd r_new = y - X * beta;
    const double denom = std::max(r.squaredNorm(), 1e-300);
    converged = (r_new - r).squaredNorm() / denom <= opts.tolerance * opts.tolerance;
    r = r_new;
  }
  if (!converged) return fallback("IRLS did not converge in " + std::to_string(opts.max_iterations) + " iterations");
  s = detail::mad_scale(r);
  if (!(s > 0.0)) return fallback("zero MAD scale");

  double psi2 = 0.0, dpsi = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double u = r(i) / s;
    const double psi = std::clamp(u, -opts.c, opts.c);
    psi2 += psi * psi;
    dpsi += std::abs(u) <= opts.c ? 1.0 : 0.0;
  }
  dpsi /= double(n);
  if (!(dpsi > 0.0)) return fallback("no residual inside the Huber threshold");
  const double factor = s * s * (psi2 / double(n - p)) / (dpsi * dpsi);
  const Eigen::MatrixXd inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  RegressionStats out;
  out.coef = beta;
  out.se = (factor * inv.diagonal()).cwiseSqrt();
  out.t = out.coef.cwiseQuotient(out.se);
  out.scale = s;
  out.iterations = it;
  out.robust = true;
  return out;
}

}  // namespace copabc
