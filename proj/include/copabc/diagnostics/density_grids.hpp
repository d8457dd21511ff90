#pragma once

#include "copabc/copula/marginal.hpp"
#include "copabc/copula/meta_gaussian.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/diagnostics/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace copabc {

namespace detail {

// Kernel matrix K(a, k) = phi((t_a - x_k)/h)/h.
inline Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::VectorXd& nodes, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd k(nodes.size(), x.size());
  for (Index c = 0; c < x.size(); ++c)
    for (Index a = 0; a < nodes.size(); ++a) k(a, c) = normal_pdf((nodes(a) - x(c)) / h) / h;
  return k;
}

inline double silverman_bandwidth_of(const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  const auto n = static_cast<std::size_t>(x.size());
  return MarginalEstimate(std::span<const double>(x.data(), n), std::span<const double>(w.data(), n)).bandwidth();
}

}  // namespace detail

/// Weighted product-Gaussian KDE with per-axis Silverman bandwidths,
/// evaluated on the grid and normalised there.
inline GridDensity2D kde2d(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& weights, const GridSpec& g) {
  g.validate();
  require(x.size() == y.size() && x.size() == weights.size(), "kde2d: input lengths differ");
  require(x.size() >= 10, "kde2d: need at least 10 samples");
  const Eigen::VectorXd w = weights / weights.sum();
  const double hx = detail::silverman_bandwidth_of(x, w);
  const double hy = detail::silverman_bandwidth_of(y, w);
  const Eigen::MatrixXd kx = detail::gaussian_kernel_matrix(g.xs(), x, hx);
  const Eigen::MatrixXd ky = detail::gaussian_kernel_matrix(g.ys(), y, hy);
  Eigen::MatrixXd raw = kx * w.asDiagonal() * ky.transpose();
  return GridDensity2D::normalised(g, std::move(raw), "kde");
}

inline GridDensity2D kde2d(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const GridSpec& g) {
  return kde2d(x, y, Eigen::VectorXd::Ones(x.size()), g);
}

/// Bivariate meta-Gaussian density of (theta_i, theta_j) on the grid.
/// `raw_integral` of the result is the grid integral before normalisation.
template <class Marginal>
GridDensity2D copula_bivariate_grid(const MetaGaussian<Marginal>& post, std::size_t i, std::size_t j,
                                    const GridSpec& g) {
  g.validate();
  require(i < post.dim() && j < post.dim() && i != j, "copula_bivariate_grid: bad pair");
  const double rho = post.correlation()(static_cast<Index>(i), static_cast<Index>(j));
  const Marginal& mi = post.marginal(i);
  const Marginal& mj = post.marginal(j);
  const Eigen::VectorXd xs = g.xs(), ys = g.ys();
  Eigen::VectorXd ex(g.nx), lx(g.nx), ey(g.ny), ly(g.ny);
  for (Index a = 0; a < g.nx; ++a) ex(a) = mi.normal_score(xs(a)), lx(a) = mi.log_density(xs(a));
  for (Index b = 0; b < g.ny; ++b) ey(b) = mj.normal_score(ys(b)), ly(b) = mj.log_density(ys(b));
  const double one_m = 1.0 - rho * rho;
  const double log_norm = -0.5 * std::log(one_m);
  Eigen::MatrixXd raw(g.nx, g.ny);
  for (Index b = 0; b < g.ny; ++b)
    for (Index a = 0; a < g.nx; ++a) {
      const double q = (rho * rho * (ex(a) * ex(a) + ey(b) * ey(b)) - 2.0 * rho * ex(a) * ey(b)) / (2.0 * one_m);
      const double l = log_norm - q + lx(a) + ly(b);
      raw(a, b) = std::isfinite(l) ? std::exp(l) : 0.0;
    }
  return GridDensity2D::normalised(g, std::move(raw), "copula");
}

inline constexpr double kKlDensityFloor = 1e-300;

/// Trapezoidal estimate of KL(p || q) on a shared grid; q is floored at
/// `floor` inside the logarithm and the result is clipped at zero.
inline double kl_grid(const GridDensity2D& p, const GridDensity2D& q, double floor = kKlDensityFloor) {
  require(p.grid == q.grid, "kl_grid: densities are on different grids");
  require(floor > 0.0, "kl_grid: floor must be positive");
  const GridSpec& g = p.grid;
  Eigen::MatrixXd integrand(g.nx, g.ny);
  for (Index b = 0; b < g.ny; ++b)
    for (Index a = 0; a < g.nx; ++a) {
      const double pv = p.values(a, b);
      integrand(a, b) = pv > 0.0 ? pv * (std::log(pv) - std::log(std::max(q.values(a, b), floor))) : 0.0;
    }
  return std::max(0.0, trapezoid_integral(g, integrand));
}

}  // namespace copabc
