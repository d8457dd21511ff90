#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace copabc {

namespace detail {

// Recursive Gauss-Kronrod bisection to an absolute error target.
template <class F>
double adaptive_integral(const F& f, double lo, double hi, double abs_tol, int depth) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, lo, hi, 0, 0.0, &err);
  if (err <= std::max(abs_tol, 1e-14 * std::abs(v)) || depth >= 20) return v;
  const double mid = 0.5 * (lo + hi);
  const double tol = std::max(0.5 * abs_tol, 1e-16);
  return adaptive_integral(f, lo, mid, tol, depth + 1) + adaptive_integral(f, mid, hi, tol, depth + 1);
}

}  // namespace detail

/// P(Z_1 > a, Z_2 > b) for a standard bivariate normal with correlation rho,
/// by the Plackett form
///   Phibar(a) Phibar(b) + (1/2pi) int_0^{asin rho} exp(-(a^2 - 2ab sin t + b^2) / (2 cos^2 t)) dt.
inline double bvn_upper_orthant(double a, double b, double rho) {
  require(!std::isnan(a) && !std::isnan(b), "bvn_upper_orthant: NaN threshold");
  require(rho >= -1.0 && rho <= 1.0, "bvn_upper_orthant: rho outside [-1, 1]");
  if (rho == 1.0) return normal_sf(std::max(a, b));
  if (rho == -1.0) return std::max(0.0, normal_sf(a) - normal_cdf(b));
  const double base = normal_sf(a) * normal_sf(b);
  if (rho == 0.0 || std::isinf(a) || std::isinf(b)) return base;
  auto integrand = [&](double t) {
    const double sn = std::sin(t), c = std::cos(t);
    return std::exp(-(a * a - 2.0 * a * b * sn + b * b) / (2.0 * c * c));
  };
  const double integral = detail::adaptive_integral(integrand, 0.0, std::asin(rho), 1e-13, 0);
  return std::clamp(base + integral / (2.0 * std::numbers::pi), 0.0, 1.0);
}

inline constexpr double kLambdaSearchMargin = 1e-9;

/// Latent correlation rho with P(gamma_i = 1, gamma_j = 1) = joint11 when
/// gamma_k = 1{Z_k > Phi^{-1}(p_k)} and p_k = P(gamma_k = 0). Solved by
/// bisection; an unattainable joint11 is clamped to the nearest bound.
inline double solve_lambda_ij(double p_i, double p_j, double joint11) {
  require(p_i > 0.0 && p_i < 1.0 && p_j > 0.0 && p_j < 1.0, "solve_lambda_ij: probabilities must lie in (0,1)");
  require(joint11 >= 0.0 && joint11 <= 1.0 && !std::isnan(joint11), "solve_lambda_ij: joint11 must lie in [0,1]");
  const double a = normal_quantile(p_i), b = normal_quantile(p_j);
  double lo = -1.0 + kLambdaSearchMargin, hi = 1.0 - kLambdaSearchMargin;
  const double f_lo = bvn_upper_orthant(a, b, lo), f_hi = bvn_upper_orthant(a, b, hi);
  if (joint11 <= f_lo) {
    warn("solve_lambda_ij: joint frequency " + std::to_string(joint11) + " below attainable range; clamped");
    return lo;
  }
  if (joint11 >= f_hi) {
    warn("solve_lambda_ij: joint frequency " + std::to_string(joint11) + " above attainable range; clamped");
    return hi;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = bvn_upper_orthant(a, b, mid);
    if (f < joint11) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace copabc
