#pragma once

// Independent oracles for the variable-selection model, shared by the unit
// tests and the acceptance run.

#include "copabc/models/varsel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <numbers>

namespace copabc::oracle {

inline VarselModel small_model(std::uint64_t seed, Index n, std::size_t p) {
  SeededRng rng(seed);
  Eigen::MatrixXd raw(n, static_cast<Index>(p));
  for (Index c = 0; c < raw.cols(); ++c)
    for (Index r = 0; r < n; ++r) raw(r, c) = rng.normal();
  VarselModel m;
  m.X = standardized_design(raw);
  m.y.resize(n);
  for (Index r = 0; r < n; ++r) m.y(r) = 100.0 + 80.0 * m.X(r, 1) + 150.0 * rng.normal();
  m.validate();
  return m;
}

// log p(y | gamma) by quadrature: Gauss-Legendre over beta in a box of +/- 8
// conditional sd around the conditional mean, Gauss-Kronrod over log sigma^2.
inline double quadrature_log_evidence(const VarselModel& m, const BinaryVector& gamma) {
  const Eigen::MatrixXd Xg = select_columns(m.X, varsel_columns(gamma));
  const Index q = Xg.cols();
  const double n = double(m.n());
  const Eigen::MatrixXd xtx = Xg.transpose() * Xg;
  const Eigen::MatrixXd xtx_inv = xtx.inverse();
  // beta | sigma^2, y ~ N(n/(n+1) bhat, sigma^2 n/(n+1) (X'X)^{-1})
  const Eigen::VectorXd bhat = xtx.ldlt().solve(Xg.transpose() * m.y);
  const Eigen::VectorXd centre = n / (n + 1.0) * bhat;
  const double a = m.a_sigma, b = m.b_sigma;
  using GL = boost::math::quadrature::gauss<double, 40>;
  // log of the beta integral at fixed sigma^2, by a nested tensor rule
  auto log_inner = [&](double s2) {
    const Eigen::VectorXd sd = (s2 * n / (n + 1.0) * xtx_inv.diagonal()).cwiseSqrt();
    const Eigen::MatrixXd prior_prec = xtx / (n * s2);
    const double log_prior_norm =
        -0.5 * double(q) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log((n * s2 * xtx_inv).determinant());
    auto log_f = [&](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd r = m.y - Xg * beta;
      return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - r.squaredNorm() / (2.0 * s2) + log_prior_norm -
             0.5 * beta.dot(prior_prec * beta);
    };
    const double ref = log_f(centre);
    std::function<double(Index, Eigen::VectorXd&)> rec = [&](Index d, Eigen::VectorXd& beta) -> double {
      if (d == q) return std::exp(log_f(beta) - ref);
      const double lo = centre(d) - 8.0 * sd(d), hi = centre(d) + 8.0 * sd(d);
      return GL::integrate(
          [&](double t) {
            beta(d) = t;
            return rec(d + 1, beta);
          },
          lo, hi);
    };
    Eigen::VectorXd beta = centre;
    return ref + std::log(rec(0, beta));
  };
  // density of sigma^2 ~ IG(a, b) in u = log sigma^2 includes the Jacobian sigma^2
  auto log_outer = [&](double u) {
    const double s2 = std::exp(u);
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * u - b / s2 + u + log_inner(s2);
  };
  const double mode = std::log((b + 0.5 * m.y.squaredNorm()) / (a + 0.5 * n));
  const double ref = log_outer(mode);
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double u) { return std::exp(log_outer(u) - ref); }, mode - 6.0, mode + 6.0, 10, 1e-12);
  return ref + std::log(v);
}

}  // namespace copabc::oracle
