#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/summary_map.hpp"
#include "copabc/diagnostics/grid.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace copabc {

/// y ~ N_p(theta, sigma0^2 I) under the banana-shaped prior
///   theta ~ N_p(0, diag(100, 1, ..., 1)),  theta_2 -> theta_2 + b theta_1^2 - 100 b.
/// Summaries are the data themselves.
struct TwistedNormalModel {
  std::size_t p = 2;
  double b = 0.1;
  double sigma0 = 1.0;
  SummaryVector y_obs;

  static TwistedNormalModel make(std::size_t p, double b = 0.1, double sigma0 = 1.0) {
    TwistedNormalModel m;
    m.p = p;
    m.b = b;
    m.sigma0 = sigma0;
    m.y_obs = SummaryVector::Zero(static_cast<Index>(p));
    m.y_obs(0) = 10.0;
    m.validate();
    return m;
  }

  void validate() const {
    require(p >= 2, "TwistedNormalModel: p must be at least 2");
    require(sigma0 > 0.0 && std::isfinite(sigma0), "TwistedNormalModel: sigma0 must be positive");
    require(std::isfinite(b), "TwistedNormalModel: b must be finite");
    require(y_obs.size() == static_cast<Index>(p), "TwistedNormalModel: y_obs must have length p");
  }

  std::string id() const {
    return "twisted-normal(p=" + std::to_string(p) + ",b=" + std::to_string(b) + ",sigma0=" + std::to_string(sigma0) +
           ")";
  }
};

inline ParameterVector twisted_prior_sample(const TwistedNormalModel& m, SeededRng& rng) {
  ParameterVector theta(static_cast<Index>(m.p));
  theta(0) = 10.0 * rng.normal();
  for (Index j = 1; j < theta.size(); ++j) theta(j) = rng.normal();
  theta(1) += m.b * theta(0) * theta(0) - 100.0 * m.b;
  return theta;
}

/// Unnormalised log prior. Coordinates j >= 3 carry the N(0,1) term
/// -theta_j^2/2 of the sampling construction above.
inline double twisted_log_prior_density(const TwistedNormalModel& m, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  require(theta.size() == static_cast<Index>(m.p), "twisted_log_prior_density: dimension mismatch");
  const double t1 = theta(0);
  const double r = theta(1) - m.b * t1 * t1 + 100.0 * m.b;
  double lp = -t1 * t1 / 200.0 - 0.5 * r * r;
  for (Index j = 2; j < theta.size(); ++j) lp -= 0.5 * theta(j) * theta(j);
  return lp;
}

inline SummaryVector toy_simulate(const TwistedNormalModel& m, const ParameterVector& theta, SeededRng& rng) {
  require(theta.size() == static_cast<Index>(m.p), "toy_simulate: dimension mismatch");
  SummaryVector s(theta.size());
  for (Index j = 0; j < s.size(); ++j) s(j) = theta(j) + m.sigma0 * rng.normal();
  return s;
}

/// s_(i) = {s_i}, except s_(2) = {s_1, s_2}; pairs use unions.
inline SummaryMap toy_summary_map(std::size_t p) {
  std::vector<IndexSet> uni(p);
  for (std::size_t i = 0; i < p; ++i) uni[i] = {i};
  uni[1] = {0, 1};
  return SummaryMap(p, std::move(uni));
}

inline SimulatorModel toy_simulator_model(const TwistedNormalModel& m) {
  SimulatorModel sm;
  sm.id = m.id();
  sm.param_dim = m.p;
  sm.summary_dim = m.p;
  sm.sample_prior = [m](SeededRng& rng) { return twisted_prior_sample(m, rng); };
  sm.simulate = [m](const ParameterVector& theta, SeededRng& rng) { return toy_simulate(m, theta, rng); };
  sm.log_prior_density = [m](const ParameterVector& theta) { return twisted_log_prior_density(m, theta); };
  return sm;
}

namespace detail {

// Unnormalised log posterior of (theta_1, theta_2).
inline double toy_log_post12(const TwistedNormalModel& m, double t1, double t2) {
  const double v = m.sigma0 * m.sigma0;
  const double r = t2 - m.b * t1 * t1 + 100.0 * m.b;
  const double e1 = m.y_obs(0) - t1, e2 = m.y_obs(1) - t2;
  return -t1 * t1 / 200.0 - 0.5 * r * r - (e1 * e1 + e2 * e2) / (2.0 * v);
}

// Marginal of theta_1 with theta_2 integrated out in closed form.
inline double toy_log_post1(const TwistedNormalModel& m, double t1) {
  const double v = m.sigma0 * m.sigma0;
  const double e1 = m.y_obs(0) - t1;
  const double c = m.y_obs(1) - m.b * t1 * t1 + 100.0 * m.b;
  return -t1 * t1 / 200.0 - e1 * e1 / (2.0 * v) - c * c / (2.0 * (1.0 + v));
}

// Conjugate posterior of theta_j, j >= 3: prior N(0,1), likelihood N(y_j; theta_j, sigma0^2).
inline std::pair<double, double> toy_conjugate(const TwistedNormalModel& m, std::size_t j) {
  const double v = m.sigma0 * m.sigma0;
  const double prec = 1.0 + 1.0 / v;
  return {m.y_obs(static_cast<Index>(j)) / v / prec, 1.0 / std::sqrt(prec)};
}

// Mean and sd of theta_1 from fine quadrature of its closed-form marginal.
inline std::pair<double, double> toy_moments1(const TwistedNormalModel& m) {
  const double v = m.sigma0 * m.sigma0;
  const double prec = 1.0 / 100.0 + 1.0 / v;  // ignoring the theta_2 coupling, only for the range
  const double mu = m.y_obs(0) / v / prec, sd = 1.0 / std::sqrt(prec);
  const int n = 20001;
  const double lo = mu - 40.0 * sd, hi = mu + 40.0 * sd, h = (hi - lo) / (n - 1);
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) mx = std::max(mx, toy_log_post1(m, lo + k * h));
  double s0 = 0, s1 = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    const double t = lo + k * h;
    const double w = std::exp(toy_log_post1(m, t) - mx) * ((k == 0 || k == n - 1) ? 0.5 : 1.0);
    s0 += w, s1 += w * t, s2 += w * t * t;
  }
  const double mean = s1 / s0;
  return {mean, std::sqrt(std::max(s2 / s0 - mean * mean, 0.0))};
}

// Unnormalised log marginal of theta_2 on `ts`, integrating theta_1 numerically.
inline Eigen::VectorXd toy_log_post2(const TwistedNormalModel& m, const Eigen::VectorXd& ts) {
  const auto [mu1, sd1] = toy_moments1(m);
  const int n = 4001;
  const double lo = mu1 - 12.0 * sd1, hi = mu1 + 12.0 * sd1, h = (hi - lo) / (n - 1);
  Eigen::VectorXd out(ts.size());
  for (Index a = 0; a < ts.size(); ++a) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) mx = std::max(mx, toy_log_post12(m, lo + k * h, ts(a)));
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
      acc += std::exp(toy_log_post12(m, lo + k * h, ts(a)) - mx) * ((k == 0 || k == n - 1) ? 0.5 : 1.0);
    out(a) = mx + std::log(acc * h);
  }
  return out;
}

inline std::pair<double, double> toy_moments2(const TwistedNormalModel& m) {
  const auto [mu1, sd1] = toy_moments1(m);
  const double centre = 0.5 * (m.b * mu1 * mu1 - 100.0 * m.b + m.y_obs(1));
  const double half = 30.0 + 8.0 * std::abs(m.b * mu1) * sd1;
  const int n = 4001;
  const Eigen::VectorXd ts = Eigen::VectorXd::LinSpaced(n, centre - half, centre + half);
  const Eigen::VectorXd lp = toy_log_post2(m, ts);
  const Eigen::ArrayXd w = (lp.array() - lp.maxCoeff()).exp();
  const double s0 = w.sum();
  const double mean = (w * ts.array()).sum() / s0;
  const double var = (w * (ts.array() - mean).square()).sum() / s0;
  return {mean, std::sqrt(var)};
}

}  // namespace detail

/// Exact posterior mean and sd of theta_i (0-based).
inline std::pair<double, double> toy_posterior_moments(const TwistedNormalModel& m, std::size_t i) {
  m.validate();
  require(i < m.p, "toy_posterior_moments: index out of range");
  if (i == 0) return detail::toy_moments1(m);
  if (i == 1) return detail::toy_moments2(m);
  return detail::toy_conjugate(m, i);
}

/// Grid covering posterior mean +/- `width` sd on each axis.
inline GridSpec toy_truth_grid_spec(const TwistedNormalModel& m, std::size_t i, std::size_t j, Index nodes = 200,
                                    double width = 6.0) {
  const auto [mi, si] = toy_posterior_moments(m, i);
  const auto [mj, sj] = toy_posterior_moments(m, j);
  GridSpec g;
  g.x_min = mi - width * si;
  g.x_max = mi + width * si;
  g.y_min = mj - width * sj;
  g.y_max = mj + width * sj;
  g.nx = g.ny = nodes;
  return g;
}

/// The exact (theta_i, theta_j) posterior margin on a grid, normalised by the
/// trapezoid rule. Coordinates beyond the first two are independent a
/// posteriori, so every pair reduces to closed forms plus at most one 1-D
/// numerical integral (for theta_2 paired with j >= 3).
inline GridDensity2D toy_posterior_grid(const TwistedNormalModel& m, std::size_t i, std::size_t j,
                                        const GridSpec& g) {
  m.validate();
  g.validate();
  require(i < m.p && j < m.p && i != j, "toy_posterior_grid: bad pair");
  const Eigen::VectorXd xs = g.xs(), ys = g.ys();
  Eigen::MatrixXd logv(g.nx, g.ny);

  auto log_marginal = [&](std::size_t k, const Eigen::VectorXd& ts) -> Eigen::VectorXd {
    Eigen::VectorXd out(ts.size());
    if (k == 0) {
      for (Index a = 0; a < ts.size(); ++a) out(a) = detail::toy_log_post1(m, ts(a));
    } else if (k == 1) {
      out = detail::toy_log_post2(m, ts);
    } else {
      const auto [mu, sd] = detail::toy_conjugate(m, k);
      for (Index a = 0; a < ts.size(); ++a) out(a) = -0.5 * std::pow((ts(a) - mu) / sd, 2);
    }
    return out;
  };

  const std::size_t lo = std::min(i, j), hi = std::max(i, j);
  if (lo == 0 && hi == 1) {
    for (Index a = 0; a < g.nx; ++a)
      for (Index c = 0; c < g.ny; ++c)
        logv(a, c) = i == 0 ? detail::toy_log_post12(m, xs(a), ys(c)) : detail::toy_log_post12(m, ys(c), xs(a));
  } else {
    const Eigen::VectorXd lx = log_marginal(i, xs), ly = log_marginal(j, ys);
    logv = lx.replicate(1, g.ny) + ly.transpose().replicate(g.nx, 1);
  }
  const double mx = logv.maxCoeff();
  return GridDensity2D::normalised(g, (logv.array() - mx).exp().matrix(), "truth");
}

}  // namespace copabc
