#pragma once

#include "copabc/copula/meta_gaussian.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/optim/nelder_mead.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <functional>
#include <limits>

namespace copabc {

struct MleOptions {
  int starts = 5;                // first start at the marginal medians
  double hessian_step = 1e-4;    // finite-difference step, as a fraction of each marginal IQR
  double simplex_step = 0.25;    // initial simplex edge, as a fraction of each marginal IQR
  std::uint64_t seed = 0;
  NelderMeadOptions optimizer{};
};

struct MleResult {
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  Eigen::MatrixXd hessian;  // of the objective at the estimate
  double objective = -std::numeric_limits<double>::infinity();
  bool converged = false;
  bool hessian_ok = false;  // -H positive definite
};

/// Central-difference Hessian with per-coordinate steps h.
inline Eigen::MatrixXd finite_difference_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                                 const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd H(d, d);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      std::array<double, 4> v{};
      int k = 0;
      for (double si : {1.0, -1.0})
        for (double sj : {1.0, -1.0}) {
          Eigen::VectorXd y = x;
          y(i) += si * h(i);
          y(j) += sj * h(j);
          v[static_cast<std::size_t>(k++)] = f(y);
        }
      H(i, j) = H(j, i) = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

/// Approximate marginal MLE of theta[subset]: maximises the copula marginal
/// density divided by the marginal prior. Standard errors come from the
/// inverse negative Hessian of that objective.
template <class Marginal>
MleResult approx_mle(const MetaGaussian<Marginal>& post,
                     const std::function<double(const Eigen::VectorXd&)>& log_prior, const IndexSet& subset,
                     const MleOptions& opts = {}) {
  require(opts.starts >= 1, "approx_mle: need at least one start");
  const MetaGaussian<Marginal> sub = post.sub(subset);
  const auto d = static_cast<Index>(subset.size());
  auto objective = [&](const Eigen::VectorXd& x) {
    const double lp = log_prior ? log_prior(x) : 0.0;
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    return sub.log_density(x) - lp;
  };
  auto negative = [&](const Eigen::VectorXd& x) { return -objective(x); };

  Eigen::VectorXd iqr(d), step(d);
  for (Index a = 0; a < d; ++a) {
    iqr(a) = sub.marginal(static_cast<std::size_t>(a)).iqr();
    if (!(iqr(a) > 0.0)) throw numerical_error("approx_mle: marginal has zero IQR");
    step(a) = opts.simplex_step * iqr(a);
  }

  static constexpr std::array<double, 3> kStartLevels{0.25, 0.5, 0.75};
  SeededRng rng(opts.seed, 0x6d6c65);
  MleResult best;
  for (int s = 0; s < opts.starts; ++s) {
    Eigen::VectorXd x0(d);
    for (Index a = 0; a < d; ++a) {
      const double level = s == 0 ? 0.5 : kStartLevels[static_cast<std::size_t>(rng.next_u64() % 3)];
      x0(a) = sub.marginal(static_cast<std::size_t>(a)).quantile(level);
    }
    const NelderMeadResult r = nelder_mead(negative, x0, step, opts.optimizer);
    if (-r.value > best.objective) {
      best.objective = -r.value;
      best.estimate = r.x;
      best.converged = r.converged;
    }
  }
  if (best.estimate.size() == 0 || !std::isfinite(best.objective))
    throw numerical_error("approx_mle: objective is not finite at any start");
  if (!best.converged) warn("approx_mle: optimiser did not converge; reporting the best point found");

  best.hessian = finite_difference_hessian(objective, best.estimate, opts.hessian_step * iqr);
  best.se = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  Eigen::LLT<Eigen::MatrixXd> llt(-best.hessian);
  if (best.hessian.allFinite() && llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    best.se = cov.diagonal().cwiseSqrt();
    best.hessian_ok = true;
  } else {
    warn("approx_mle: negative Hessian is not positive definite; standard errors unavailable");
  }
  return best;
}

}  // namespace copabc
