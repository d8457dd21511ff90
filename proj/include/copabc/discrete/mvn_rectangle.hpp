#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace copabc {

struct QmcOptions {
  int shifts = 10;                // independent random shifts; the error estimate uses their spread
  Index min_points = 256;         // lattice points per shift on the first pass
  Index max_points = 1 << 15;     // cap on points per shift; doubled until the target is met
  double relative_error = 0.01;   // stop once se <= relative_error * estimate
  std::uint64_t seed = 0;
};

struct RectangleProbability {
  double value = 0.0;
  double standard_error = 0.0;
  Index points = 0;  // total integrand evaluations
};

namespace detail {

inline const std::vector<double>& richtmyer_generators() {
  static const std::vector<double> gens = [] {
    std::vector<double> out;
    for (int n = 2; out.size() < 128; ++n) {
      bool prime = true;
      for (int d = 2; d * d <= n; ++d)
        if (n % d == 0) {
          prime = false;
          break;
        }
      if (prime) {
        const double r = std::sqrt(static_cast<double>(n));
        out.push_back(r - std::floor(r));
      }
    }
    return out;
  }();
  return gens;
}

// Genz's sequential conditioning integrand at w in [0,1]^(d-1).
inline double genz_integrand(const Eigen::MatrixXd& chol, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const double* w, Eigen::VectorXd& y) {
  const Index d = chol.rows();
  double s = 0.0;
  double lo = normal_cdf(lower(0) / chol(0, 0));
  double hi = normal_cdf(upper(0) / chol(0, 0));
  double f = hi - lo;
  for (Index i = 1; i < d && f > 0.0; ++i) {
    const double u = std::clamp(lo + w[i - 1] * (hi - lo), 1e-300, 1.0 - 1e-16);
    y(i - 1) = normal_quantile(u);
    s = chol.row(i).head(i).dot(y.head(i));
    lo = normal_cdf((lower(i) - s) / chol(i, i));
    hi = normal_cdf((upper(i) - s) / chol(i, i));
    f *= std::max(hi - lo, 0.0);
  }
  return f;
}

// Genz-Bretz variable prioritisation: at each step the remaining variable with
// the smallest conditional interval probability goes next, conditioning on
// truncated means. Returns the Cholesky factor and limits in the new order.
inline void genz_reorder(const Eigen::MatrixXd& corr, Eigen::VectorXd& lower, Eigen::VectorXd& upper,
                         Eigen::MatrixXd& chol) {
  const Index d = corr.rows();
  Eigen::MatrixXd sigma = corr;
  chol = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
  for (Index i = 0; i < d; ++i) {
    Index best = i;
    double best_prob = std::numeric_limits<double>::infinity();
    for (Index j = i; j < d; ++j) {
      const double var = sigma(j, j) - chol.row(j).head(i).squaredNorm();
      if (!(var > 0.0)) throw numerical_error("mvn_rectangle_probability: correlation is not PD");
      const double sd = std::sqrt(var), s = chol.row(j).head(i).dot(y.head(i));
      const double prob = normal_cdf((upper(j) - s) / sd) - normal_cdf((lower(j) - s) / sd);
      if (prob < best_prob) best_prob = prob, best = j;
    }
    if (best != i) {
      sigma.row(i).swap(sigma.row(best));
      sigma.col(i).swap(sigma.col(best));
      chol.row(i).swap(chol.row(best));
      std::swap(lower(i), lower(best));
      std::swap(upper(i), upper(best));
    }
    const double var = sigma(i, i) - chol.row(i).head(i).squaredNorm();
    if (!(var > 0.0)) throw numerical_error("mvn_rectangle_probability: correlation is not PD");
    chol(i, i) = std::sqrt(var);
    for (Index j = i + 1; j < d; ++j)
      chol(j, i) = (sigma(j, i) - chol.row(j).head(i).dot(chol.row(i).head(i))) / chol(i, i);
    const double s = chol.row(i).head(i).dot(y.head(i));
    const double a = (lower(i) - s) / chol(i, i), b = (upper(i) - s) / chol(i, i);
    const double mass = normal_cdf(b) - normal_cdf(a);
    const double pa = std::isfinite(a) ? normal_pdf(a) : 0.0, pb = std::isfinite(b) ? normal_pdf(b) : 0.0;
    if (mass > 1e-300) {
      y(i) = (pa - pb) / mass;
    } else {
      y(i) = std::isfinite(a) ? a : (std::isfinite(b) ? b : 0.0);
    }
  }
}

}  // namespace detail

/// P(lower < Z < upper) for Z ~ N(0, corr) by randomly shifted rank-1
/// lattice rules (Richtmyer generators) over Genz's separated integrand,
/// with the baker's transform and Genz-Bretz variable prioritisation. Deterministic for a fixed seed.
inline RectangleProbability mvn_rectangle_probability(const Eigen::MatrixXd& corr, const Eigen::VectorXd& lower,
                                                      const Eigen::VectorXd& upper, const QmcOptions& opts = {}) {
  const Index d = corr.rows();
  require(d >= 1 && corr.cols() == d && lower.size() == d && upper.size() == d,
          "mvn_rectangle_probability: dimension mismatch");
  require(opts.shifts >= 2 && opts.min_points >= 1 && opts.max_points >= opts.min_points,
          "mvn_rectangle_probability: bad QMC options");
  for (Index i = 0; i < d; ++i)
    require(!(lower(i) > upper(i)) && !std::isnan(lower(i)) && !std::isnan(upper(i)),
            "mvn_rectangle_probability: invalid limits");
  require(static_cast<std::size_t>(d) <= detail::richtmyer_generators().size() + 1,
          "mvn_rectangle_probability: dimension too large");

  const Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) throw numerical_error("mvn_rectangle_probability: correlation is not PD");
  Eigen::VectorXd lo = lower, hi = upper;
  Eigen::MatrixXd chol;
  detail::genz_reorder(corr, lo, hi, chol);

  RectangleProbability out;
  if (d == 1) {
    out.value = normal_cdf(hi(0)) - normal_cdf(lo(0));
    out.points = 1;
    return out;
  }

  const auto& gens = detail::richtmyer_generators();
  const Index dim = d - 1;
  SeededRng rng(opts.seed, 0x716d63);
  std::vector<std::vector<double>> shifts(static_cast<std::size_t>(opts.shifts), std::vector<double>(dim));
  for (auto& sh : shifts)
    for (double& v : sh) v = rng.uniform();

  Eigen::VectorXd y(d);
  std::vector<double> w(static_cast<std::size_t>(dim));
  Index n = opts.min_points;
  while (true) {
    std::vector<double> est(shifts.size());
    for (std::size_t k = 0; k < shifts.size(); ++k) {
      double acc = 0.0;
      for (Index j = 1; j <= n; ++j) {
        for (Index c = 0; c < dim; ++c) {
          double x = double(j) * gens[static_cast<std::size_t>(c)] + shifts[k][static_cast<std::size_t>(c)];
          x -= std::floor(x);
          w[static_cast<std::size_t>(c)] = std::abs(2.0 * x - 1.0);
        }
        acc += detail::genz_integrand(chol, lo, hi, w.data(), y);
      }
      est[k] = acc / double(n);
      out.points += n;
    }
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= double(est.size());
    double ss = 0.0;
    for (double e : est) ss += (e - mean) * (e - mean);
    const double se = std::sqrt(ss / double(est.size() - 1) / double(est.size()));
    out.value = mean;
    out.standard_error = se;
    if (se <= opts.relative_error * mean || n >= opts.max_points) break;
    n = std::min(2 * n, opts.max_points);
  }
  return out;
}

}  // namespace copabc
