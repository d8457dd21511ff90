#pragma once

#include "copabc/core/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace copabc {

struct NelderMeadOptions {
  int max_evaluations = 4000;
  double f_tolerance = 1e-10;  // spread of simplex values
  double x_tolerance = 1e-6;   // simplex diameter relative to the initial step
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free minimisation with the standard reflection (1), expansion
/// (2), contraction (1/2) and shrink (1/2) coefficients. Non-finite values
/// are treated as +inf, so infeasible regions simply repel the simplex.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                    const NelderMeadOptions& opts = {}) {
  const Eigen::Index d = x0.size();
  require(d >= 1 && step.size() == d, "nelder_mead: bad starting point or step");
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(d + 1));
  for (Eigen::Index k = 0; k < d; ++k) pts[static_cast<std::size_t>(k + 1)](k) += step(k);
  for (std::size_t k = 0; k < pts.size(); ++k) vals[k] = eval(pts[k]);
  const double scale0 = step.cwiseAbs().maxCoeff();

  std::vector<std::size_t> order(pts.size());
  while (res.evaluations < opts.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t k : order) diameter = std::max(diameter, (pts[k] - pts[best]).cwiseAbs().maxCoeff());
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(vals[worst]) && spread <= opts.f_tolerance * (std::abs(vals[best]) + 1e-8) &&
        diameter <= opts.x_tolerance * scale0) {
      res.converged = true;
      break;
    }
    if (diameter <= 1e-6 * opts.x_tolerance * scale0) {
      res.converged = std::isfinite(vals[best]);
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k : order)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t k : order) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      vals[k] = eval(pts[k]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace copabc
