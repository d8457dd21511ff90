#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/adjust/adjustments.hpp"
#include "copabc/copula/correlation.hpp"
#include "copabc/copula/fit.hpp"
#include "copabc/copula/mle.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/diagnostics/density_grids.hpp"
#include "copabc/models/gk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace copabc {

/// Ground truth for synthetic experiments: every margin shares `margin`, and
/// V has constant off-diagonal `rho`.
struct GkTruth {
  GkParams margin{0.0, 0.02, 0.1, 0.15};
  double rho = 0.3;

  MultiGkModel model(std::size_t q, Index n) const {
    require(q >= 1, "GkTruth: q must be at least 1");
    require(q == 1 || (rho > -1.0 / double(q - 1) && rho < 1.0), "GkTruth: rho gives an indefinite V");
    MultiGkModel m;
    m.margins.assign(q, margin);
    m.n = n;
    const auto d = static_cast<Index>(q);
    m.V = Eigen::MatrixXd::Constant(d, d, rho);
    m.V.diagonal().setOnes();
    m.validate();
    return m;
  }
};

struct GkPipelineOptions {
  double quantile = 0.01;
  std::size_t scale_draws = 2000;  // simulations behind Sigma_0
  bool regression_adjust = true;
  std::size_t threads = 0;
  std::uint64_t seed = 1;
  // Wider than the library default: the copula normal scores run through a
  // piecewise-linear empirical cdf, and steps on the scale of single sample
  // gaps measure the curvature of its kinks rather than of the posterior.
  double hessian_step = 0.1;
};

/// Outcome of the Euclidean pilot: theta_0 (marginal means, made valid) and
/// Sigma_0 = Cov(s | theta_0).
struct GkPilot {
  ParameterVector theta0;
  Eigen::MatrixXd sigma0;
  RepairLog v_repair;
  DistanceSpec distance() const { return DistanceSpec::mahalanobis(sigma0); }
};

/// theta_0 from pilot marginal means. Means can leave the valid region
/// (B <= 0, k <= -1/2, an indefinite V); such components are moved back
/// with a warning.
inline ParameterVector gk_valid_theta(ParameterVector theta, std::size_t q, const GkBox& box, RepairLog* log) {
  for (std::size_t i = 0; i < q; ++i) {
    const Index b = static_cast<Index>(4 * i + 1), k = b + 2;
    if (!(theta(b) > 0.0)) {
      warn("pilot mean of B" + std::to_string(i + 1) + " is not positive; moved inside the box");
      theta(b) = box.B_lo + 1e-3 * (box.B_hi - box.B_lo);
    }
    if (!(theta(k) > -0.5)) {
      warn("pilot mean of k" + std::to_string(i + 1) + " is below -1/2; moved inside the box");
      theta(k) = std::max(box.k_lo, -0.5 + 1e-6);
    }
  }
  if (q >= 2) {
    PairCorrelations pc;
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i + 1; j < q; ++j)
        pc[{i, j}] = std::clamp(theta(static_cast<Index>(4 * q + gk_pair_index(q, i, j))), -1.0, 1.0);
    AssembledCorrelation v = assemble_correlation(pc, q);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i + 1; j < q; ++j)
        theta(static_cast<Index>(4 * q + gk_pair_index(q, i, j))) = v.matrix(static_cast<Index>(i), static_cast<Index>(j));
    if (log) *log = v.log;
  }
  return theta;
}

inline GkPilot gk_pilot(const ReferenceTable& table, const SummaryVector& s_obs, std::size_t q, Index n,
                        const GkPipelineOptions& opts = {}, const GkBox& box = {}) {
  const SummaryMap smap = gk_summary_map(q);
  CopulaFitOptions fo;
  fo.quantile = opts.quantile;
  fo.regression_adjust = opts.regression_adjust;
  fo.threads = opts.threads;
  const std::vector<MarginalEstimate> marginals = fit_marginals(table, s_obs, smap, fo);
  ParameterVector theta(static_cast<Index>(marginals.size()));
  for (std::size_t i = 0; i < marginals.size(); ++i) theta(static_cast<Index>(i)) = marginals[i].mean();
  GkPilot pilot;
  pilot.theta0 = gk_valid_theta(std::move(theta), q, box, &pilot.v_repair);
  const MultiGkModel m0 = gk_unpack(pilot.theta0, q, n);
  SeededRng rng = SeededRng(opts.seed, 0x7369676d61).derive(q);
  pilot.sigma0 = estimate_mahalanobis_scale([&] { return multigk_summaries(multigk_simulate(m0, rng)); },
                                            opts.scale_draws);
  return pilot;
}

inline CopulaFitOptions gk_fit_options(const GkPilot& pilot, const GkPipelineOptions& opts) {
  CopulaFitOptions fo;
  fo.quantile = opts.quantile;
  fo.regression_adjust = opts.regression_adjust;
  fo.threads = opts.threads;
  fo.distance = pilot.distance();
  return fo;
}

/// Log of the uniform box density for the parameters `subset`; -inf outside.
inline std::function<double(const Eigen::VectorXd&)> gk_box_log_prior(std::size_t q, const IndexSet& subset,
                                                                      const GkBox& box = {}) {
  std::vector<std::pair<double, double>> bounds;
  for (std::size_t i : subset) {
    require(i < 4 * q, "gk_box_log_prior: only margin parameters have a box");
    switch (i % 4) {
      case 0: bounds.emplace_back(box.A_lo, box.A_hi); break;
      case 1: bounds.emplace_back(box.B_lo, box.B_hi); break;
      case 2: bounds.emplace_back(box.g_lo, box.g_hi); break;
      default: bounds.emplace_back(box.k_lo, box.k_hi); break;
    }
  }
  return [bounds](const Eigen::VectorXd& x) {
    double lp = 0.0;
    for (std::size_t a = 0; a < bounds.size(); ++a) {
      const auto [lo, hi] = bounds[a];
      if (!(x(static_cast<Index>(a)) > lo && x(static_cast<Index>(a)) < hi))
        return -std::numeric_limits<double>::infinity();
      lp -= std::log(hi - lo);
    }
    return lp;
  };
}

/// q recovered from p = 4q + q(q-1)/2.
inline std::size_t gk_margins_from_param_count(std::size_t p) {
  for (std::size_t q = 1; gk_param_count(q) <= p; ++q)
    if (gk_param_count(q) == p) return q;
  throw std::invalid_argument("gk_margins_from_param_count: " + std::to_string(p) + " is not 4q + q(q-1)/2");
}

/// Grid around the copula margins of (i, j): from the 0.001 to 0.999
/// marginal quantiles, widened by a quarter of the range on each side.
inline GridSpec gk_pair_grid(const CopulaPosterior& post, std::size_t i, std::size_t j, Index nodes) {
  auto range = [](const MarginalEstimate& m) {
    const double lo = m.quantile(0.001), hi = m.quantile(0.999);
    const double pad = 0.25 * std::max(hi - lo, 1e-12);
    return std::pair{lo - pad, hi + pad};
  };
  GridSpec g;
  std::tie(g.x_min, g.x_max) = range(post.marginal(i));
  std::tie(g.y_min, g.y_max) = range(post.marginal(j));
  g.nx = g.ny = nodes;
  return g;
}

/// The five (theta_i, theta_j) estimates: rejection on the full summary
/// vector with regression, marginal, and both adjustments; the adjusted KDE
/// on s_(i,j); and the copula margin. `post` must be the full-dimensional fit.
inline std::map<std::string, GridDensity2D> gk_pair_grids(const ReferenceTable& table, const SummaryVector& s_obs,
                                                          const CopulaPosterior& post, std::size_t i, std::size_t j,
                                                          const GridSpec& grid, const CopulaFitOptions& fo) {
  const std::size_t q_dim = static_cast<std::size_t>(table.summary_dim());
  require(post.dim() == static_cast<std::size_t>(table.param_dim()), "gk_pair_grids: posterior must be full");
  const IndexSet all = full_subset(static_cast<Index>(q_dim));
  const Selection sel = select_rows(table, s_obs, all, fo.quantile, fo.distance);
  const WeightedSampleSet raw = gather_columns(table, sel.rows, {i, j}, all);
  const WeightedSampleSet reg = regression_adjust(raw, s_obs, all);
  std::map<std::string, GridDensity2D> out;
  auto add = [&](const std::string& label, Eigen::MatrixXd values, bool marginal) {
    if (marginal) {
      adjust_column_to_marginal(values.col(0), post.marginal(i));
      adjust_column_to_marginal(values.col(1), post.marginal(j));
    }
    GridDensity2D d = kde2d(values.col(0), values.col(1), raw.weights(), grid);
    d.label = label;
    out[label] = std::move(d);
  };
  add("regression", reg.params(), false);
  add("marginal", raw.params(), true);
  add("regression_marginal", reg.params(), true);
  const SummaryMap smap = gk_summary_map(gk_margins_from_param_count(post.dim()));
  CopulaFitOptions pair_opts = fo;
  pair_opts.regression_adjust = true;
  const ProjectedSample ps = pairwise_sample(table, s_obs, smap, i, j, pair_opts, &post.marginals());
  {
    GridDensity2D d = kde2d(ps.values.col(0), ps.values.col(1), ps.weights, grid);
    d.label = "pairwise_kde";
    out[d.label] = std::move(d);
  }
  GridDensity2D c = copula_bivariate_grid(post, i, j, grid);
  c.label = "copula";
  out[c.label] = std::move(c);
  return out;
}

struct GkCoverageReplicate {
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  bool covered = false;
};

struct GkCoverageResult {
  std::vector<GkCoverageReplicate> replicates;
  double rate = 0.0;
};

/// Approximate marginal MLE of theta[subset] from a subset copula fit,
/// after the pilot and Mahalanobis stages; a flat box prior.
inline MleResult gk_subset_mle(const ReferenceTable& table, const SummaryVector& s_obs, std::size_t q, Index n,
                               const IndexSet& subset, const GkPipelineOptions& opts, const GkBox& box = {}) {
  const GkPilot pilot = gk_pilot(table, s_obs, q, n, opts, box);
  const CopulaPosterior post = fit_copula_subset(table, s_obs, gk_summary_map(q), subset, gk_fit_options(pilot, opts));
  IndexSet local(subset.size());
  std::iota(local.begin(), local.end(), std::size_t{0});
  MleOptions mo;
  mo.seed = opts.seed;
  mo.hessian_step = opts.hessian_step;
  return approx_mle(post, gk_box_log_prior(q, subset, box), local, mo);
}

/// Repeats the pipeline on fresh observed datasets simulated at the truth,
/// all against one reference table, and counts how often the truth lies in
/// the estimate +/- 2 se box of theta[subset].
inline GkCoverageResult gk_coverage(const ReferenceTable& table, const MultiGkModel& truth, const IndexSet& subset,
                                    int replicates, const GkPipelineOptions& opts, const GkBox& box = {}) {
  require(replicates >= 1, "gk_coverage: need at least one replicate");
  const ParameterVector theta_true = gk_pack(truth);
  GkCoverageResult res;
  int hits = 0;
  for (int r = 0; r < replicates; ++r) {
    SeededRng rng = SeededRng(opts.seed, 0x636f76).derive(static_cast<std::uint64_t>(r));
    const SummaryVector s_obs = multigk_summaries(multigk_simulate(truth, rng));
    GkPipelineOptions ro = opts;
    ro.seed = rng.next_u64();
    const MleResult mle = gk_subset_mle(table, s_obs, truth.q(), truth.n, subset, ro, box);
    GkCoverageReplicate rep;
    rep.estimate = mle.estimate;
    rep.se = mle.se;
    rep.covered = mle.hessian_ok;
    for (std::size_t a = 0; a < subset.size() && rep.covered; ++a) {
      const double t = theta_true(static_cast<Index>(subset[a]));
      rep.covered = std::abs(t - mle.estimate(static_cast<Index>(a))) <= 2.0 * mle.se(static_cast<Index>(a));
    }
    hits += rep.covered ? 1 : 0;
    res.replicates.push_back(std::move(rep));
  }
  res.rate = double(hits) / double(replicates);
  return res;
}

}  // namespace copabc
