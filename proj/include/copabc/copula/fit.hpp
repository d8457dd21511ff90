#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/adjust/adjustments.hpp"
#include "copabc/copula/correlation.hpp"
#include "copabc/copula/marginal.hpp"
#include "copabc/copula/meta_gaussian.hpp"
#include "copabc/copula/normal_scores.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/core/summary_map.hpp"

#include <numeric>
#include <vector>

namespace copabc {

struct CopulaFitOptions {
  double quantile = 0.01;
  DistanceSpec distance = DistanceSpec::euclidean();
  bool regression_adjust = true;
  // Map each pairwise column onto its univariate marginal estimate before the
  // correlation is computed. Off gives the literal raw-sample variant.
  bool marginal_adjust_pairs = true;
  std::size_t threads = 0;
};

/// ABC sample restricted to some parameter columns, after optional regression adjustment.
struct ProjectedSample {
  Eigen::MatrixXd values;   // n x |param_cols|
  Eigen::VectorXd weights;  // normalised
  double threshold = 0.0;
  bool equal_weights = true;
};

inline ProjectedSample projected_abc_sample(const ReferenceTable& table, const SummaryVector& s_obs,
                                            const IndexSet& summary_subset, const IndexSet& param_cols,
                                            const CopulaFitOptions& opts) {
  const Selection sel = select_rows(table, s_obs, summary_subset, opts.quantile, opts.distance);
  WeightedSampleSet sample = gather_columns(table, sel.rows, param_cols, summary_subset);
  if (opts.regression_adjust) {
    SummaryVector s_sub(static_cast<Index>(summary_subset.size()));
    for (std::size_t k = 0; k < summary_subset.size(); ++k)
      s_sub(static_cast<Index>(k)) = s_obs(static_cast<Index>(summary_subset[k]));
    sample = regression_adjust(sample, s_sub, full_subset(s_sub.size()));
  }
  ProjectedSample out;
  out.equal_weights = sample.has_equal_weights(1e-9);
  out.values = sample.params();
  out.weights = sample.weights();
  out.threshold = sel.threshold;
  return out;
}

/// Univariate step: ABC on s_(i), optional regression adjustment, then the
/// nonparametric marginal estimate of theta_i.
inline MarginalEstimate fit_marginal(const ReferenceTable& table, const SummaryVector& s_obs, const SummaryMap& smap,
                                     std::size_t i, const CopulaFitOptions& opts) {
  const ProjectedSample ps = projected_abc_sample(table, s_obs, smap.univariate(i), {i}, opts);
  const auto n = static_cast<std::size_t>(ps.values.rows());
  std::span<const double> values(ps.values.data(), n);
  if (ps.equal_weights) return MarginalEstimate(values);
  return MarginalEstimate(values, std::span<const double>(ps.weights.data(), n));
}

inline std::vector<MarginalEstimate> fit_marginals(const ReferenceTable& table, const SummaryVector& s_obs,
                                                   const SummaryMap& smap, const CopulaFitOptions& opts) {
  const std::size_t p = smap.param_dim();
  require(static_cast<Index>(p) == table.param_dim(), "fit_copula: summary map and table disagree on p");
  require(static_cast<Index>(smap.summary_dim()) == table.summary_dim(),
          "fit_copula: summary map and table disagree on q");
  std::vector<MarginalEstimate> marginals(p);
  parallel_for(p, opts.threads, [&](std::size_t i) { marginals[i] = fit_marginal(table, s_obs, smap, i, opts); });
  return marginals;
}

/// Pairwise step: the (theta_i, theta_j) sample drawn on s_(i,j). When
/// `marginals` is given and the sample is equally weighted, both columns are
/// marginally adjusted to them.
inline ProjectedSample pairwise_sample(const ReferenceTable& table, const SummaryVector& s_obs, const SummaryMap& smap,
                                       std::size_t i, std::size_t j, const CopulaFitOptions& opts,
                                       const std::vector<MarginalEstimate>* marginals = nullptr) {
  ProjectedSample ps = projected_abc_sample(table, s_obs, smap.pairwise(i, j), {i, j}, opts);
  if (marginals && opts.marginal_adjust_pairs) {
    if (ps.equal_weights) {
      adjust_column_to_marginal(ps.values.col(0), (*marginals)[i]);
      adjust_column_to_marginal(ps.values.col(1), (*marginals)[j]);
    } else {
      warn("pairwise sample is not equally weighted; marginal adjustment skipped for pair (" +
           std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
  return ps;
}

inline double pair_lambda(const ProjectedSample& ps) {
  if (ps.equal_weights) return pairwise_lambda(ps.values.col(0), ps.values.col(1));
  return pairwise_lambda(ps.values.col(0), ps.values.col(1), ps.weights);
}

struct CopulaFit {
  CopulaPosterior posterior;
  PairCorrelations raw_pairs;  // before positive-definiteness repair
};

inline CopulaFit fit_copula_detailed(const ReferenceTable& table, const SummaryVector& s_obs, const SummaryMap& smap,
                                     const CopulaFitOptions& opts = {}) {
  std::vector<MarginalEstimate> marginals = fit_marginals(table, s_obs, smap, opts);
  const std::size_t p = marginals.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  std::vector<double> lambdas(pairs.size());
  parallel_for(pairs.size(), opts.threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    lambdas[k] = pair_lambda(pairwise_sample(table, s_obs, smap, i, j, opts, &marginals));
  });
  CopulaFit fit;
  for (std::size_t k = 0; k < pairs.size(); ++k) fit.raw_pairs[pairs[k]] = lambdas[k];
  AssembledCorrelation corr = assemble_correlation(fit.raw_pairs, p);
  fit.posterior = CopulaPosterior(std::move(marginals), std::move(corr.matrix), corr.log);
  return fit;
}

/// Univariate and pairwise ABC on the shared reference table, combined into a
/// Gaussian-copula approximation of the joint posterior.
inline CopulaPosterior fit_copula(const ReferenceTable& table, const SummaryVector& s_obs, const SummaryMap& smap,
                                  const CopulaFitOptions& opts = {}) {
  return std::move(fit_copula_detailed(table, s_obs, smap, opts).posterior);
}

/// The copula fit restricted to parameters `subset` (in that order): only
/// the needed marginal and pairwise analyses are run. Equivalent to
/// fit_copula(...).sub(subset) up to the eigenvalue repair, which here acts
/// on the subset's correlation block alone.
inline CopulaPosterior fit_copula_subset(const ReferenceTable& table, const SummaryVector& s_obs,
                                         const SummaryMap& smap, const IndexSet& subset,
                                         const CopulaFitOptions& opts = {}) {
  require(!subset.empty(), "fit_copula_subset: empty subset");
  for (std::size_t i : subset)
    require(i < smap.param_dim(), "fit_copula_subset: parameter index " + std::to_string(i + 1) + " out of range");
  const std::size_t d = subset.size();
  std::vector<MarginalEstimate> marginals(d);
  parallel_for(d, opts.threads, [&](std::size_t a) { marginals[a] = fit_marginal(table, s_obs, smap, subset[a], opts); });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) pairs.emplace_back(a, b);
  std::vector<double> lambdas(pairs.size());
  parallel_for(pairs.size(), opts.threads, [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    ProjectedSample ps = projected_abc_sample(table, s_obs, smap.pairwise(subset[a], subset[b]),
                                              {subset[a], subset[b]}, opts);
    if (opts.marginal_adjust_pairs && ps.equal_weights) {
      adjust_column_to_marginal(ps.values.col(0), marginals[a]);
      adjust_column_to_marginal(ps.values.col(1), marginals[b]);
    }
    lambdas[k] = pair_lambda(ps);
  });
  PairCorrelations pc;
  for (std::size_t k = 0; k < pairs.size(); ++k) pc[pairs[k]] = lambdas[k];
  AssembledCorrelation corr = assemble_correlation(pc, d);
  return CopulaPosterior(std::move(marginals), std::move(corr.matrix), corr.log);
}

}  // namespace copabc
