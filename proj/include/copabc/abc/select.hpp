#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/sample_set.hpp"
#include "copabc/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace copabc {

/// Distances between every table row, projected onto `subset`, and
/// s_obs[subset]. `spec` is interpreted on the full summary vector and is
/// restricted to the subset here.
inline std::vector<double> projected_distances(const ReferenceTable& table, const SummaryVector& s_obs,
                                               const IndexSet& subset, const DistanceSpec& spec) {
  require(!subset.empty(), "abc_select: empty summary subset");
  require(s_obs.size() == table.summary_dim(), "abc_select: observed summary has wrong dimension");
  for (std::size_t k : subset)
    require(k < static_cast<std::size_t>(table.summary_dim()), "abc_select: summary index out of range");
  const Index n = table.size();
  const auto& S = table.summaries();
  Eigen::ArrayXd dist2 = Eigen::ArrayXd::Zero(n);
  if (spec.kind() == DistanceKind::euclidean) {
    for (std::size_t k : subset) {
      const auto c = static_cast<Index>(k);
      dist2 += (S.col(c).array() - s_obs(c)).square();
    }
  } else {
    const DistanceSpec sub = spec.restrict(subset);
    const Eigen::MatrixXd& W = sub.whitener();  // lower triangular
    const auto d = static_cast<Index>(subset.size());
    Eigen::ArrayXd acc(n);
    for (Index a = 0; a < d; ++a) {
      acc.setZero();
      for (Index b = 0; b <= a; ++b) {
        const auto c = static_cast<Index>(subset[static_cast<std::size_t>(b)]);
        acc += W(a, b) * (S.col(c).array() - s_obs(c));
      }
      dist2 += acc.square();
    }
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = std::sqrt(dist2(r));
  return out;
}

/// Accepted rows of a uniform-kernel selection.
struct Selection {
  std::vector<Index> rows;  // ascending row order
  double threshold = 0.0;   // h
};

/// Rows whose distance is at most the k-th smallest distance (ties accepted).
inline Selection select_nearest(std::span<const double> distances, std::size_t k) {
  require(!distances.empty(), "select_nearest: no distances");
  require(k >= 1 && k <= distances.size(), "select_nearest: k out of range");
  bool any_finite = false;
  for (double d : distances) {
    require(!std::isnan(d) && d >= 0.0, "select_nearest: distances must be nonnegative numbers");
    any_finite = any_finite || std::isfinite(d);
  }
  if (!any_finite) throw numerical_error("abc_select: all distances are infinite");
  std::vector<double> work(distances.begin(), distances.end());
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
  Selection sel;
  sel.threshold = work[k - 1];
  if (!std::isfinite(sel.threshold)) throw numerical_error("abc_select: threshold is infinite");
  sel.rows.reserve(k);
  for (std::size_t r = 0; r < distances.size(); ++r)
    if (distances[r] <= sel.threshold) sel.rows.push_back(static_cast<Index>(r));
  return sel;
}

inline Selection select_rows(const ReferenceTable& table, const SummaryVector& s_obs, const IndexSet& subset,
                             double quantile, const DistanceSpec& spec) {
  require(quantile > 0.0 && quantile <= 1.0, "abc_select: quantile outside (0,1]");
  const auto d = projected_distances(table, s_obs, subset, spec);
  return select_nearest(d, order_statistic_rank(quantile, d.size()));
}

inline Selection select_rows_count(const ReferenceTable& table, const SummaryVector& s_obs, const IndexSet& subset,
                                   std::size_t k, const DistanceSpec& spec) {
  const auto d = projected_distances(table, s_obs, subset, spec);
  return select_nearest(d, k);
}

/// Gathers table rows into a weighted sample; weights are the importance ratios.
inline WeightedSampleSet gather(const ReferenceTable& table, const std::vector<Index>& rows) {
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd params(n, table.param_dim());
  Eigen::MatrixXd summaries(n, table.summary_dim());
  Eigen::VectorXd weights(n);
  for (Index i = 0; i < n; ++i) {
    params.row(i) = table.params().row(rows[static_cast<std::size_t>(i)]);
    summaries.row(i) = table.summaries().row(rows[static_cast<std::size_t>(i)]);
    weights(i) = table.ratios()(rows[static_cast<std::size_t>(i)]);
  }
  if (table.prior_as_importance()) return WeightedSampleSet(std::move(params), std::move(summaries));
  return WeightedSampleSet(std::move(params), std::move(summaries), std::move(weights));
}

/// Like gather, but keeps only the parameter columns `param_cols` (in that
/// order) and the summary columns `summary_cols`.
inline WeightedSampleSet gather_columns(const ReferenceTable& table, const std::vector<Index>& rows,
                                        const IndexSet& param_cols, const IndexSet& summary_cols) {
  const auto n = static_cast<Index>(rows.size());
  const auto pc = static_cast<Index>(param_cols.size());
  const auto sc = static_cast<Index>(summary_cols.size());
  Eigen::MatrixXd params(n, pc);
  Eigen::MatrixXd summaries(n, sc);
  Eigen::VectorXd weights(n);
  for (Index c = 0; c < pc; ++c) {
    const auto& col = table.params().col(static_cast<Index>(param_cols[static_cast<std::size_t>(c)]));
    for (Index i = 0; i < n; ++i) params(i, c) = col(rows[static_cast<std::size_t>(i)]);
  }
  for (Index c = 0; c < sc; ++c) {
    const auto& col = table.summaries().col(static_cast<Index>(summary_cols[static_cast<std::size_t>(c)]));
    for (Index i = 0; i < n; ++i) summaries(i, c) = col(rows[static_cast<std::size_t>(i)]);
  }
  for (Index i = 0; i < n; ++i) weights(i) = table.ratios()(rows[static_cast<std::size_t>(i)]);
  if (table.prior_as_importance()) return WeightedSampleSet(std::move(params), std::move(summaries));
  return WeightedSampleSet(std::move(params), std::move(summaries), std::move(weights));
}

/// ABC importance sampling with a uniform kernel on the projected summaries
///: rows with d <= h are kept, weighted by p/f.
inline WeightedSampleSet abc_select(const ReferenceTable& table, const SummaryVector& s_obs, const IndexSet& subset,
                                    double quantile, const DistanceSpec& spec) {
  return gather(table, select_rows(table, s_obs, subset, quantile, spec).rows);
}

/// Every summary index 0..q-1.
inline IndexSet full_subset(Index q) {
  IndexSet s(static_cast<std::size_t>(q));
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = k;
  return s;
}

}  // namespace copabc
