#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/copula/correlation.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/core/summary_map.hpp"
#include "copabc/discrete/bvn.hpp"
#include "copabc/discrete/mvn_rectangle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace copabc {

using BinaryVector = std::vector<std::uint8_t>;

inline std::string to_bitstring(const BinaryVector& g) {
  std::string s(g.size(), '0');
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = g[i] ? '1' : '0';
  return s;
}

inline BinaryVector from_bitstring(const std::string& s) {
  BinaryVector g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i] == '0' || s[i] == '1', "from_bitstring: expected only 0 and 1");
    g[i] = s[i] == '1';
  }
  return g;
}

/// Latent Gaussian copula over binary indicators: gamma_i = 1{Z_i > t_i},
/// Z ~ N(0, Lambda), t_i = Phi^{-1}(p_i), p_i = P(gamma_i = 0).
struct DiscreteCopulaPosterior {
  Eigen::VectorXd p0;          // P(gamma_i = 0 | s_(i)), clamped
  Eigen::VectorXd thresholds;  // Phi^{-1}(p0)
  Eigen::MatrixXd correlation;
  RepairLog repair;
  std::size_t n_keep = 0;

  std::size_t dim() const { return static_cast<std::size_t>(p0.size()); }
};

struct DiscreteFitOptions {
  std::size_t n_keep = 500;
  DistanceSpec distance = DistanceSpec::euclidean();
  std::size_t threads = 0;
};

namespace detail {

inline void require_binary_column(const ReferenceTable& table, Index c) {
  for (Index r = 0; r < table.size(); ++r) {
    const double v = table.params()(r, c);
    require(v == 0.0 || v == 1.0, "fit_discrete_copula: parameter column " + std::to_string(c + 1) +
                                      " is not binary");
  }
}

inline double clamp_frequency(double f, std::size_t n_keep) {
  const double e = 1.0 / (2.0 * static_cast<double>(n_keep));
  return std::clamp(f, e, 1.0 - e);
}

}  // namespace detail

/// Step 1 and 2 for binary parameters: frequencies among the n_keep nearest
/// rows on s_(i), latent correlations from pairwise joint frequencies on
/// s_(i,j), then assembly with eigenvalue repair.
inline DiscreteCopulaPosterior fit_discrete_copula(const ReferenceTable& table, const SummaryVector& s_obs,
                                                   const SummaryMap& smap, const DiscreteFitOptions& opts = {}) {
  const auto p = static_cast<std::size_t>(table.param_dim());
  require(smap.param_dim() == p, "fit_discrete_copula: summary map has wrong parameter dimension");
  require(smap.summary_dim() == static_cast<std::size_t>(table.summary_dim()), "fit_discrete_copula: summary map has wrong summary dimension");
  require(opts.n_keep >= 1 && opts.n_keep <= static_cast<std::size_t>(table.size()),
          "fit_discrete_copula: n_keep out of range");
  for (Index c = 0; c < static_cast<Index>(p); ++c) detail::require_binary_column(table, c);
  const std::size_t threads = opts.threads == 0 ? default_threads() : opts.threads;

  // frequencies are weighted by importance ratios when the table has them
  auto frequency = [&](const std::vector<Index>& rows, auto&& indicator) {
    double num = 0.0, den = 0.0;
    for (Index r : rows) {
      const double w = table.ratios()(r);
      den += w;
      if (indicator(r)) num += w;
    }
    return num / den;
  };

  DiscreteCopulaPosterior post;
  post.n_keep = opts.n_keep;
  post.p0.resize(static_cast<Index>(p));
  post.thresholds.resize(static_cast<Index>(p));
  parallel_for(p, threads, [&](std::size_t i) {
    const Selection sel = select_rows_count(table, s_obs, smap.univariate(i), opts.n_keep, opts.distance);
    const auto c = static_cast<Index>(i);
    const double f0 = frequency(sel.rows, [&](Index r) { return table.params()(r, c) == 0.0; });
    post.p0(c) = detail::clamp_frequency(f0, opts.n_keep);
    post.thresholds(c) = normal_quantile(post.p0(c));
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  std::vector<double> lambdas(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const Selection sel = select_rows_count(table, s_obs, smap.pairwise(i, j), opts.n_keep, opts.distance);
    const auto ci = static_cast<Index>(i), cj = static_cast<Index>(j);
    const double f11 =
        frequency(sel.rows, [&](Index r) { return table.params()(r, ci) == 1.0 && table.params()(r, cj) == 1.0; });
    lambdas[k] = solve_lambda_ij(post.p0(ci), post.p0(cj), f11);
  });
  PairCorrelations pc;
  for (std::size_t k = 0; k < pairs.size(); ++k) pc[pairs[k]] = lambdas[k];
  AssembledCorrelation assembled = assemble_correlation(pc, p);
  post.correlation = std::move(assembled.matrix);
  post.repair = assembled.log;
  return post;
}

struct ModelProbability {
  double log_prob = -std::numeric_limits<double>::infinity();
  double mc_se = 0.0;  // standard error of the probability (not its log)
};

/// P(gamma) under the latent Gaussian: the orthant rectangle with
/// Z_i > t_i where gamma_i = 1 and Z_i <= t_i where gamma_i = 0. Exact when
/// Lambda = I or p <= 2, randomised QMC otherwise; the QMC seed is derived from
/// `qmc.seed` and gamma so results do not depend on evaluation order.
inline ModelProbability model_log_probability(const DiscreteCopulaPosterior& post, const BinaryVector& gamma,
                                              const QmcOptions& qmc = {}) {
  const std::size_t p = post.dim();
  require(gamma.size() == p, "model_log_probability: gamma has wrong length");
  for (std::uint8_t g : gamma) require(g == 0 || g == 1, "model_log_probability: gamma must be binary");
  ModelProbability out;
  if (post.correlation.isIdentity(0.0)) {
    double lp = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double q = post.p0(static_cast<Index>(i));
      lp += std::log(gamma[i] ? 1.0 - q : q);
    }
    out.log_prob = lp;
    return out;
  }
  if (p == 2) {
    // orthant flips: P(Z_i <= t) = P(-Z_i >= -t)
    const double si = gamma[0] ? 1.0 : -1.0, sj = gamma[1] ? 1.0 : -1.0;
    const double v = bvn_upper_orthant(si * post.thresholds(0), sj * post.thresholds(1),
                                       si * sj * post.correlation(0, 1));
    out.log_prob = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
    return out;
  }
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lower(static_cast<Index>(p)), upper(static_cast<Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    const auto c = static_cast<Index>(i);
    lower(c) = gamma[i] ? post.thresholds(c) : -inf;
    upper(c) = gamma[i] ? inf : post.thresholds(c);
  }
  std::uint64_t key = 0xcbf29ce484222325ULL;
  for (std::uint8_t g : gamma) key = (key ^ g) * 0x100000001b3ULL;
  QmcOptions o = qmc;
  o.seed = SeededRng(qmc.seed, key).next_u64();
  const RectangleProbability r = mvn_rectangle_probability(post.correlation, lower, upper, o);
  out.log_prob = r.value > 0.0 ? std::log(r.value) : -inf;
  out.mc_se = r.standard_error;
  return out;
}

struct RankedModel {
  BinaryVector gamma;
  double log_prob = 0.0;
  double mc_se = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// All 2^p indicator vectors, p <= 20, in lexicographic bitstring order.
inline std::vector<BinaryVector> all_binary_vectors(std::size_t p) {
  require(p >= 1 && p <= 20, "all_binary_vectors: exhaustive enumeration needs 1 <= p <= 20");
  std::vector<BinaryVector> out;
  out.reserve(std::size_t{1} << p);
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << p); ++code) {
    BinaryVector g(p);
    for (std::size_t i = 0; i < p; ++i) g[i] = (code >> (p - 1 - i)) & 1U;
    out.push_back(std::move(g));
  }
  return out;
}

/// Sorts by log probability descending, ties by bitstring ascending, and
/// assigns 1-based ranks.
inline void sort_ranked_models(std::vector<RankedModel>& models) {
  std::sort(models.begin(), models.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.gamma < b.gamma;
  });
  for (std::size_t k = 0; k < models.size(); ++k) models[k].rank = k + 1;
}

inline std::vector<RankedModel> rank_models(const DiscreteCopulaPosterior& post,
                                            const std::vector<BinaryVector>& candidates, const QmcOptions& qmc = {},
                                            std::size_t threads = 0) {
  require(!candidates.empty(), "rank_models: no candidates");
  std::vector<RankedModel> out(candidates.size());
  parallel_for(candidates.size(), threads == 0 ? default_threads() : threads, [&](std::size_t k) {
    const ModelProbability mp = model_log_probability(post, candidates[k], qmc);
    out[k].gamma = candidates[k];
    out[k].log_prob = mp.log_prob;
    out[k].mc_se = mp.mc_se;
  });
  sort_ranked_models(out);
  return out;
}

inline std::vector<RankedModel> rank_models(const DiscreteCopulaPosterior& post, const QmcOptions& qmc = {},
                                            std::size_t threads = 0) {
  return rank_models(post, all_binary_vectors(post.dim()), qmc, threads);
}

}  // namespace copabc
