#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/copula/correlation.hpp"
#include "copabc/copula/normal_scores.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/stats.hpp"
#include "copabc/core/summary_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace copabc {

inline constexpr double kGkAsymmetry = 0.8;

struct GkParams {
  double A = 0.0;
  double B = 1.0;
  double g = 0.0;
  double k = 0.0;
  double c = kGkAsymmetry;

  void validate() const {
    require(std::isfinite(A) && std::isfinite(g) && std::isfinite(c), "GkParams: non-finite parameter");
    require(B > 0.0 && std::isfinite(B), "GkParams: B must be positive");
    require(k > -0.5 && std::isfinite(k), "GkParams: k must exceed -1/2");
  }
};

/// A + B [1 + c tanh(g z / 2)] (1 + z^2)^k z, the g-and-k quantile written in
/// terms of z = Phi^{-1}(q); (1 - e^{-gz})/(1 + e^{-gz}) = tanh(gz/2).
inline double gk_transform(double z, const GkParams& p) {
  return p.A + p.B * (1.0 + p.c * std::tanh(0.5 * p.g * z)) * std::exp(p.k * std::log1p(z * z)) * z;
}

inline double gk_quantile(double q, const GkParams& p) {
  require(q > 0.0 && q < 1.0, "gk_quantile: probability must lie in (0,1)");
  p.validate();
  return gk_transform(normal_quantile(q), p);
}

/// Independent margins linked by a Gaussian copula with correlation V.
struct MultiGkModel {
  std::vector<GkParams> margins;
  Eigen::MatrixXd V;
  Index n = 1757;

  std::size_t q() const { return margins.size(); }

  void validate() const {
    require(!margins.empty(), "MultiGkModel: no margins");
    require(n >= 8, "MultiGkModel: need at least 8 observations");
    for (const GkParams& m : margins) m.validate();
    const auto d = static_cast<Index>(margins.size());
    require(V.rows() == d && V.cols() == d, "MultiGkModel: V has wrong shape");
    require(V.isApprox(V.transpose(), 1e-12) && (V.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12,
            "MultiGkModel: V must be a symmetric unit-diagonal matrix");
  }
};

/// Draws z ~ N_q(0, V) per row and maps column j through the j-th quantile
/// function at Phi(z_j). The composition Q(Phi(z)) is evaluated directly.
inline Eigen::MatrixXd multigk_simulate(const MultiGkModel& m, SeededRng& rng) {
  m.validate();
  const auto d = static_cast<Index>(m.q());
  const Eigen::LLT<Eigen::MatrixXd> llt(m.V);
  if (llt.info() != Eigen::Success) throw numerical_error("multigk_simulate: V is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd z(m.n, d);
  for (Index c = 0; c < d; ++c)
    for (Index r = 0; r < m.n; ++r) z(r, c) = rng.normal();
  Eigen::MatrixXd x = z * L.transpose();
  for (Index c = 0; c < d; ++c) {
    const GkParams& p = m.margins[static_cast<std::size_t>(c)];
    for (Index r = 0; r < m.n; ++r) x(r, c) = gk_transform(x(r, c), p);
  }
  return x;
}

struct GkSummaries {
  double S_A = 0.0, S_B = 0.0, S_g = 0.0, S_k = 0.0;
};

/// Quartile and octile summaries from an ascending sample, quantiles by the
/// k = ceil(prob n) order-statistic rule.
inline GkSummaries gk_summaries_sorted(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  require(n >= 8, "gk_summaries: need at least 8 values");
  auto at = [&](double prob) { return sorted[order_statistic_rank(prob, n) - 1]; };
  const double L1 = at(0.25), L2 = at(0.5), L3 = at(0.75);
  const double E1 = at(0.125), E3 = at(0.375), E5 = at(0.625), E7 = at(0.875);
  GkSummaries s;
  s.S_A = L2;
  s.S_B = L3 - L1;
  if (s.S_B == 0.0) throw numerical_error("gk_summaries: zero interquartile range");
  s.S_g = (L3 + L1 - 2.0 * L2) / s.S_B;
  s.S_k = (E7 - E5 + E3 - E1) / s.S_B;
  return s;
}

inline GkSummaries gk_summaries(std::span<const double> column) {
  std::vector<double> v(column.begin(), column.end());
  std::sort(v.begin(), v.end());
  return gk_summaries_sorted(v);
}

inline double normal_scores_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                                        const Eigen::Ref<const Eigen::VectorXd>& b) {
  return pairwise_lambda(a, b);
}

/// Wishart(I_q, q) by the Bartlett decomposition, scaled to unit diagonal.
inline Eigen::MatrixXd wishart_correlation_sample(std::size_t q, SeededRng& rng) {
  require(q >= 2, "wishart_correlation_sample: q must be at least 2");
  const auto d = static_cast<Index>(q);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(static_cast<double>(d - i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd w = a * a.transpose();
  const Eigen::VectorXd inv_sd = w.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd r = inv_sd.asDiagonal() * w * inv_sd.asDiagonal();
  r = (0.5 * (r + r.transpose())).eval();
  r.diagonal().setOnes();
  return r;
}

// ---- parameter and summary layout ------------------------------------------
// parameters: (A_i, B_i, g_i, k_i) for i = 1..q, then nu_ij for i < j in
// lexicographic order; summaries: (S_A, S_B, S_g, S_k) per margin, then the
// normal-scores correlation of each margin pair in the same order.

inline std::size_t gk_param_count(std::size_t q) { return 4 * q + q * (q - 1) / 2; }

inline std::size_t gk_pair_index(std::size_t q, std::size_t i, std::size_t j) {
  require(i < j && j < q, "gk_pair_index: need i < j < q");
  return i * (2 * q - i - 1) / 2 + (j - i - 1);
}

inline ParameterVector gk_pack(const MultiGkModel& m) {
  const std::size_t q = m.q();
  ParameterVector theta(static_cast<Index>(gk_param_count(q)));
  for (std::size_t i = 0; i < q; ++i) {
    const GkParams& p = m.margins[i];
    theta.segment(static_cast<Index>(4 * i), 4) << p.A, p.B, p.g, p.k;
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j)
      theta(static_cast<Index>(4 * q + gk_pair_index(q, i, j))) = m.V(static_cast<Index>(i), static_cast<Index>(j));
  return theta;
}

inline MultiGkModel gk_unpack(const ParameterVector& theta, std::size_t q, Index n) {
  require(theta.size() == static_cast<Index>(gk_param_count(q)), "gk_unpack: wrong parameter length");
  MultiGkModel m;
  m.n = n;
  m.margins.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    const Index o = static_cast<Index>(4 * i);
    m.margins[i] = GkParams{theta(o), theta(o + 1), theta(o + 2), theta(o + 3)};
  }
  m.V = Eigen::MatrixXd::Identity(static_cast<Index>(q), static_cast<Index>(q));
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j) {
      const double v = theta(static_cast<Index>(4 * q + gk_pair_index(q, i, j)));
      m.V(static_cast<Index>(i), static_cast<Index>(j)) = m.V(static_cast<Index>(j), static_cast<Index>(i)) = v;
    }
  return m;
}

/// Summary vector of a dataset. Rank-based pieces reuse one table of
/// Phi^{-1}(r/(n+1)): tie-free score vectors are permutations of it, so each
/// correlation is a dot product over the common sum of squares.
inline SummaryVector multigk_summaries(const Eigen::MatrixXd& data) {
  const Index n = data.rows(), d = data.cols();
  require(n >= 8 && d >= 1, "multigk_summaries: need at least 8 rows and one column");
  const std::size_t q = static_cast<std::size_t>(d);
  SummaryVector s(static_cast<Index>(4 * q + q * (q - 1) / 2));
  Eigen::VectorXd table(n);
  for (Index r = 0; r < n; ++r) table(r) = normal_quantile(double(r + 1) / double(n + 1));
  const double ss = table.squaredNorm();
  Eigen::MatrixXd scores(n, d);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::vector<double> sorted(static_cast<std::size_t>(n));
  bool ties = false;
  for (Index c = 0; c < d; ++c) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return data(a, c) < data(b, c); });
    for (Index r = 0; r < n; ++r) {
      sorted[static_cast<std::size_t>(r)] = data(order[static_cast<std::size_t>(r)], c);
      scores(order[static_cast<std::size_t>(r)], c) = table(r);
      if (!std::isfinite(sorted[static_cast<std::size_t>(r)]))
        throw simulation_failure("multigk_summaries: non-finite data value");
      if (r > 0 && sorted[static_cast<std::size_t>(r)] == sorted[static_cast<std::size_t>(r - 1)]) ties = true;
    }
    const GkSummaries g = gk_summaries_sorted(sorted);
    s.segment(4 * c, 4) << g.S_A, g.S_B, g.S_g, g.S_k;
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j) {
      const Index o = static_cast<Index>(4 * q + gk_pair_index(q, i, j));
      s(o) = ties ? normal_scores_correlation(data.col(static_cast<Index>(i)), data.col(static_cast<Index>(j)))
                  : scores.col(static_cast<Index>(i)).dot(scores.col(static_cast<Index>(j))) / ss;
    }
  return s;
}

/// s_(A_i) = {S_A}, s_(B_i) = {S_B, S_k}, s_(g_i) = {S_g}, s_(k_i) = {S_k},
/// s_(nu_ij) = {NSC_ij}; pairs use unions.
inline SummaryMap gk_summary_map(std::size_t q) {
  std::vector<IndexSet> uni(gk_param_count(q));
  for (std::size_t i = 0; i < q; ++i) {
    uni[4 * i + 0] = {4 * i + 0};
    uni[4 * i + 1] = {4 * i + 1, 4 * i + 3};
    uni[4 * i + 2] = {4 * i + 2};
    uni[4 * i + 3] = {4 * i + 3};
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j) {
      const std::size_t k = gk_pair_index(q, i, j);
      uni[4 * q + k] = {4 * q + k};
    }
  return SummaryMap(gk_param_count(q), std::move(uni));
}

/// Per-margin importance box; the default is the documented pilot box.
struct GkBox {
  double A_lo = -0.1, A_hi = 0.1;
  double B_lo = 0.0, B_hi = 0.05;
  double g_lo = -1.0, g_hi = 1.0;
  double k_lo = -0.2, k_hi = 0.5;

  void validate() const {
    require(A_lo < A_hi && B_lo < B_hi && g_lo < g_hi && k_lo < k_hi, "GkBox: empty interval");
    require(B_lo >= 0.0 && k_lo >= -0.5, "GkBox: box leaves the valid parameter region");
  }
};

inline std::string gk_param_name(std::size_t q, std::size_t index) {
  static const char* kNames[4] = {"A", "B", "g", "k"};
  if (index < 4 * q) return std::string(kNames[index % 4]) + std::to_string(index / 4 + 1);
  std::size_t k = index - 4 * q;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j)
      if (k-- == 0) return "nu" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
  throw std::invalid_argument("gk_param_name: index out of range");
}

/// Reference-table model: margins uniform on the box, V ~ Wishart(I_q, q)
/// rescaled to a correlation matrix. The box doubles as the prior support,
/// so prior and importance densities coincide.
inline SimulatorModel gk_simulator_model(std::size_t q, Index n, const GkBox& box = {}) {
  require(q >= 1, "gk_simulator_model: q must be at least 1");
  box.validate();
  SimulatorModel sm;
  sm.id = "multi-gk(q=" + std::to_string(q) + ",n=" + std::to_string(n) + ")";
  sm.param_dim = gk_param_count(q);
  sm.summary_dim = gk_param_count(q);
  sm.sample_prior = [q, box](SeededRng& rng) {
    ParameterVector theta(static_cast<Index>(gk_param_count(q)));
    for (std::size_t i = 0; i < q; ++i) {
      const Index o = static_cast<Index>(4 * i);
      theta(o) = rng.uniform(box.A_lo, box.A_hi);
      theta(o + 1) = rng.uniform(box.B_lo, box.B_hi);
      theta(o + 2) = rng.uniform(box.g_lo, box.g_hi);
      theta(o + 3) = rng.uniform(box.k_lo, box.k_hi);
    }
    if (q >= 2) {
      const Eigen::MatrixXd v = wishart_correlation_sample(q, rng);
      for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = i + 1; j < q; ++j)
          theta(static_cast<Index>(4 * q + gk_pair_index(q, i, j))) = v(static_cast<Index>(i), static_cast<Index>(j));
    }
    return theta;
  };
  sm.simulate = [q, n](const ParameterVector& theta, SeededRng& rng) {
    const MultiGkModel m = gk_unpack(theta, q, n);
    return multigk_summaries(multigk_simulate(m, rng));
  };
  return sm;
}

}  // namespace copabc
