#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/core/distance.hpp"
#include "copabc/core/errors.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/summary_map.hpp"
#include "copabc/discrete/discrete_copula.hpp"
#include "copabc/models/robust_regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace copabc {

/// Linear regression with a beta-binomial prior on the inclusion indicators,
/// Zellner's g-prior (g = n) on the coefficients and an inverse-gamma prior
/// on the residual variance. X holds an intercept column followed by
/// standardised covariates; G lists the covariates (0-based) of the reduced
/// model used for the second set of t-statistics.
struct VarselModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double a = 2.0, b = 10.0;
  double a_sigma = 5.0, b_sigma = 5.0 * 200.0 * 200.0;
  IndexSet G;
  HuberOptions huber{};

  Index n() const { return X.rows(); }
  std::size_t p_cov() const { return static_cast<std::size_t>(X.cols() - 1); }

  void validate() const {
    require(X.cols() >= 2, "VarselModel: need at least one covariate");
    require(y.size() == X.rows(), "VarselModel: X and y disagree on n");
    require(X.rows() > X.cols(), "VarselModel: need n > p_cov + 1");
    require((X.col(0).array() == 1.0).all(), "VarselModel: first column of X must be ones");
    for (Index c = 1; c < X.cols(); ++c) {
      const double mean = X.col(c).mean();
      const double sd = std::sqrt((X.col(c).array() - mean).square().sum() / double(X.rows() - 1));
      require(std::abs(mean) < 1e-8 && std::abs(sd - 1.0) < 1e-8,
              "VarselModel: covariate " + std::to_string(c) + " is not standardised");
    }
    require(a > 0 && b > 0 && a_sigma > 0 && b_sigma > 0, "VarselModel: hyperparameters must be positive");
    require(std::is_sorted(G.begin(), G.end()) && std::adjacent_find(G.begin(), G.end()) == G.end(),
            "VarselModel: G must be sorted without duplicates");
    for (std::size_t g : G) require(g < p_cov(), "VarselModel: G index " + std::to_string(g + 1) + " out of range");
  }
};

/// [1, (x - mean)/sd] for each covariate column (sample sd, n - 1).
inline Eigen::MatrixXd standardized_design(const Eigen::MatrixXd& covariates) {
  const Index n = covariates.rows();
  require(n >= 3 && covariates.cols() >= 1, "standardized_design: need n >= 3 and one covariate");
  Eigen::MatrixXd X(n, covariates.cols() + 1);
  X.col(0).setOnes();
  for (Index c = 0; c < covariates.cols(); ++c) {
    const double mean = covariates.col(c).mean();
    const Eigen::ArrayXd d = covariates.col(c).array() - mean;
    const double sd = std::sqrt(d.square().sum() / double(n - 1));
    if (!(sd > 0.0)) throw numerical_error("standardized_design: covariate " + std::to_string(c + 1) + " is constant");
    X.col(c + 1) = (d / sd).matrix();
  }
  return X;
}

inline std::vector<Index> varsel_columns(const BinaryVector& gamma) {
  std::vector<Index> cols{0};
  for (std::size_t i = 0; i < gamma.size(); ++i)
    if (gamma[i]) cols.push_back(static_cast<Index>(i + 1));
  return cols;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
  return out;
}

inline BinaryVector to_binary(const ParameterVector& theta) {
  BinaryVector g(static_cast<std::size_t>(theta.size()));
  for (Index i = 0; i < theta.size(); ++i) {
    require(theta(i) == 0.0 || theta(i) == 1.0, "to_binary: parameter is not 0/1");
    g[static_cast<std::size_t>(i)] = theta(i) == 1.0;
  }
  return g;
}

inline ParameterVector from_binary(const BinaryVector& g) {
  ParameterVector t(static_cast<Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) t(static_cast<Index>(i)) = g[i] ? 1.0 : 0.0;
  return t;
}

/// p_gamma ~ Beta(a, b), then gamma_i ~ Bernoulli(p_gamma) independently.
inline BinaryVector varsel_prior_sample(const VarselModel& m, SeededRng& rng) {
  const double pg = rng.beta(m.a, m.b);
  BinaryVector g(m.p_cov());
  for (auto& v : g) v = rng.bernoulli(pg);
  return g;
}

/// log p(gamma) = log B(a + k, b + p - k) - log B(a, b).
inline double varsel_log_prior(const VarselModel& m, const BinaryVector& gamma) {
  require(gamma.size() == m.p_cov(), "varsel_log_prior: gamma has wrong length");
  const double k = double(std::count(gamma.begin(), gamma.end(), std::uint8_t{1}));
  const double p = double(gamma.size());
  auto lbeta = [](double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); };
  return lbeta(m.a + k, m.b + p - k) - lbeta(m.a, m.b);
}

/// Robust summaries: T_1i, the Huber t-statistic of covariate i in the full
/// model, for every i; then T_2i from the model on [1, X_G] for i in G.
inline SummaryVector robust_summaries(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const IndexSet& G,
                                      const HuberOptions& opts = {}) {
  const auto p = static_cast<std::size_t>(X.cols() - 1);
  SummaryVector s(static_cast<Index>(p + G.size()));
  const RegressionStats full = huber_fit(X, y, opts);
  s.head(static_cast<Index>(p)) = full.t.tail(static_cast<Index>(p));
  if (!G.empty()) {
    std::vector<Index> cols{0};
    for (std::size_t g : G) cols.push_back(static_cast<Index>(g + 1));
    const RegressionStats reduced = huber_fit(select_columns(X, cols), y, opts);
    s.tail(static_cast<Index>(G.size())) = reduced.t.tail(static_cast<Index>(G.size()));
  }
  return s;
}

inline SummaryVector robust_summaries(const VarselModel& m) { return robust_summaries(m.X, m.y, m.G, m.huber); }

/// sigma^2 ~ IG(a_sigma, b_sigma), beta_gamma ~ N(0, n sigma^2 (X_g'X_g)^{-1}),
/// y = X_g beta_gamma + eps; returns the robust summaries of (X, y).
/// A rank-deficient X_gamma raises simulation_failure so the caller redraws.
inline SummaryVector varsel_simulate(const VarselModel& m, const BinaryVector& gamma, SeededRng& rng,
                                     Eigen::VectorXd* y_out = nullptr) {
  require(gamma.size() == m.p_cov(), "varsel_simulate: gamma has wrong length");
  const Eigen::MatrixXd Xg = select_columns(m.X, varsel_columns(gamma));
  const Eigen::LLT<Eigen::MatrixXd> llt(Xg.transpose() * Xg);
  if (llt.info() != Eigen::Success || Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(Xg).rank() < Xg.cols())
    throw simulation_failure("varsel_simulate: X_gamma is rank deficient");
  const double sigma2 = 1.0 / rng.gamma(m.a_sigma, 1.0 / m.b_sigma);
  Eigen::VectorXd z(Xg.cols());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  // L^{-T} z has covariance (L L')^{-1} = (X_g'X_g)^{-1}
  const Eigen::VectorXd beta = std::sqrt(double(m.n()) * sigma2) * llt.matrixU().solve(z);
  const double sigma = std::sqrt(sigma2);
  Eigen::VectorXd y = Xg * beta;
  for (Index i = 0; i < y.size(); ++i) y(i) += sigma * rng.normal();
  if (y_out) *y_out = y;
  return robust_summaries(m.X, y, m.G, m.huber);
}

/// s_(i) = {T_1i}, plus T_2i when i is in G; pairs use unions.
inline SummaryMap varsel_summary_map(std::size_t p_cov, const IndexSet& G) {
  std::vector<IndexSet> uni(p_cov);
  for (std::size_t i = 0; i < p_cov; ++i) uni[i] = {i};
  for (std::size_t k = 0; k < G.size(); ++k) uni[G[k]].push_back(p_cov + k);
  return SummaryMap(p_cov + G.size(), std::move(uni));
}

inline SimulatorModel varsel_simulator_model(const VarselModel& m) {
  m.validate();
  SimulatorModel sm;
  sm.id = "varsel(n=" + std::to_string(m.n()) + ",p=" + std::to_string(m.p_cov()) + ",G=" + [&] {
    std::string s;
    for (std::size_t g : m.G) s += (s.empty() ? "" : ";") + std::to_string(g + 1);
    return s;
  }() + ")";
  sm.param_dim = m.p_cov();
  sm.summary_dim = m.p_cov() + m.G.size();
  sm.sample_prior = [m](SeededRng& rng) { return from_binary(varsel_prior_sample(m, rng)); };
  sm.simulate = [m](const ParameterVector& theta, SeededRng& rng) { return varsel_simulate(m, to_binary(theta), rng); };
  return sm;
}

namespace detail {

// y'y - n/(n+1) y'P_gamma y and q_gamma.
inline std::pair<double, Index> varsel_quadratic(const VarselModel& m, const BinaryVector& gamma) {
  require(gamma.size() == m.p_cov(), "exact_log_marginal: gamma has wrong length");
  const Eigen::MatrixXd Xg = select_columns(m.X, varsel_columns(gamma));
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xg);
  if (qr.rank() < Xg.cols()) throw numerical_error("exact_log_marginal: X_gamma'X_gamma is singular");
  const Eigen::VectorXd fitted = Xg * qr.solve(m.y);
  const double n = double(m.n());
  return {m.y.squaredNorm() - n / (n + 1.0) * fitted.squaredNorm(), Xg.cols()};
}

}  // namespace detail

/// log p(y | gamma) + log p(gamma) up to a constant common to all gamma:
///   -(q/2) log(n+1) - (a_sigma + n/2) log(2 b_sigma + y'y - n/(n+1) y'P y).
inline double exact_log_marginal(const VarselModel& m, const BinaryVector& gamma) {
  const auto [Q, q] = detail::varsel_quadratic(m, gamma);
  const double n = double(m.n());
  return -0.5 * double(q) * std::log(n + 1.0) - (m.a_sigma + 0.5 * n) * std::log(2.0 * m.b_sigma + Q) +
         varsel_log_prior(m, gamma);
}

/// Fully normalised log p(y | gamma), prior on gamma excluded.
inline double exact_log_evidence(const VarselModel& m, const BinaryVector& gamma) {
  const auto [Q, q] = detail::varsel_quadratic(m, gamma);
  const double n = double(m.n()), a = m.a_sigma, b = m.b_sigma;
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * double(q) * std::log(1.0 + n) + a * std::log(b) -
         std::lgamma(a) + std::lgamma(a + 0.5 * n) - (a + 0.5 * n) * std::log(b + 0.5 * Q);
}

/// All 2^p_cov models with normalised posterior log probabilities, ranked.
inline std::vector<RankedModel> exact_enumerate(const VarselModel& m) {
  require(m.p_cov() <= 20, "exact_enumerate: p_cov must be at most 20");
  std::vector<BinaryVector> all = all_binary_vectors(m.p_cov());
  std::vector<RankedModel> out(all.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < all.size(); ++k) {
    out[k].gamma = std::move(all[k]);
    out[k].log_prob = exact_log_marginal(m, out[k].gamma);
    mx = std::max(mx, out[k].log_prob);
  }
  double acc = 0.0;
  for (const RankedModel& r : out) acc += std::exp(r.log_prob - mx);
  const double lse = mx + std::log(acc);
  for (RankedModel& r : out) r.log_prob -= lse;
  sort_ranked_models(out);
  return out;
}

/// Synthetic Table-3 analogue: n x p_cov standard normal covariates with
/// x_8 = 0.95 x_7 + 0.31 e (a collinear pair), and
///   y = 900 + 150 x_2 - 120 x_5 + N(0, 200^2)
/// on the standardised covariates. G is left empty.
inline VarselModel synthetic_varsel(std::uint64_t seed, Index n = 50, std::size_t p_cov = 10) {
  require(p_cov >= 8, "synthetic_varsel: need at least 8 covariates");
  require(n > static_cast<Index>(p_cov) + 1, "synthetic_varsel: need n > p_cov + 1");
  SeededRng rng(seed, 0x766172);
  Eigen::MatrixXd raw(n, static_cast<Index>(p_cov));
  for (Index c = 0; c < raw.cols(); ++c)
    for (Index r = 0; r < n; ++r) raw(r, c) = rng.normal();
  for (Index r = 0; r < n; ++r) raw(r, 7) = 0.95 * raw(r, 6) + 0.31 * raw(r, 7);
  VarselModel m;
  m.X = standardized_design(raw);
  m.y.resize(n);
  for (Index r = 0; r < n; ++r) m.y(r) = 900.0 + 150.0 * m.X(r, 2) - 120.0 * m.X(r, 5) + 200.0 * rng.normal();
  m.validate();
  return m;
}

/// Support of the top exactly-enumerated model, the default reduced set G.
inline IndexSet top_model_support(const VarselModel& m) {
  const std::vector<RankedModel> ranked = exact_enumerate(m);
  IndexSet g;
  for (std::size_t i = 0; i < ranked.front().gamma.size(); ++i)
    if (ranked.front().gamma[i]) g.push_back(i);
  return g;
}

/// The dataset with its last response moved by 10 robust residual scales
/// (Huber fit of the full model).
inline VarselModel with_outlier(const VarselModel& m, double factor = 10.0) {
  const RegressionStats fit = huber_fit(m.X, m.y, m.huber);
  VarselModel out = m;
  out.y(out.n() - 1) += factor * fit.scale;
  return out;
}

/// Standard ABC: model frequencies among the n_keep rows nearest on the
/// whole summary vector.
inline std::vector<RankedModel> standard_abc_ranking(const ReferenceTable& table, const SummaryVector& s_obs,
                                                     std::size_t n_keep) {
  const Selection sel = select_rows_count(table, s_obs, full_subset(table.summary_dim()), n_keep,
                                          DistanceSpec::euclidean());
  std::map<BinaryVector, double> freq;
  double total = 0.0;
  for (Index r : sel.rows) {
    const double w = table.ratios()(r);
    freq[to_binary(table.params().row(r).transpose())] += w;
    total += w;
  }
  std::vector<RankedModel> out;
  for (const auto& [g, f] : freq) out.push_back(RankedModel{g, std::log(f / total), 0.0, 0});
  sort_ranked_models(out);
  return out;
}

/// Number of models shared by the first k entries of two rankings.
inline std::size_t top_k_overlap(const std::vector<RankedModel>& a, const std::vector<RankedModel>& b,
                                 std::size_t k = 10) {
  std::vector<BinaryVector> ta, tb;
  for (std::size_t i = 0; i < std::min(k, a.size()); ++i) ta.push_back(a[i].gamma);
  for (std::size_t i = 0; i < std::min(k, b.size()); ++i) tb.push_back(b[i].gamma);
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<BinaryVector> both;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(both));
  return both.size();
}

}  // namespace copabc
