#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace copabc {

/// Weighted order statistic: the smallest sorted value whose cumulative
/// weight reaches `prob` (the k = ceil(prob * n) rule for equal weights).
inline double weighted_order_statistic(std::span<const double> sorted, std::span<const double> cumulative,
                                       double prob) {
  const double target = prob * (1.0 - 1e-12);
  auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) return sorted.back();
  return sorted[static_cast<std::size_t>(it - cumulative.begin())];
}

/// Nonparametric estimate of one parameter's marginal posterior.
///
/// The CDF interpolates linearly through (x_(r), u_r) with u_r = r/(n+1) for
/// equal weights and is held at u_1 / u_n outside the sample range, so
/// Phi^{-1}(cdf(x)) is always finite. For weighted samples
/// u_r = (n (C_r - w_r/2) + 1/2)/(n+1), C_r the cumulative weight, which
/// reduces to r/(n+1) when the weights are equal. The density is a Gaussian
/// KDE with Silverman's bandwidth 0.9 min(sd, IQR/1.34) n^{-1/5}.
class MarginalEstimate {
 public:
  MarginalEstimate() = default;

  explicit MarginalEstimate(std::span<const double> values, std::span<const double> weights = {}) {
    require(!values.empty(), "MarginalEstimate: empty sample");
    require(weights.empty() || weights.size() == values.size(), "MarginalEstimate: weight count mismatch");
    for (double v : values) require(std::isfinite(v), "MarginalEstimate: non-finite sample value");
    std::vector<std::size_t> order = stable_order(values);
    const bool weighted = !weights.empty() && !all_equal(weights);
    for (std::size_t idx : order) {
      const double w = weighted ? weights[idx] : 1.0;
      require(std::isfinite(w) && w >= 0.0, "MarginalEstimate: weights must be finite and nonnegative");
      if (w == 0.0) continue;
      sorted_.push_back(values[idx]);
      weights_.push_back(w);
    }
    require(!sorted_.empty(), "MarginalEstimate: all weights are zero");
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (double& w : weights_) w /= total;
    equal_weights_ = !weighted;
    build_levels();
    bandwidth_ = silverman_bandwidth();
  }

  /// Reassembles an estimate from stored parts (deserialisation). The levels
  /// and cumulative weights are recomputed from the same inputs, so the result
  /// matches the original exactly.
  static MarginalEstimate from_parts(std::vector<double> sorted, std::vector<double> weights, bool equal_weights,
                                     double bandwidth) {
    require(!sorted.empty() && sorted.size() == weights.size(), "MarginalEstimate: inconsistent parts");
    require(std::is_sorted(sorted.begin(), sorted.end()), "MarginalEstimate: stored sample is not sorted");
    require(bandwidth > 0.0 && std::isfinite(bandwidth), "MarginalEstimate: bad bandwidth");
    MarginalEstimate m;
    m.sorted_ = std::move(sorted);
    m.weights_ = std::move(weights);
    m.equal_weights_ = equal_weights;
    m.build_levels();
    m.bandwidth_ = bandwidth;
    return m;
  }

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_sample() const { return sorted_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& levels() const { return levels_; }
  bool equal_weights() const { return equal_weights_; }
  double bandwidth() const { return bandwidth_; }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }
  double lower_level() const { return levels_.front(); }
  double upper_level() const { return levels_.back(); }

  double cdf(double x) const {
    if (!(x > sorted_.front())) return levels_.front();
    if (!(x < sorted_.back())) return levels_.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin());
    const double x0 = sorted_[k - 1], x1 = sorted_[k];
    const double l0 = levels_[k - 1], l1 = levels_[k];
    return l0 + (x - x0) / (x1 - x0) * (l1 - l0);
  }

  /// Phi^{-1}(cdf(x)); finite everywhere because cdf is clamped.
  double normal_score(double x) const { return normal_quantile(cdf(x)); }

  /// Inverse of cdf; u is clamped to [u_1, u_n] so the result stays inside
  /// the observed support.
  double quantile(double u) const {
    require(u >= 0.0 && u <= 1.0, "MarginalEstimate::quantile: probability outside [0,1]");
    if (!(u > levels_.front())) return sorted_.front();
    if (!(u < levels_.back())) return sorted_.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(levels_.begin(), levels_.end(), u) - levels_.begin());
    const double l0 = levels_[k - 1], l1 = levels_[k];
    const double x0 = sorted_[k - 1], x1 = sorted_[k];
    return x0 + (u - l0) / (l1 - l0) * (x1 - x0);
  }

  double density(double x) const {
    const double h = bandwidth_;
    const double lo = x - kKernelReach * h;
    const double hi = x + kKernelReach * h;
    auto first = std::lower_bound(sorted_.begin(), sorted_.end(), lo);
    auto last = std::upper_bound(first, sorted_.end(), hi);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      acc += weights_[static_cast<std::size_t>(it - sorted_.begin())] * std::exp(-0.5 * z * z);
    }
    return acc / (h * std::sqrt(2.0 * std::numbers::pi));
  }

  double log_density(double x) const {
    const double d = density(x);
    return d > 0.0 ? std::log(d) : -std::numeric_limits<double>::infinity();
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < sorted_.size(); ++k) m += weights_[k] * sorted_[k];
    return m;
  }

  double sd() const {
    const double m = mean();
    double v = 0.0, w2 = 0.0;
    for (std::size_t k = 0; k < sorted_.size(); ++k) {
      v += weights_[k] * (sorted_[k] - m) * (sorted_[k] - m);
      w2 += weights_[k] * weights_[k];
    }
    return w2 < 1.0 ? std::sqrt(v / (1.0 - w2)) : 0.0;
  }

  /// Order-statistic quantile under the core convention (k = ceil(q n)).
  double order_statistic(double prob) const { return weighted_order_statistic(sorted_, cumulative_, prob); }

  double iqr() const { return order_statistic(0.75) - order_statistic(0.25); }

  double effective_size() const {
    double w2 = 0.0;
    for (double w : weights_) w2 += w * w;
    return 1.0 / w2;
  }

  friend bool operator==(const MarginalEstimate& a, const MarginalEstimate& b) {
    return a.sorted_ == b.sorted_ && a.weights_ == b.weights_ && a.bandwidth_ == b.bandwidth_ &&
           a.equal_weights_ == b.equal_weights_;
  }

  static constexpr double kKernelReach = 10.0;  // kernel truncated beyond 10 bandwidths (mass < 1e-22)

 private:
  static bool all_equal(std::span<const double> w) {
    return std::all_of(w.begin(), w.end(), [&](double v) { return v == w.front(); });
  }

  void build_levels() {
    const std::size_t n = sorted_.size();
    levels_.resize(n);
    cumulative_.resize(n);
    const double denom = static_cast<double>(n) + 1.0;
    double c = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      c += weights_[r];
      cumulative_[r] = equal_weights_ ? static_cast<double>(r + 1) / static_cast<double>(n) : c;
      levels_[r] = equal_weights_ ? static_cast<double>(r + 1) / denom
                                  : (static_cast<double>(n) * (c - 0.5 * weights_[r]) + 0.5) / denom;
    }
  }

  double silverman_bandwidth() const {
    const double s = sd();
    const double spread = iqr() / 1.34;
    double scale = std::min(s, spread);
    if (!(scale > 0.0)) scale = s;
    // a constant sample can carry a rounding-level weighted sd
    if (!(scale > 0.0) || sorted_.front() == sorted_.back()) throw numerical_error("MarginalEstimate: degenerate sample (zero spread)");
    return 0.9 * scale * std::pow(effective_size(), -0.2);
  }

  std::vector<double> sorted_;
  std::vector<double> weights_;
  std::vector<double> levels_;
  std::vector<double> cumulative_;
  bool equal_weights_ = true;
  double bandwidth_ = 0.0;
};

/// Exact normal marginal with the same interface; used for closed-form checks
/// of the meta-Gaussian density and for user-supplied parametric marginals.
class NormalMarginal {
 public:
  NormalMarginal(double mean, double sd) : mean_(mean), sd_(sd) {
    require(sd > 0.0 && std::isfinite(sd) && std::isfinite(mean), "NormalMarginal: bad parameters");
  }
  double cdf(double x) const { return normal_cdf((x - mean_) / sd_); }
  double quantile(double u) const { return mean_ + sd_ * normal_quantile(u); }
  double normal_score(double x) const { return (x - mean_) / sd_; }
  double density(double x) const { return normal_pdf((x - mean_) / sd_) / sd_; }
  double log_density(double x) const { return normal_log_pdf((x - mean_) / sd_) - std::log(sd_); }
  double mean() const { return mean_; }
  double sd() const { return sd_; }
  double iqr() const { return 2.0 * 0.6744897501960817 * sd_; }
  double order_statistic(double prob) const { return quantile(prob); }

 private:
  double mean_;
  double sd_;
};

}  // namespace copabc
