#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/select.hpp"
#include "copabc/adjust/adjustments.hpp"
#include "copabc/copula/fit.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/diagnostics/density_grids.hpp"
#include "copabc/models/twisted_normal.hpp"

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace copabc {

enum class KlMethod { rejection, rejection_marginal, regression, regression_marginal, copula };

inline constexpr std::array<KlMethod, 5> kAllKlMethods{KlMethod::rejection, KlMethod::rejection_marginal,
                                                       KlMethod::regression, KlMethod::regression_marginal,
                                                       KlMethod::copula};

inline std::string to_string(KlMethod m) {
  switch (m) {
    case KlMethod::rejection: return "rejection";
    case KlMethod::rejection_marginal: return "rejection+marg";
    case KlMethod::regression: return "regression";
    case KlMethod::regression_marginal: return "regression+marg";
    case KlMethod::copula: return "copula";
  }
  return "?";
}

inline std::optional<KlMethod> parse_kl_method(const std::string& s) {
  for (KlMethod m : kAllKlMethods)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct KlExperimentOptions {
  Index N = 200000;
  int replicates = 20;
  double quantile = 0.01;
  Index grid_nodes = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  double floor = kKlDensityFloor;
  double alt_floor = 1e-12;  // second floor for the sensitivity report
};

struct KlSummary {
  KlMethod method{};
  std::size_t p = 0;
  double mean = 0.0;
  double se = 0.0;
  double alt_floor_mean = 0.0;  // mean KL with q floored at opts.alt_floor
  std::vector<double> values;   // per replicate
};

struct KlExperimentResult {
  std::size_t p = 0;
  GridDensity2D truth;
  std::vector<KlSummary> summaries;            // one per requested method
  std::map<KlMethod, GridDensity2D> examples;  // replicate-0 estimate per method
  std::vector<RepairLog> repairs;              // copula repair log per replicate
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double standard_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// (theta_1, theta_2) estimates of every requested method from one reference table.
inline std::map<KlMethod, GridDensity2D> kl_method_grids(const TwistedNormalModel& model, const ReferenceTable& table,
                                                         const std::vector<KlMethod>& methods, const GridSpec& grid,
                                                         double quantile, RepairLog* repair = nullptr) {
  const SummaryMap smap = toy_summary_map(model.p);
  CopulaFitOptions opts;
  opts.quantile = quantile;
  opts.threads = 1;
  const IndexSet all = full_subset(table.summary_dim());
  const IndexSet cols{0, 1};

  bool need_copula = false, need_marginals = false;
  for (KlMethod m : methods) {
    need_copula = need_copula || m == KlMethod::copula;
    need_marginals = need_marginals || m == KlMethod::rejection_marginal || m == KlMethod::regression_marginal;
  }
  std::optional<CopulaPosterior> post;
  std::vector<MarginalEstimate> marginals;
  if (need_copula) {
    post = fit_copula(table, model.y_obs, smap, opts);
    marginals = {post->marginal(0), post->marginal(1)};
    if (repair) *repair = post->repair_log();
  } else if (need_marginals) {
    marginals = {fit_marginal(table, model.y_obs, smap, 0, opts), fit_marginal(table, model.y_obs, smap, 1, opts)};
  }

  const Selection sel = select_rows(table, model.y_obs, all, quantile, DistanceSpec::euclidean());
  const WeightedSampleSet raw = gather_columns(table, sel.rows, cols, all);
  std::optional<WeightedSampleSet> adjusted;

  std::map<KlMethod, GridDensity2D> out;
  for (KlMethod m : methods) {
    if (m == KlMethod::copula) {
      out[m] = copula_bivariate_grid(*post, 0, 1, grid);
      continue;
    }
    const bool regression = m == KlMethod::regression || m == KlMethod::regression_marginal;
    if (regression && !adjusted) adjusted = regression_adjust(raw, model.y_obs, all);
    Eigen::MatrixXd values = regression ? adjusted->params() : raw.params();
    if (m == KlMethod::rejection_marginal || m == KlMethod::regression_marginal) {
      adjust_column_to_marginal(values.col(0), marginals[0]);
      adjust_column_to_marginal(values.col(1), marginals[1]);
    }
    out[m] = kde2d(values.col(0), values.col(1), raw.weights(), grid);
    out[m].label = to_string(m);
  }
  return out;
}

/// Repeats the full pipeline on independent reference tables and averages
/// KL(truth || estimate) on the (theta_1, theta_2) margin.
inline KlExperimentResult replicate_kl_experiment(const TwistedNormalModel& model, const std::vector<KlMethod>& methods,
                                                  const KlExperimentOptions& opts) {
  model.validate();
  require(!methods.empty(), "replicate_kl_experiment: no methods requested");
  require(opts.replicates >= 1 && opts.N >= 1, "replicate_kl_experiment: need N >= 1 and replicates >= 1");
  KlExperimentResult res;
  res.p = model.p;
  const GridSpec grid = toy_truth_grid_spec(model, 0, 1, opts.grid_nodes);
  res.truth = toy_posterior_grid(model, 0, 1, grid);
  const SimulatorModel sim = toy_simulator_model(model);

  const auto R = static_cast<std::size_t>(opts.replicates);
  std::vector<std::vector<double>> kl(methods.size(), std::vector<double>(R));
  std::vector<std::vector<double>> kl_alt(methods.size(), std::vector<double>(R));
  res.repairs.resize(R);
  const std::size_t threads = opts.threads == 0 ? default_threads() : opts.threads;
  parallel_for(R, threads, [&](std::size_t r) {
    const std::uint64_t table_seed = SeededRng(opts.seed, model.p).derive(r).next_u64();
    const ReferenceTable table = build_reference_table(sim, opts.N, table_seed, 1);
    std::map<KlMethod, GridDensity2D> grids = kl_method_grids(model, table, methods, grid, opts.quantile, &res.repairs[r]);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      kl[k][r] = kl_grid(res.truth, grids.at(methods[k]), opts.floor);
      kl_alt[k][r] = kl_grid(res.truth, grids.at(methods[k]), opts.alt_floor);
    }
    if (r == 0) res.examples = std::move(grids);
  });
  for (std::size_t k = 0; k < methods.size(); ++k) {
    KlSummary s;
    s.method = methods[k];
    s.p = model.p;
    s.values = kl[k];
    s.mean = mean_of(kl[k]);
    s.se = standard_error_of(kl[k]);
    s.alt_floor_mean = mean_of(kl_alt[k]);
    res.summaries.push_back(std::move(s));
  }
  return res;
}

}  // namespace copabc
