#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/abc/table_io.hpp"
#include "copabc/cli/config.hpp"
#include "copabc/cli/summary_map_io.hpp"
#include "copabc/copula/fit.hpp"
#include "copabc/copula/mle.hpp"
#include "copabc/copula/serialization.hpp"
#include "copabc/core/io.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/diagnostics/kl_experiment.hpp"
#include "copabc/discrete/discrete_copula.hpp"
#include "copabc/models/gk_pipeline.hpp"
#include "copabc/models/varsel.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace copabc::cli {

/// Values supplied by command-line flags; each one overrides the config.
struct RunOptions {
  std::string config_path;  // empty: defaults only
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir = "copabc-out";
  std::ostream* log = &std::cerr;  // progress messages
};

/// Per-invocation state shared by the commands.
class Context {
 public:
  Context(Config cfg, const RunOptions& run) : cfg_(std::move(cfg)), run_(run) {
    if (run.seed) cfg_.set("run", "seed", std::to_string(*run.seed));
    if (!cfg_.has("run", "seed"))
      throw config_error(cfg_.source() + ": no seed given; set [run] seed or pass --seed");
    seed_ = cfg_.get_uint("run", "seed", 0);
    use_cache_ = cfg_.get_bool("run", "cache", true);
    cache_dir_ = cfg_.get_string("run", "cache_dir", (std::filesystem::path(run.out_dir) / "cache").string());
    threads_ = run.threads.value_or(0);
    if (threads_ > 0) set_default_threads(threads_);
    std::filesystem::create_directories(run.out_dir);
  }

  Config& config() { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t threads() const { return threads_; }
  std::ostream& log() { return *run_.log; }

  std::filesystem::path out(const std::string& name) const { return std::filesystem::path(run_.out_dir) / name; }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream f(out(name), std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out(name).string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + out(name).string());
    written_.push_back(name);
  }

  /// Rejects unused keys and writes the resolved configuration.
  void finish_config(const std::vector<std::string>& sections) {
    std::vector<std::string> all = sections;
    all.push_back("run");
    cfg_.finish(all);
    write("effective_config.ini", cfg_.echo());
  }

  /// The reference table for (model key, N, seed), from the cache when present.
  ReferenceTable table(const SimulatorModel& sim, const std::string& key, Index n_rows, std::uint64_t table_seed) {
    const std::string full = key + "|N=" + std::to_string(n_rows) + "|seed=" + std::to_string(table_seed) + "|v1";
    char name[40];
    std::snprintf(name, sizeof name, "table-%016llx.bin", static_cast<unsigned long long>(fnv1a(full)));
    const std::filesystem::path path = std::filesystem::path(cache_dir_) / name;
    if (use_cache_ && std::filesystem::exists(path)) {
      ReferenceTable t = load_reference_table(path.string());
      if (t.size() == n_rows && t.seed() == table_seed && t.model_id() == sim.id &&
          t.param_dim() == static_cast<Index>(sim.param_dim) && t.summary_dim() == static_cast<Index>(sim.summary_dim)) {
        log() << "reference table: cache hit " << path.string() << '\n';
        return t;
      }
      log() << "reference table: stale cache entry " << path.string() << ", rebuilding\n";
    }
    log() << "reference table: simulating " << n_rows << " rows for " << sim.id << '\n';
    ReferenceTable t = build_reference_table(sim, n_rows, table_seed, threads_);
    if (use_cache_) {
      std::filesystem::create_directories(cache_dir_);
      const std::filesystem::path tmp = path.string() + ".tmp";
      save_reference_table(t, tmp.string());
      std::filesystem::rename(tmp, path);
    }
    return t;
  }

  const std::vector<std::string>& written() const { return written_; }

  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
  }

 private:
  Config cfg_;
  RunOptions run_;
  std::uint64_t seed_ = 0;
  bool use_cache_ = true;
  std::string cache_dir_;
  std::size_t threads_ = 0;
  mutable std::vector<std::string> written_;
};

namespace detail {

inline std::string fmt(double x) { return io::format_double(x); }

inline void require_config(bool ok, const Config& cfg, const std::string& section, const std::string& key,
                           const std::string& msg) {
  if (!ok) throw config_error(cfg.where(section, key) + msg);
}

inline void append_grid(std::ostringstream& out, const GridDensity2D& g, const std::string& method) {
  const Eigen::VectorXd xs = g.grid.xs(), ys = g.grid.ys();
  for (Index a = 0; a < g.grid.nx; ++a)
    for (Index b = 0; b < g.grid.ny; ++b)
      out << fmt(xs(a)) << ',' << fmt(ys(b)) << ',' << fmt(g.values(a, b)) << ',' << method << '\n';
}

inline std::string ranking_csv(const std::vector<RankedModel>& models) {
  std::ostringstream out;
  out << "gamma,log_prob,mc_se,rank\n";
  for (const RankedModel& m : models)
    out << to_bitstring(m.gamma) << ',' << fmt(m.log_prob) << ',' << fmt(m.mc_se) << ',' << m.rank << '\n';
  return out.str();
}

inline std::string matrix_hash_text(const Eigen::MatrixXd& m) {
  std::string bytes(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(Context::fnv1a(bytes)));
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ":" + buf;
}

// Stream tags for the command-level random streams.
inline constexpr std::uint64_t kTableStream = 0x7461626c65;
inline constexpr std::uint64_t kObservedStream = 0x6f6273;
inline constexpr std::uint64_t kSampleStream = 0x73616d706c65;

}  // namespace detail

// ---- toy-kl -------------------------------------------------------------------

/// KL comparison of the five methods on the twisted-normal model.
/// Writes kl_results.csv, kl_floor_sensitivity.csv, kl_replicates.csv and
/// one long-format contour grid per p.
inline void cmd_toy_kl(Context& ctx) {
  Config& c = ctx.config();
  const std::vector<std::uint64_t> ps = c.get_uints("toy", "p", {2, 5, 50});
  const double b = c.get_double("toy", "b", 0.1);
  const double sigma0 = c.get_double("toy", "sigma0", 1.0);
  const double y1 = c.get_double("toy", "y1", 10.0);
  KlExperimentOptions opts;
  opts.N = static_cast<Index>(c.get_uint("toy", "N", 200000));
  opts.replicates = static_cast<int>(c.get_uint("toy", "replicates", 20));
  opts.quantile = c.get_double("toy", "quantile", 0.01);
  opts.grid_nodes = static_cast<Index>(c.get_uint("toy", "grid_nodes", 200));
  opts.floor = c.get_double("toy", "floor", kKlDensityFloor);
  opts.alt_floor = c.get_double("toy", "alt_floor", 1e-12);
  const bool write_grids = c.get_bool("toy", "write_grids", true);
  std::vector<std::string> names;
  for (KlMethod m : kAllKlMethods) names.push_back(to_string(m));
  const std::vector<std::string> method_names = c.get_strings("toy", "methods", names);
  opts.seed = ctx.seed();
  opts.threads = ctx.threads();

  detail::require_config(!ps.empty(), c, "toy", "p", "need at least one dimension");
  for (std::uint64_t p : ps) detail::require_config(p >= 2, c, "toy", "p", "every p must be at least 2");
  detail::require_config(sigma0 > 0.0, c, "toy", "sigma0", "must be positive");
  detail::require_config(opts.N >= 10, c, "toy", "N", "must be at least 10");
  detail::require_config(opts.replicates >= 1, c, "toy", "replicates", "must be at least 1");
  detail::require_config(opts.quantile > 0.0 && opts.quantile <= 1.0, c, "toy", "quantile", "must lie in (0, 1]");
  detail::require_config(opts.grid_nodes >= 2, c, "toy", "grid_nodes", "must be at least 2");
  detail::require_config(opts.floor > 0.0 && opts.alt_floor > 0.0, c, "toy", "floor", "floors must be positive");
  std::vector<KlMethod> methods;
  for (const std::string& n : method_names) {
    const auto m = parse_kl_method(n);
    detail::require_config(m.has_value(), c, "toy", "methods", "unknown method '" + n + "'");
    methods.push_back(*m);
  }
  detail::require_config(!methods.empty(), c, "toy", "methods", "need at least one method");
  ctx.finish_config({"toy"});

  std::ostringstream results, floors, reps;
  results << "p,method,mean_kl,se,N,replicates,seed\n";
  floors << "p,method,floor,mean_kl\n";
  reps << "p,method,replicate,kl\n";
  for (std::uint64_t p : ps) {
    TwistedNormalModel model = TwistedNormalModel::make(static_cast<std::size_t>(p), b, sigma0);
    model.y_obs(0) = y1;
    ctx.log() << "toy-kl: p=" << p << ", " << opts.replicates << " replicates of N=" << opts.N << '\n';
    const KlExperimentResult res = replicate_kl_experiment(model, methods, opts);
    for (const KlSummary& s : res.summaries) {
      results << p << ',' << to_string(s.method) << ',' << detail::fmt(s.mean) << ',' << detail::fmt(s.se) << ','
              << opts.N << ',' << opts.replicates << ',' << opts.seed << '\n';
      floors << p << ',' << to_string(s.method) << ',' << detail::fmt(opts.floor) << ',' << detail::fmt(s.mean)
             << '\n';
      floors << p << ',' << to_string(s.method) << ',' << detail::fmt(opts.alt_floor) << ','
             << detail::fmt(s.alt_floor_mean) << '\n';
      for (std::size_t r = 0; r < s.values.size(); ++r)
        reps << p << ',' << to_string(s.method) << ',' << r << ',' << detail::fmt(s.values[r]) << '\n';
    }
    if (write_grids) {
      std::ostringstream grid;
      grid << "x,y,density,method\n";
      detail::append_grid(grid, res.truth, "truth");
      for (KlMethod m : methods) detail::append_grid(grid, res.examples.at(m), to_string(m));
      ctx.write("toy_grid_p" + std::to_string(p) + ".csv", grid.str());
    }
  }
  ctx.write("kl_results.csv", results.str());
  ctx.write("kl_floor_sensitivity.csv", floors.str());
  ctx.write("kl_replicates.csv", reps.str());
}

// ---- gk -------------------------------------------------------------------------

struct GkRunSummary {
  std::size_t q = 0, p = 0;
  MleResult mle;
  std::optional<GkCoverageResult> coverage;
};

/// Multivariate g-and-k experiment on synthetic data simulated at a known
/// truth. Writes the fitted posterior, the pair grids of five methods, the
/// approximate MLE report and, when requested, the coverage study.
inline GkRunSummary cmd_gk(Context& ctx) {
  Config& c = ctx.config();
  const auto q = static_cast<std::size_t>(c.get_uint("gk", "q", 3));
  const auto n = static_cast<Index>(c.get_uint("gk", "n", 1757));
  const auto N = static_cast<Index>(c.get_uint("gk", "N", 100000));
  GkTruth truth;
  truth.margin.A = c.get_double("gk", "truth_A", truth.margin.A);
  truth.margin.B = c.get_double("gk", "truth_B", truth.margin.B);
  truth.margin.g = c.get_double("gk", "truth_g", truth.margin.g);
  truth.margin.k = c.get_double("gk", "truth_k", truth.margin.k);
  truth.rho = c.get_double("gk", "truth_rho", truth.rho);
  GkBox box;
  box.A_lo = c.get_double("gk", "box_A_lo", box.A_lo);
  box.A_hi = c.get_double("gk", "box_A_hi", box.A_hi);
  box.B_lo = c.get_double("gk", "box_B_lo", box.B_lo);
  box.B_hi = c.get_double("gk", "box_B_hi", box.B_hi);
  box.g_lo = c.get_double("gk", "box_g_lo", box.g_lo);
  box.g_hi = c.get_double("gk", "box_g_hi", box.g_hi);
  box.k_lo = c.get_double("gk", "box_k_lo", box.k_lo);
  box.k_hi = c.get_double("gk", "box_k_hi", box.k_hi);
  GkPipelineOptions opts;
  opts.quantile = c.get_double("gk", "quantile", opts.quantile);
  opts.scale_draws = static_cast<std::size_t>(c.get_uint("gk", "scale_draws", opts.scale_draws));
  opts.regression_adjust = c.get_bool("gk", "regression_adjust", opts.regression_adjust);
  opts.hessian_step = c.get_double("gk", "hessian_step", opts.hessian_step);
  opts.threads = ctx.threads();
  opts.seed = ctx.seed();
  const std::vector<std::uint64_t> pair = c.get_uints("gk", "pair", {2, 4});
  const auto grid_nodes = static_cast<Index>(c.get_uint("gk", "grid_nodes", 100));
  const auto coverage = static_cast<int>(c.get_uint("gk", "coverage_replicates", 0));

  detail::require_config(q >= 1 && q <= 64, c, "gk", "q", "must lie in 1..64");
  detail::require_config(n >= 8, c, "gk", "n", "must be at least 8");
  const std::size_t p = gk_param_count(q);
  detail::require_config(N >= 100, c, "gk", "N", "must be at least 100");
  detail::require_config(opts.quantile > 0.0 && opts.quantile <= 1.0, c, "gk", "quantile", "must lie in (0, 1]");
  detail::require_config(opts.hessian_step > 0.0, c, "gk", "hessian_step", "must be positive");
  detail::require_config(pair.size() == 2 && pair[0] != pair[1] && pair[0] >= 1 && pair[1] >= 1 && pair[0] <= p &&
                             pair[1] <= p,
                         c, "gk", "pair", "need two distinct parameter indices in 1.." + std::to_string(p));
  detail::require_config(grid_nodes >= 2, c, "gk", "grid_nodes", "must be at least 2");
  try {
    box.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(c.where("gk", "box_A_lo") + e.what());
  }
  MultiGkModel truth_model;
  try {
    truth_model = truth.model(q, n);
  } catch (const std::invalid_argument& e) {
    throw config_error(c.where("gk", "truth_rho") + e.what());
  } catch (const numerical_error& e) {
    throw config_error(c.where("gk", "truth_rho") + e.what());
  }
  detail::require_config(opts.scale_draws >= 4 * q + q * (q - 1) / 2 + 1, c, "gk", "scale_draws",
                         "must exceed the number of summaries");
  ctx.finish_config({"gk"});

  const IndexSet subset{static_cast<std::size_t>(pair[0] - 1), static_cast<std::size_t>(pair[1] - 1)};
  SeededRng obs_rng(ctx.seed(), detail::kObservedStream);
  const SummaryVector s_obs = multigk_summaries(multigk_simulate(truth_model, obs_rng));
  const SimulatorModel sim = gk_simulator_model(q, n, box);
  const std::string key = sim.id + "|box=" + detail::fmt(box.A_lo) + "," + detail::fmt(box.A_hi) + "," +
                          detail::fmt(box.B_lo) + "," + detail::fmt(box.B_hi) + "," + detail::fmt(box.g_lo) + "," +
                          detail::fmt(box.g_hi) + "," + detail::fmt(box.k_lo) + "," + detail::fmt(box.k_hi);
  const ReferenceTable table = ctx.table(sim, key, N, SeededRng(ctx.seed(), detail::kTableStream).next_u64());

  ctx.log() << "gk: pilot fit and Mahalanobis scale (p=" << p << ")\n";
  const GkPilot pilot = gk_pilot(table, s_obs, q, n, opts, box);
  const CopulaFitOptions fo = gk_fit_options(pilot, opts);
  ctx.log() << "gk: copula fit\n";
  const CopulaPosterior post = fit_copula(table, s_obs, gk_summary_map(q), fo);
  {
    std::ostringstream bin;
    write_copula(bin, post);
    ctx.write("gk_posterior.bin", bin.str());
  }
  {
    std::ostringstream sm;
    write_summary_map(sm, gk_summary_map(q));
    ctx.write("gk_summary_map.txt", sm.str());
  }

  ctx.log() << "gk: pair grids\n";
  const GridSpec grid = gk_pair_grid(post, subset[0], subset[1], grid_nodes);
  const std::map<std::string, GridDensity2D> grids = gk_pair_grids(table, s_obs, post, subset[0], subset[1], grid, fo);
  {
    std::ostringstream g;
    g << "x,y,density,method\n";
    for (const char* m : {"regression", "marginal", "regression_marginal", "pairwise_kde", "copula"})
      detail::append_grid(g, grids.at(m), m);
    ctx.write("gk_grid.csv", g.str());
  }

  GkRunSummary summary;
  summary.q = q;
  summary.p = p;
  ctx.log() << "gk: approximate MLE\n";
  {
    MleOptions mo;
    mo.seed = opts.seed;
    mo.hessian_step = opts.hessian_step;
    IndexSet local{0, 1};
    summary.mle = approx_mle(post.sub(subset), gk_box_log_prior(q, subset, box), local, mo);
  }
  const ParameterVector theta_true = gk_pack(truth_model);
  {
    std::ostringstream r;
    r << "parameter,index,truth,estimate,se,lower,upper,inside,hessian_ok\n";
    for (std::size_t a = 0; a < subset.size(); ++a) {
      const auto ia = static_cast<Index>(a);
      const double t = theta_true(static_cast<Index>(subset[a]));
      const double est = summary.mle.estimate(ia), se = summary.mle.se(ia);
      r << gk_param_name(q, subset[a]) << ',' << subset[a] + 1 << ',' << detail::fmt(t) << ',' << detail::fmt(est)
        << ',' << detail::fmt(se) << ',' << detail::fmt(est - 2.0 * se) << ',' << detail::fmt(est + 2.0 * se) << ','
        << (std::abs(t - est) <= 2.0 * se ? 1 : 0) << ',' << (summary.mle.hessian_ok ? 1 : 0) << '\n';
    }
    ctx.write("gk_mle.csv", r.str());
  }
  {
    std::ostringstream s;
    const RepairLog& log = post.repair_log();
    s << "key,value\n"
      << "q," << q << "\np," << p << "\nN," << N << "\nseed," << ctx.seed() << "\ncorrelation_repaired,"
      << (log.repaired ? 1 : 0) << "\nmin_eigenvalue_before," << detail::fmt(log.min_eigenvalue_before)
      << "\nmax_abs_change," << detail::fmt(log.max_abs_change) << "\npilot_v_repaired,"
      << (pilot.v_repair.repaired ? 1 : 0) << '\n';
    ctx.write("gk_summary.csv", s.str());
  }

  if (coverage > 0) {
    ctx.log() << "gk: coverage study, " << coverage << " replicates\n";
    summary.coverage = gk_coverage(table, truth_model, subset, coverage, opts, box);
    std::ostringstream cv;
    cv << "replicate";
    for (std::size_t a : subset) cv << ',' << gk_param_name(q, a) << "_estimate," << gk_param_name(q, a) << "_se";
    cv << ",covered\n";
    for (std::size_t r = 0; r < summary.coverage->replicates.size(); ++r) {
      const GkCoverageReplicate& rep = summary.coverage->replicates[r];
      cv << r;
      for (Index a = 0; a < rep.estimate.size(); ++a) cv << ',' << detail::fmt(rep.estimate(a)) << ',' << detail::fmt(rep.se(a));
      cv << ',' << (rep.covered ? 1 : 0) << '\n';
    }
    ctx.write("gk_coverage.csv", cv.str());
    std::ostringstream s;
    s << "replicates,rate\n" << coverage << ',' << detail::fmt(summary.coverage->rate) << '\n';
    ctx.write("gk_coverage_summary.csv", s.str());
  }
  return summary;
}

// ---- varsel ---------------------------------------------------------------------------

struct VarselRunSummary {
  std::map<std::string, std::size_t> overlaps;  // "a-vs-b" -> top-10 intersection
};

/// Reads a dataset CSV with a column `y` and covariates x1..xk.
inline VarselModel load_varsel_data(const std::string& path) {
  io::CsvTable csv;
  try {
    csv = io::read_csv(path);
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  } catch (const std::runtime_error& e) {
    throw config_error(e.what());
  }
  const auto ycol = csv.column("y");
  if (!ycol) throw config_error(path + ": no column 'y'");
  std::vector<std::size_t> xcols;
  for (std::size_t k = 1;; ++k) {
    const auto col = csv.column("x" + std::to_string(k));
    if (!col) break;
    xcols.push_back(*col);
  }
  if (xcols.empty()) throw config_error(path + ": no covariate columns x1..xk");
  if (xcols.size() + 1 != csv.header.size()) throw config_error(path + ": columns must be y and x1..xk only");
  const auto n = static_cast<Index>(csv.rows.size());
  Eigen::MatrixXd raw(n, static_cast<Index>(xcols.size()));
  VarselModel m;
  m.y.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = csv.rows[static_cast<std::size_t>(r)];
    m.y(r) = row[*ycol];
    for (std::size_t k = 0; k < xcols.size(); ++k) raw(r, static_cast<Index>(k)) = row[xcols[k]];
  }
  m.X = standardized_design(raw);
  return m;
}

/// Variable selection on a clean and an outlier-contaminated dataset: exact
/// enumeration, standard ABC and discrete copula ABC rankings with their
/// top-10 overlaps.
inline VarselRunSummary cmd_varsel(Context& ctx) {
  Config& c = ctx.config();
  const std::string data = c.get_string("varsel", "data", "");
  const auto n = static_cast<Index>(c.get_uint("varsel", "n", 50));
  const auto p_cov = static_cast<std::size_t>(c.get_uint("varsel", "p_cov", 10));
  const std::uint64_t data_seed = c.get_uint("varsel", "data_seed", 1);
  VarselModel hyper;
  hyper.a = c.get_double("varsel", "a", hyper.a);
  hyper.b = c.get_double("varsel", "b", hyper.b);
  hyper.a_sigma = c.get_double("varsel", "a_sigma", hyper.a_sigma);
  hyper.b_sigma = c.get_double("varsel", "b_sigma", hyper.b_sigma);
  const std::string G_text = c.get_string("varsel", "G", "");
  const auto N = static_cast<Index>(c.get_uint("varsel", "N", 20000));
  const auto n_keep = static_cast<std::size_t>(c.get_uint("varsel", "n_keep", 500));
  const double outlier = c.get_double("varsel", "outlier_factor", 10.0);
  QmcOptions qmc;
  qmc.shifts = static_cast<int>(c.get_uint("varsel", "qmc_shifts", static_cast<std::uint64_t>(qmc.shifts)));
  qmc.min_points = static_cast<Index>(c.get_uint("varsel", "qmc_min_points", static_cast<std::uint64_t>(qmc.min_points)));
  qmc.max_points = static_cast<Index>(c.get_uint("varsel", "qmc_max_points", static_cast<std::uint64_t>(qmc.max_points)));
  qmc.relative_error = c.get_double("varsel", "qmc_relative_error", qmc.relative_error);
  qmc.seed = ctx.seed();

  VarselModel m;
  if (data.empty()) {
    detail::require_config(p_cov >= 8 && p_cov <= 20, c, "varsel", "p_cov", "synthetic data needs 8 <= p_cov <= 20");
    detail::require_config(n > static_cast<Index>(p_cov) + 1, c, "varsel", "n", "must exceed p_cov + 1");
    m = synthetic_varsel(data_seed, n, p_cov);
  } else {
    m = load_varsel_data(data);
  }
  m.a = hyper.a;
  m.b = hyper.b;
  m.a_sigma = hyper.a_sigma;
  m.b_sigma = hyper.b_sigma;
  detail::require_config(m.p_cov() <= 20, c, "varsel", "data", "exhaustive ranking needs at most 20 covariates");
  detail::require_config(N >= 10, c, "varsel", "N", "must be at least 10");
  detail::require_config(n_keep >= 10 && static_cast<Index>(n_keep) <= N, c, "varsel", "n_keep", "must lie in 10..N");
  detail::require_config(outlier >= 0.0, c, "varsel", "outlier_factor", "must be non-negative");
  detail::require_config(qmc.shifts >= 2 && qmc.min_points >= 1 && qmc.max_points >= qmc.min_points &&
                             qmc.relative_error > 0.0,
                         c, "varsel", "qmc_shifts", "invalid QMC settings");
  if (G_text.empty()) {
    m.G = top_model_support(m);
  } else {
    for (const std::string& f : io::split(G_text, ',')) {
      const auto v = io::parse_double(f);
      detail::require_config(v && *v >= 1 && *v <= double(m.p_cov()) && std::floor(*v) == *v, c, "varsel", "G",
                             "covariate index '" + io::trim(f) + "' must be an integer in 1.." +
                                 std::to_string(m.p_cov()));
      m.G.push_back(static_cast<std::size_t>(*v) - 1);
    }
    std::sort(m.G.begin(), m.G.end());
    m.G.erase(std::unique(m.G.begin(), m.G.end()), m.G.end());
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(c.where("varsel", "data") + e.what());
  }
  {
    std::string g;
    for (std::size_t i : m.G) g += (g.empty() ? "" : ",") + std::to_string(i + 1);
    c.set("varsel", "G", g);
    c.get_string("varsel", "G", g);
  }
  ctx.finish_config({"varsel"});

  const VarselModel mo = with_outlier(m, outlier);
  const SimulatorModel sim = varsel_simulator_model(m);
  const std::string key = sim.id + "|X=" + detail::matrix_hash_text(m.X) + "|a=" + detail::fmt(m.a) +
                          "|b=" + detail::fmt(m.b) + "|as=" + detail::fmt(m.a_sigma) + "|bs=" + detail::fmt(m.b_sigma);
  ReferenceTable table;
  {
    ScopedWarningSink quiet;  // occasional Huber fallbacks inside the simulator
    table = ctx.table(sim, key, N, SeededRng(ctx.seed(), detail::kTableStream).next_u64());
  }
  const SummaryMap smap = varsel_summary_map(m.p_cov(), m.G);
  const SummaryVector s_clean = robust_summaries(m), s_out = robust_summaries(mo);
  DiscreteFitOptions fo;
  fo.n_keep = n_keep;
  fo.threads = ctx.threads();

  std::map<std::string, std::vector<RankedModel>> rankings;
  std::map<std::string, DiscreteCopulaPosterior> posts;
  for (const auto& [label, model, s] :
       {std::tuple<std::string, const VarselModel*, const SummaryVector*>{"clean", &m, &s_clean},
        {"outlier", &mo, &s_out}}) {
    ctx.log() << "varsel: " << label << " dataset\n";
    rankings["exact_" + label] = exact_enumerate(*model);
    rankings["standard_" + label] = standard_abc_ranking(table, *s, n_keep);
    posts[label] = fit_discrete_copula(table, *s, smap, fo);
    rankings["copula_" + label] = rank_models(posts[label], qmc, ctx.threads());
  }
  for (const auto& [name, r] : rankings) ctx.write("ranking_" + name + ".csv", detail::ranking_csv(r));

  VarselRunSummary summary;
  std::ostringstream ov;
  ov << "first,second,top10_overlap\n";
  const std::vector<std::pair<std::string, std::string>> comparisons{
      {"copula_clean", "exact_clean"},    {"standard_clean", "exact_clean"},   {"copula_outlier", "exact_outlier"},
      {"standard_outlier", "exact_outlier"}, {"copula_clean", "copula_outlier"}, {"exact_clean", "exact_outlier"},
      {"standard_clean", "standard_outlier"}};
  for (const auto& [a, b] : comparisons) {
    const std::size_t k = top_k_overlap(rankings.at(a), rankings.at(b), 10);
    summary.overlaps[a + "-vs-" + b] = k;
    ov << a << ',' << b << ',' << k << '\n';
  }
  ctx.write("overlap.csv", ov.str());

  std::ostringstream inc;
  inc << "covariate,copula_clean,copula_outlier,exact_clean,exact_outlier\n";
  for (std::size_t i = 0; i < m.p_cov(); ++i) {
    double e_clean = 0.0, e_out = 0.0;
    for (const RankedModel& r : rankings.at("exact_clean")) e_clean += r.gamma[i] * std::exp(r.log_prob);
    for (const RankedModel& r : rankings.at("exact_outlier")) e_out += r.gamma[i] * std::exp(r.log_prob);
    inc << 'x' << i + 1 << ',' << detail::fmt(1.0 - posts.at("clean").p0(static_cast<Index>(i))) << ','
        << detail::fmt(1.0 - posts.at("outlier").p0(static_cast<Index>(i))) << ',' << detail::fmt(e_clean) << ','
        << detail::fmt(e_out) << '\n';
  }
  ctx.write("inclusion.csv", inc.str());

  std::ostringstream ss;
  ss << "summary,clean,outlier\n";
  for (Index k = 0; k < s_clean.size(); ++k)
    ss << k + 1 << ',' << detail::fmt(s_clean(k)) << ',' << detail::fmt(s_out(k)) << '\n';
  ctx.write("observed_summaries.csv", ss.str());
  return summary;
}

// ---- fit / sample / density ---------------------------------------------------------------

/// Copula fit from an external reference table CSV (theta_1..theta_p,
/// s_1..s_q[, ratio]) and a summary-map file.
inline CopulaPosterior cmd_fit(Context& ctx) {
  Config& c = ctx.config();
  const std::string table_path = c.get_string("fit", "table", "");
  const std::string smap_path = c.get_string("fit", "summary_map", "");
  const std::vector<double> s_obs_v = c.get_doubles("fit", "s_obs", {});
  const auto p = static_cast<std::size_t>(c.get_uint("fit", "p", 0));
  const auto q = static_cast<std::size_t>(c.get_uint("fit", "q", 0));
  CopulaFitOptions fo;
  fo.quantile = c.get_double("fit", "quantile", fo.quantile);
  fo.regression_adjust = c.get_bool("fit", "regression_adjust", fo.regression_adjust);
  fo.marginal_adjust_pairs = c.get_bool("fit", "marginal_adjust_pairs", fo.marginal_adjust_pairs);
  const std::string distance = c.get_string("fit", "distance", "euclidean");
  const std::string out_name = c.get_string("fit", "output", "posterior.bin");
  fo.threads = ctx.threads();

  detail::require_config(!table_path.empty(), c, "fit", "table", "a reference-table CSV is required");
  detail::require_config(!smap_path.empty(), c, "fit", "summary_map", "a summary-map file is required");
  detail::require_config(fo.quantile > 0.0 && fo.quantile <= 1.0, c, "fit", "quantile", "must lie in (0, 1]");
  detail::require_config(distance == "euclidean" || distance == "mahalanobis", c, "fit", "distance",
                         "must be 'euclidean' or 'mahalanobis'");
  detail::require_config(!out_name.empty() && out_name.find('/') == std::string::npos, c, "fit", "output",
                         "must be a plain file name");
  ctx.finish_config({"fit"});

  ReferenceTable table;
  try {
    table = import_reference_table_csv(table_path, p, q, ctx.seed(), "csv:" + table_path);
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  } catch (const std::runtime_error& e) {
    throw config_error(e.what());
  }
  const auto tp = static_cast<std::size_t>(table.param_dim()), tq = static_cast<std::size_t>(table.summary_dim());
  const SummaryMap smap = load_summary_map(smap_path, tp, tq);
  if (s_obs_v.size() != tq)
    throw config_error(c.where("fit", "s_obs") + "expected " + std::to_string(tq) + " values, found " +
                       std::to_string(s_obs_v.size()));
  const SummaryVector s_obs = Eigen::Map<const Eigen::VectorXd>(s_obs_v.data(), static_cast<Index>(tq));
  if (distance == "mahalanobis") {
    // prior-predictive covariance of the summaries
    const Eigen::MatrixXd centred = table.summaries().rowwise() - table.summaries().colwise().mean();
    fo.distance = DistanceSpec::mahalanobis(centred.transpose() * centred / double(table.size() - 1));
  }
  const CopulaPosterior post = fit_copula(table, s_obs, smap, fo);
  std::ostringstream bin;
  write_copula(bin, post);
  ctx.write(out_name, bin.str());
  std::ostringstream corr;
  corr << "i,j,lambda\n";
  for (Index i = 0; i < post.correlation().rows(); ++i)
    for (Index j = i + 1; j < post.correlation().cols(); ++j)
      corr << i + 1 << ',' << j + 1 << ',' << detail::fmt(post.correlation()(i, j)) << '\n';
  ctx.write("correlation.csv", corr.str());
  std::ostringstream marg;
  marg << "parameter,mean,sd,q025,median,q975\n";
  for (std::size_t i = 0; i < post.dim(); ++i) {
    const MarginalEstimate& m = post.marginal(i);
    marg << i + 1 << ',' << detail::fmt(m.mean()) << ',' << detail::fmt(m.sd()) << ',' << detail::fmt(m.quantile(0.025))
         << ',' << detail::fmt(m.quantile(0.5)) << ',' << detail::fmt(m.quantile(0.975)) << '\n';
  }
  ctx.write("marginals.csv", marg.str());
  return post;
}

inline CopulaPosterior load_posterior_for(const Config& c, const std::string& section, const std::string& path) {
  if (path.empty()) throw config_error(c.where(section, "posterior") + "a posterior file is required");
  try {
    return load_copula(path);
  } catch (const std::runtime_error& e) {
    throw config_error(c.where(section, "posterior") + e.what());
  }
}

/// Draws from a saved copula posterior.
inline void cmd_sample(Context& ctx) {
  Config& c = ctx.config();
  const std::string path = c.get_string("sample", "posterior", "");
  const auto m = static_cast<Index>(c.get_uint("sample", "n", 1000));
  detail::require_config(m >= 1, c, "sample", "n", "must be at least 1");
  const CopulaPosterior post = load_posterior_for(c, "sample", path);
  ctx.finish_config({"sample"});
  SeededRng rng(ctx.seed(), detail::kSampleStream);
  const Eigen::MatrixXd draws = post.sample(m, rng);
  std::ostringstream out;
  for (std::size_t i = 0; i < post.dim(); ++i) out << (i ? "," : "") << "theta_" << i + 1;
  out << '\n';
  for (Index r = 0; r < draws.rows(); ++r) {
    for (Index i = 0; i < draws.cols(); ++i) out << (i ? "," : "") << detail::fmt(draws(r, i));
    out << '\n';
  }
  ctx.write("samples.csv", out.str());
}

/// Copula log density of a saved posterior at the points of a CSV with
/// columns theta_1..theta_p.
inline void cmd_density(Context& ctx) {
  Config& c = ctx.config();
  const std::string path = c.get_string("density", "posterior", "");
  const std::string points = c.get_string("density", "points", "");
  detail::require_config(!points.empty(), c, "density", "points", "a points CSV is required");
  const CopulaPosterior post = load_posterior_for(c, "density", path);
  ctx.finish_config({"density"});
  io::CsvTable csv;
  try {
    csv = io::read_csv(points);
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < post.dim(); ++i) {
    const auto col = csv.column("theta_" + std::to_string(i + 1));
    if (!col) throw config_error(points + ": missing column theta_" + std::to_string(i + 1));
    cols.push_back(*col);
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < post.dim(); ++i) out << "theta_" << i + 1 << ',';
  out << "log_density\n";
  Eigen::VectorXd theta(static_cast<Index>(post.dim()));
  for (const auto& row : csv.rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) theta(static_cast<Index>(i)) = row[cols[i]];
    for (std::size_t i = 0; i < cols.size(); ++i) out << detail::fmt(theta(static_cast<Index>(i))) << ',';
    out << detail::fmt(post.log_density(theta)) << '\n';
  }
  ctx.write("density.csv", out.str());
}

// ---- dispatch ------------------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"toy-kl", "gk", "varsel", "fit", "sample", "density"};
  return names;
}

/// Runs one command and maps failures to exit codes: 0 success, 2 config
/// error, 3 numerical failure, 1 anything else.
inline int run_command(const std::string& command, const RunOptions& run, std::ostream& err = std::cerr) {
  try {
    Config cfg = run.config_path.empty() ? Config() : Config::load(run.config_path);
    Context ctx(std::move(cfg), run);
    if (command == "toy-kl") {
      cmd_toy_kl(ctx);
    } else if (command == "gk") {
      cmd_gk(ctx);
    } else if (command == "varsel") {
      cmd_varsel(ctx);
    } else if (command == "fit") {
      cmd_fit(ctx);
    } else if (command == "sample") {
      cmd_sample(ctx);
    } else if (command == "density") {
      cmd_density(ctx);
    } else {
      throw config_error("unknown command '" + command + "'");
    }
    return 0;
  } catch (const config_error& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const numerical_error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace copabc::cli
