#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/parallel.hpp"
#include "copabc/core/rng.hpp"
#include "copabc/core/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

namespace copabc {

/// A generative model as seen by the ABC engine. Only `sample_prior` and
/// `simulate` are mandatory; when no importance sampler is given the prior is
/// used and every importance ratio is one.
struct SimulatorModel {
  std::string id;
  std::size_t param_dim = 0;
  std::size_t summary_dim = 0;

  std::function<ParameterVector(SeededRng&)> sample_prior;
  std::function<SummaryVector(const ParameterVector&, SeededRng&)> simulate;

  // Unnormalised log densities; needed only with a non-prior importance sampler.
  std::function<double(const ParameterVector&)> log_prior_density;
  std::function<ParameterVector(SeededRng&)> sample_importance;
  std::function<double(const ParameterVector&)> log_importance_density;

  bool uses_importance_sampler() const { return static_cast<bool>(sample_importance); }
};

/// N prior-predictive pairs (theta, s) with importance ratios p/f, stored
/// column-major so that per-subset distance sweeps read contiguous memory.
class ReferenceTable {
 public:
  ReferenceTable() = default;

  ReferenceTable(Eigen::MatrixXd params, Eigen::MatrixXd summaries, Eigen::VectorXd ratios,
                 std::uint64_t seed = 0, std::string model_id = {})
      : params_(std::move(params)),
        summaries_(std::move(summaries)),
        ratios_(std::move(ratios)),
        seed_(seed),
        model_id_(std::move(model_id)) {
    require(params_.rows() >= 1, "ReferenceTable: need at least one row");
    require(params_.rows() == summaries_.rows() && params_.rows() == ratios_.size(),
            "ReferenceTable: row counts disagree");
    require((ratios_.array() >= 0.0).all() && ratios_.allFinite(), "ReferenceTable: bad importance ratios");
    prior_as_importance_ = (ratios_.array() == 1.0).all();
  }

  Index size() const { return params_.rows(); }
  Index param_dim() const { return params_.cols(); }
  Index summary_dim() const { return summaries_.cols(); }

  const Eigen::MatrixXd& params() const { return params_; }
  const Eigen::MatrixXd& summaries() const { return summaries_; }
  const Eigen::VectorXd& ratios() const { return ratios_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& model_id() const { return model_id_; }

  bool prior_as_importance() const { return prior_as_importance_; }

  friend bool operator==(const ReferenceTable& a, const ReferenceTable& b) {
    return a.seed_ == b.seed_ && a.model_id_ == b.model_id_ && a.params_ == b.params_ &&
           a.summaries_ == b.summaries_ && a.ratios_ == b.ratios_;
  }

 private:
  Eigen::MatrixXd params_;
  Eigen::MatrixXd summaries_;
  Eigen::VectorXd ratios_;
  std::uint64_t seed_ = 0;
  std::string model_id_;
  bool prior_as_importance_ = true;
};

inline constexpr int kSimulationRetries = 10;
inline constexpr Index kTableBlockRows = 1024;

/// Builds N rows of the reference table. Rows are generated in fixed-size blocks, each
/// with its own stream derived from `seed`, so the result does not depend on
/// the thread count. A row whose simulation fails is redrawn (new theta) up to
/// kSimulationRetries times before the whole build fails.
inline ReferenceTable build_reference_table(const SimulatorModel& model, Index n_rows, std::uint64_t seed,
                                            std::size_t threads = 0) {
  require(n_rows >= 1, "build_reference_table: N must be at least 1");
  require(model.param_dim > 0 && model.summary_dim > 0, "build_reference_table: model dimensions not set");
  require(static_cast<bool>(model.sample_prior) && static_cast<bool>(model.simulate),
          "build_reference_table: model lacks a prior sampler or simulator");
  const bool importance = model.uses_importance_sampler();
  if (importance)
    require(static_cast<bool>(model.log_prior_density) && static_cast<bool>(model.log_importance_density),
            "build_reference_table: importance sampling needs prior and importance densities");

  const auto p = static_cast<Index>(model.param_dim);
  const auto q = static_cast<Index>(model.summary_dim);
  Eigen::MatrixXd params(n_rows, p);
  Eigen::MatrixXd summaries(n_rows, q);
  Eigen::VectorXd ratios = Eigen::VectorXd::Ones(n_rows);
  const Index blocks = (n_rows + kTableBlockRows - 1) / kTableBlockRows;
  SeededRng root(seed, 0);

  parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t b) {
    SeededRng rng = root.derive(static_cast<std::uint64_t>(b) + 1);
    const Index begin = static_cast<Index>(b) * kTableBlockRows;
    const Index end = std::min(n_rows, begin + kTableBlockRows);
    for (Index r = begin; r < end; ++r) {
      for (int attempt = 0;; ++attempt) {
        ParameterVector theta = importance ? model.sample_importance(rng) : model.sample_prior(rng);
        if (theta.size() != p) throw std::invalid_argument("build_reference_table: sampler returned wrong dimension");
        try {
          SummaryVector s = model.simulate(theta, rng);
          if (s.size() != q) throw std::invalid_argument("build_reference_table: simulator returned wrong dimension");
          if (!s.allFinite()) throw simulation_failure("non-finite summary");
          params.row(r) = theta.transpose();
          summaries.row(r) = s.transpose();
          if (importance) {
            const double lr = model.log_prior_density(theta) - model.log_importance_density(theta);
            ratios(r) = std::exp(lr);
          }
          break;
        } catch (const simulation_failure& e) {
          if (attempt + 1 >= kSimulationRetries)
            throw numerical_error("build_reference_table: simulator failed " + std::to_string(kSimulationRetries) +
                                  " times for row " + std::to_string(r) + ": " + e.what());
        }
      }
    }
  });
  return ReferenceTable(std::move(params), std::move(summaries), std::move(ratios), seed, model.id);
}

}  // namespace copabc
