#pragma once

#include "copabc/core/errors.hpp"
#include "copabc/core/types.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

namespace copabc {

/// Which summary statistics are informative for each parameter, s_(i), and
/// for each parameter pair, s_(i,j). Pair subsets default to the union of the
/// two univariate subsets; explicit overrides replace the union.
class SummaryMap {
 public:
  SummaryMap() = default;

  SummaryMap(std::size_t summary_dim, std::vector<IndexSet> univariate,
             std::map<std::pair<std::size_t, std::size_t>, IndexSet> pair_overrides = {})
      : summary_dim_(summary_dim), univariate_(std::move(univariate)) {
    for (std::size_t i = 0; i < univariate_.size(); ++i) {
      normalise(univariate_[i]);
      validate(univariate_[i], "parameter " + std::to_string(i + 1));
    }
    for (auto& [key, subset] : pair_overrides) {
      auto [i, j] = key;
      if (i > j) std::swap(i, j);
      require(i != j && j < univariate_.size(),
              "SummaryMap: pair override (" + std::to_string(key.first + 1) + "," +
                  std::to_string(key.second + 1) + ") out of range");
      normalise(subset);
      validate(subset, "pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      overrides_[{i, j}] = subset;
    }
  }

  std::size_t param_dim() const { return univariate_.size(); }
  std::size_t summary_dim() const { return summary_dim_; }

  const IndexSet& univariate(std::size_t i) const {
    require(i < univariate_.size(), "SummaryMap: parameter index out of range");
    return univariate_[i];
  }

  IndexSet pairwise(std::size_t i, std::size_t j) const {
    require(i < univariate_.size() && j < univariate_.size() && i != j, "SummaryMap: bad pair");
    if (i > j) std::swap(i, j);
    if (auto it = overrides_.find({i, j}); it != overrides_.end()) return it->second;
    IndexSet out;
    std::set_union(univariate_[i].begin(), univariate_[i].end(), univariate_[j].begin(), univariate_[j].end(),
                   std::back_inserter(out));
    return out;
  }

  const std::map<std::pair<std::size_t, std::size_t>, IndexSet>& overrides() const { return overrides_; }

  /// Union of every univariate subset (the "standard ABC" conditioning set).
  IndexSet all_informative() const {
    IndexSet out;
    for (const auto& s : univariate_) out.insert(out.end(), s.begin(), s.end());
    normalise(out);
    return out;
  }

 private:
  static void normalise(IndexSet& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }

  void validate(const IndexSet& s, const std::string& what) const {
    require(!s.empty(), "SummaryMap: empty summary subset for " + what);
    for (std::size_t k : s)
      require(k < summary_dim_, "SummaryMap: summary index " + std::to_string(k + 1) + " out of range for " + what);
  }

  std::size_t summary_dim_ = 0;
  std::vector<IndexSet> univariate_;
  std::map<std::pair<std::size_t, std::size_t>, IndexSet> overrides_;
};

}  // namespace copabc
