#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace copabc {

using Index = Eigen::Index;

/// Parameter vector theta (length p) and summary vector s (length q). Kept as
/// plain Eigen vectors so they compose with the linear algebra; dimension
/// checks happen at the API boundary.
using ParameterVector = Eigen::VectorXd;
using SummaryVector = Eigen::VectorXd;

/// Zero-based column indices into a parameter or summary vector.
using IndexSet = std::vector<std::size_t>;

/// Binary model indicator (gamma); entries are 0 or 1.
using InclusionVector = std::vector<std::uint8_t>;

}  // namespace copabc
