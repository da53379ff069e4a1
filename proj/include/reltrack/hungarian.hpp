#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include <reltrack/core.hpp>

namespace reltrack {

using CostMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct AssignmentResult {
    std::vector<std::pair<int, int>> matches;  // (row, col), ascending row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
    Real cost = 0;  // sum of matched entries, accumulated in row order
};

/// Minimum-cost assignment on the zero-padded square of `cost`. Among optimal
/// assignments the lexicographically smallest (row order) is returned.
AssignmentResult hungarian(const CostMatrix& cost);

}  // namespace reltrack
