#pragma once

#include <Eigen/Dense>

namespace ekmix {

/// Upper bound on the species count. Matrices are dynamically sized but
/// capped, so the per-cell algebra in the solvers never touches the heap.
inline constexpr int kMaxSpecies = 32;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxSpecies,
                             kMaxSpecies>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxSpecies, 1>;

}  // namespace ekmix
