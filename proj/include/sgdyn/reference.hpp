#pragma once

// Serial reference kernels. Straightforward O(n^2) / O(n) formulations kept
// as oracles for the tree-walking kernels in HierarchicalGrid and for the
// benchmark target.

#include <span>
#include <vector>

#include "sgdyn/sparse_grid.hpp"

namespace sgdyn::reference {

/// Surpluses by ascending level sum: alpha(p) = value(p) - interpolant-so-far(p).
std::vector<double> hierarchize(const HierarchicalGrid& grid);

/// Direct sum over every node of alpha * basis product.
std::vector<double> interpolate(const HierarchicalGrid& grid, std::span<const double> x);

/// Serial loop over points calling interpolate().
void interpolate_batch(const HierarchicalGrid& grid, std::span<const double> xs, std::span<double> out);

}  // namespace sgdyn::reference
