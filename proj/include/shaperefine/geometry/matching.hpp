#pragma once

#include <cstddef>
#include <vector>

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

/// Minimum-cost perfect assignment on a dense n x n cost matrix (row-major).
/// Returns `col` with row i assigned to column col[i]. O(n^3) Hungarian
/// method with potentials; ties resolve deterministically.
std::vector<std::size_t> min_cost_assignment(const std::vector<double>& cost, std::size_t n);

/// Pairs every point of `anchor` with a distinct point of `other`,
/// minimising sum |a_i - o_j|^exponent. Both clouds must have the same size.
/// Returns `perm` with other[perm[i]] matched to anchor[i].
std::vector<std::size_t> match_points(const PointCloud& anchor, const PointCloud& other, double exponent);

}  // namespace shaperefine::geometry
