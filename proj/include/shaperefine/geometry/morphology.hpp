#pragma once

#include <cstdint>
#include <vector>

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

/// Dilation then erosion with a digital ball of the given radius. The grid is
/// padded internally, so voxels near the border close exactly as they would
/// in an unbounded lattice.
VoxelGrid binary_closing(const VoxelGrid& grid, int radius_voxels);

struct ComponentLabels {
  std::size_t count = 0;
  /// 0 for background, 1..count for occupied voxels (same layout as occupancy).
  std::vector<std::int32_t> labels;
};

/// 26-connected labelling of occupied voxels.
ComponentLabels connected_components(const VoxelGrid& grid);

/// Keeps only the largest 26-connected component.
VoxelGrid keep_largest_component(const VoxelGrid& grid);

}  // namespace shaperefine::geometry
