#pragma once

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

/// Isosurface of a binary occupancy grid. Cells span neighbouring voxel
/// centres; the grid is treated as surrounded by empty voxels, so the output
/// is closed even when occupancy touches the border. Vertices are shared
/// between cells along each lattice edge. Faces wind counter-clockwise seen
/// from outside the occupied region.
///
/// An all-empty or all-full grid yields an empty mesh. Throws unless
/// 0 < iso < 1.
TriangleMesh marching_cubes(const VoxelGrid& grid, double iso = 0.5);

}  // namespace shaperefine::geometry
