#pragma once

#include <cstddef>

#include "shaperefine/numerics/rng.hpp"
#include "shaperefine/synthdata/tube.hpp"

namespace shaperefine::synthdata {

/// Segmentation-error model. Deleted segments stand in for under-segmented
/// regions, blobs for spurious fragments and neighbouring structures.
struct CorruptionSpec {
  std::size_t n_deleted_segments = 0;
  double min_deleted_fraction = 0.05;  // of path length, each in (0, 0.5)
  double max_deleted_fraction = 0.15;
  std::size_t n_spurious_blobs = 0;
  double min_blob_radius_mm = 6.0, max_blob_radius_mm = 14.0;
  double min_blob_offset_mm = 0.0, max_blob_offset_mm = 15.0;  // gap between tube wall and blob
  double jitter_sigma_mm = 0.0;
};

void validate(const CorruptionSpec& spec);

/// Clears every voxel within (local radius + two voxels) of the centreline
/// samples whose arc length lies in [start_mm, end_mm].
void erase_path_segment(VoxelGrid& grid, const Centerline& line, double start_mm, double end_mm);

/// Applies, in order: segment deletion (voxels within the local radius plus
/// two voxels of the chosen stretch of centreline are cleared), blob union
/// (ellipsoids placed beside random centreline points), and boundary jitter
/// (each voxel with a differing 6-neighbour flips with probability
/// min(0.5, sigma / (2 * spacing))). `line` is the centreline the grid was
/// generated from. A spec with no segments, no blobs and zero sigma returns
/// the grid unchanged without drawing from `rng`. The grid grows, on the
/// same lattice, when a blob would cross its border.
VoxelGrid corrupt(const VoxelGrid& grid, const CorruptionSpec& spec, const Centerline& line, numerics::Rng& rng);

}  // namespace shaperefine::synthdata
