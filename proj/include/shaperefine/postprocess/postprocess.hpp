#pragma once

#include <cstddef>

#include "shaperefine/geometry/standardize.hpp"
#include "shaperefine/geometry/types.hpp"

namespace shaperefine::postprocess {

using geometry::PointCloud;

struct PostprocessConfig {
  double mls_radius_mm = 10.0;
  double densify_gap_mm = 10.0;
  std::size_t densify_neighborhood = 10;
  std::size_t outlier_min_neighbors = 5;
  double outlier_radius_mm = 15.0;
};

void validate(const PostprocessConfig& config);

/// Degree-1 moving least squares: every point is projected onto the plane
/// fitted to its radius neighbourhood with Gaussian weights exp(-d^2 / h^2),
/// h = radius / 2. Points with fewer than 3 other points in range stay put.
PointCloud mls_smooth(const PointCloud& cloud, double radius_mm);

/// Inserts the midpoint of every (point, neighbour) pair among each point's
/// k nearest neighbours that is farther apart than the gap. Originals come
/// first, then new midpoints sorted lexicographically; exact duplicates of
/// any existing point are dropped.
PointCloud densify(const PointCloud& cloud, const PostprocessConfig& config);

/// Single pass: drops points with fewer than `outlier_min_neighbors` other
/// points within `outlier_radius_mm`. Surviving points keep their order.
PointCloud remove_outliers(const PointCloud& cloud, const PostprocessConfig& config);

/// destandardize -> mls_smooth -> densify -> remove_outliers.
PointCloud postprocess(const PointCloud& standardized, const geometry::StandardizationStats& stats,
                       const PostprocessConfig& config);

}  // namespace shaperefine::postprocess
