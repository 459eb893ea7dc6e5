#pragma once

#include <span>

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

/// Per-axis mean with one pooled scale, so standardization keeps aspect ratio.
struct StandardizationStats {
  Vec3 mean{0.0, 0.0, 0.0};
  double std = 1.0;
};

/// Pooled over every point of every cloud. `std` is the population standard
/// deviation of all centred coordinates taken together.
StandardizationStats compute_standardization(std::span<const PointCloud> clouds);

PointCloud standardize(const PointCloud& cloud, const StandardizationStats& stats);
PointCloud destandardize(const PointCloud& cloud, const StandardizationStats& stats);

}  // namespace shaperefine::geometry
