#pragma once

#include <cstdint>
#include <vector>

#include "shaperefine/geometry/types.hpp"
#include "shaperefine/numerics/rng.hpp"

namespace shaperefine::synthdata {

using geometry::Vec3;
using geometry::VoxelGrid;

/// Open tube phantom: a Catmull-Rom path through the control points with a
/// radius interpolated the same way.
struct TubeSpec {
  std::vector<Vec3> control_points;  // mm
  std::vector<double> radii;         // mm, one per control point
  double spacing_mm = 2.0;
  double margin_mm = 6.0;  // empty border kept around the tube
  std::uint64_t seed = 0;
};

struct TubeOptions {
  std::size_t min_points = 8, max_points = 16;
  double box_mm = 300.0;
  double min_radius_mm = 15.0, max_radius_mm = 30.0;
  double min_step_mm = 35.0, max_step_mm = 55.0;
  double spacing_mm = 2.0;
  std::size_t max_attempts = 500;
};

/// Throws on fewer than 2 control points, mismatched radii, non-positive
/// radius or spacing, or coincident consecutive control points.
void validate(const TubeSpec& spec);

/// Random walk with turning persistence inside the box. Candidates that
/// fold back onto themselves are redrawn (see self_intersects).
TubeSpec random_tube_spec(numerics::Rng& rng, const TubeOptions& options = {});

/// Dense samples of the path with their radii and cumulative arc length.
struct Centerline {
  std::vector<Vec3> points;
  std::vector<double> radii;
  std::vector<double> arclength;

  double length() const { return arclength.empty() ? 0.0 : arclength.back(); }
};

/// Samples at most `max_step_mm` apart.
Centerline tube_centerline(const TubeSpec& spec, double max_step_mm = 1.0);

/// True when two samples are closer than the sum of their radii plus the
/// clearance while their chord is under 0.7 of the arc between them, i.e.
/// the path bends back far enough for its surface to touch itself.
bool self_intersects(const Centerline& line, double clearance_mm);

/// Union of balls along the centreline, on a grid cropped to the tube's
/// bounding box plus the margin.
VoxelGrid gen_tube(const TubeSpec& spec);

}  // namespace shaperefine::synthdata
