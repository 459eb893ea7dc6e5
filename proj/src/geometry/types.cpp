#include "shaperefine/geometry/types.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "shaperefine/error.hpp"

namespace shaperefine::geometry {

std::string_view frame_name(Frame f) { return f == Frame::kWorldMM ? "world_mm" : "standardized"; }

void validate(const PointCloud& cloud) {
  for (const Vec3& p : cloud.points)
    for (double c : p)
      if (!std::isfinite(c)) throw Error("point cloud contains a non-finite coordinate");
}

VoxelGrid::VoxelGrid(std::array<std::size_t, 3> d, Vec3 spacing, Vec3 origin)
    : dims(d), spacing_mm(spacing), origin_mm(origin), occupancy(d[0] * d[1] * d[2], 0) {
  validate(*this);
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(occupancy.begin(), occupancy.end(), [](std::uint8_t v) { return v != 0; }));
}

void validate(const VoxelGrid& grid) {
  for (std::size_t d : grid.dims)
    if (d < 1) throw Error("voxel grid dimensions must be >= 1");
  for (double s : grid.spacing_mm)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("voxel spacing must be strictly positive");
  for (double o : grid.origin_mm)
    if (!std::isfinite(o)) throw Error("voxel origin must be finite");
  if (grid.occupancy.size() != grid.voxel_count()) throw Error("occupancy length does not match grid dimensions");
}

void validate(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (const auto& f : mesh.faces) {
    for (auto i : f)
      if (i >= n) throw Error("face index " + std::to_string(i) + " out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw Error("degenerate face");
  }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * norm(cross(b - a, c - a)); }

double surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& f : mesh.faces) area += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
  return area;
}

double bounding_box_diagonal(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (const Vec3& p : points)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  return norm(hi - lo);
}

}  // namespace shaperefine::geometry
