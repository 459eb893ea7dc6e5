#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace shaperefine::geometry {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
inline double distance(const Vec3& a, const Vec3& b) { return std::sqrt(squared_distance(a, b)); }

/// Coordinate frame of a point cloud.
enum class Frame : std::uint8_t { kWorldMM = 0, kStandardized = 1 };

std::string_view frame_name(Frame f);

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::kWorldMM;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Throws unless every coordinate is finite.
void validate(const PointCloud& cloud);

/// Binary occupancy lattice; x varies fastest in `occupancy`.
struct VoxelGrid {
  std::array<std::size_t, 3> dims{1, 1, 1};
  Vec3 spacing_mm{1.0, 1.0, 1.0};
  Vec3 origin_mm{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> occupancy;

  VoxelGrid() = default;
  VoxelGrid(std::array<std::size_t, 3> dims, Vec3 spacing, Vec3 origin);

  std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims[0] * (y + dims[1] * z);
  }
  bool occupied(std::size_t x, std::size_t y, std::size_t z) const { return occupancy[index(x, y, z)] != 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool v) { occupancy[index(x, y, z)] = v ? 1 : 0; }
  /// World position of a voxel centre.
  Vec3 center(std::size_t x, std::size_t y, std::size_t z) const {
    return {origin_mm[0] + spacing_mm[0] * static_cast<double>(x), origin_mm[1] + spacing_mm[1] * static_cast<double>(y),
            origin_mm[2] + spacing_mm[2] * static_cast<double>(z)};
  }
  std::size_t occupied_count() const;
  double voxel_volume() const { return spacing_mm[0] * spacing_mm[1] * spacing_mm[2]; }
};

/// Throws on zero dims, non-positive spacing, or wrong occupancy length.
void validate(const VoxelGrid& grid);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const noexcept { return faces.empty(); }
};

/// Throws on out-of-range or repeated face indices.
void validate(const TriangleMesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const TriangleMesh& mesh);

/// Axis-aligned bounding box diagonal length.
double bounding_box_diagonal(const std::vector<Vec3>& points);

}  // namespace shaperefine::geometry
