#pragma once

#include <filesystem>

#include "shaperefine/binary_io.hpp"
#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

inline constexpr std::uint16_t kVoxelFormatVersion = 1;
inline constexpr std::uint16_t kCloudFormatVersion = 1;

// "VGRD" | u16 version | 3 x u32 dims | 3 x f64 spacing | 3 x f64 origin |
// occupancy packed LSB-first, x fastest.
void write_voxels(ByteWriter& w, const VoxelGrid& grid);
VoxelGrid read_voxels(ByteReader& r);
void save_voxels(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid load_voxels(const std::filesystem::path& path);

// "PCLD" | u16 version | u8 frame | u32 N | N x 3 f64.
void write_cloud(ByteWriter& w, const PointCloud& cloud);
PointCloud read_cloud(ByteReader& r);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& path);

/// ASCII OBJ with `v` and `f` records only (1-based indices).
void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace shaperefine::geometry
