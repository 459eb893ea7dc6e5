#include "shaperefine/geometry/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace shaperefine::geometry {

void write_voxels(ByteWriter& w, const VoxelGrid& grid) {
  validate(grid);
  w.magic("VGRD");
  w.u16(kVoxelFormatVersion);
  for (auto d : grid.dims) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw Error("voxel grid too large for VGRD");
    w.u32(std::uint32_t(d));
  }
  for (double s : grid.spacing_mm) w.f64(s);
  for (double o : grid.origin_mm) w.f64(o);
  std::vector<std::uint8_t> packed((grid.voxel_count() + 7) / 8, 0);
  for (std::size_t i = 0; i < grid.voxel_count(); ++i)
    if (grid.occupancy[i]) packed[i / 8] |= std::uint8_t(1u << (i % 8));
  w.bytes(packed.data(), packed.size());
}

VoxelGrid read_voxels(ByteReader& r) {
  r.expect_magic("VGRD");
  const auto version = r.u16();
  if (version != kVoxelFormatVersion) throw Error(r.source() + ": unsupported VGRD version " + std::to_string(version));
  VoxelGrid grid;
  for (auto& d : grid.dims) d = r.u32();
  for (auto& s : grid.spacing_mm) s = r.f64();
  for (auto& o : grid.origin_mm) o = r.f64();
  grid.occupancy.assign(grid.voxel_count(), 0);
  std::vector<std::uint8_t> packed((grid.voxel_count() + 7) / 8);
  r.bytes(packed.data(), packed.size());
  for (std::size_t i = 0; i < grid.voxel_count(); ++i) grid.occupancy[i] = (packed[i / 8] >> (i % 8)) & 1u;
  validate(grid);
  return grid;
}

void save_voxels(const std::filesystem::path& path, const VoxelGrid& grid) {
  ByteWriter w;
  write_voxels(w, grid);
  w.save(path);
}

VoxelGrid load_voxels(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  auto grid = read_voxels(r);
  r.expect_end();
  return grid;
}

void write_cloud(ByteWriter& w, const PointCloud& cloud) {
  validate(cloud);
  if (cloud.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("point cloud too large for PCLD");
  w.magic("PCLD");
  w.u16(kCloudFormatVersion);
  w.u8(std::uint8_t(cloud.frame));
  w.u32(std::uint32_t(cloud.size()));
  for (const Vec3& p : cloud.points)
    for (double c : p) w.f64(c);
}

PointCloud read_cloud(ByteReader& r) {
  r.expect_magic("PCLD");
  const auto version = r.u16();
  if (version != kCloudFormatVersion) throw Error(r.source() + ": unsupported PCLD version " + std::to_string(version));
  const auto tag = r.u8();
  if (tag > 1) throw Error(r.source() + ": unknown frame tag " + std::to_string(tag));
  PointCloud cloud;
  cloud.frame = Frame(tag);
  const auto n = r.u32();
  if (std::size_t(n) * 24 > r.remaining()) throw Error(r.source() + ": point count exceeds file size");
  cloud.points.resize(n);
  for (Vec3& p : cloud.points)
    for (double& c : p) c = r.f64();
  validate(cloud);
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  ByteWriter w;
  write_cloud(w, cloud);
  w.save(path);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  auto cloud = read_cloud(r);
  r.expect_end();
  return cloud;
}

void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  validate(mesh);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char line[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
    out << line;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    auto fail = [&](const char* what) {
      return Error(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v[0] >> v[1] >> v[2])) throw fail("malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> f;
      for (auto& i : f) {
        std::string tok;
        if (!(ss >> tok)) throw fail("face needs three indices");
        const long idx = std::stol(tok.substr(0, tok.find('/')));
        if (idx < 1) throw fail("face index must be positive");
        i = std::uint32_t(idx - 1);
      }
      std::string extra;
      if (ss >> extra) throw fail("only triangular faces are supported");
      mesh.faces.push_back(f);
    } else {
      throw fail("unsupported record (only v and f)");
    }
  }
  validate(mesh);
  return mesh;
}

}  // namespace shaperefine::geometry
