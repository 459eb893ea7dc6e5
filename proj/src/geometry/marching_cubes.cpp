#include "shaperefine/geometry/marching_cubes.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "shaperefine/error.hpp"

namespace shaperefine::geometry {
namespace {

// Corner c of a cell sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 2>, 12> kEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e)
    if ((kEdges[e][0] == a && kEdges[e][1] == b) || (kEdges[e][0] == b && kEdges[e][1] == a)) return e;
  return -1;
}

Vec3 corner_pos(int c) { return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; }

Vec3 edge_mid(int e) { return 0.5 * (corner_pos(kEdges[e][0]) + corner_pos(kEdges[e][1])); }

// Faces as corner cycles, counter-clockwise seen from outside the cell.
struct Face {
  std::array<int, 4> corners;
  Vec3 normal;
};

std::array<Face, 6> make_faces() {
  std::array<Face, 6> faces{};
  int f = 0;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int base = side << axis;
      std::array<int, 4> cyc{base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)};
      Vec3 n{0, 0, 0};
      n[axis] = side ? 1.0 : -1.0;
      // (u, v, axis) is right-handed, so the cycle is CCW about +axis.
      if (!side) std::swap(cyc[1], cyc[3]);
      faces[f++] = Face{cyc, n};
    }
  return faces;
}

// A contour loop of lattice-edge ids and how to triangulate it: a fan from
// loop[fan] when no fan diagonal lies on a cell face, otherwise a fan around
// an extra vertex at the loop centroid (fan < 0). A diagonal on a face could
// also be emitted by the neighbouring cell and make the edge non-manifold.
struct Loop {
  std::vector<std::uint8_t> edges;
  int fan = -1;
};

using CaseTable = std::array<std::vector<Loop>, 256>;

bool share_face(int a, int b, const std::array<Face, 6>& faces) {
  for (const Face& f : faces) {
    bool ha = false, hb = false;
    for (int i = 0; i < 4; ++i) {
      const int e = edge_between(f.corners[i], f.corners[(i + 1) % 4]);
      ha |= e == a;
      hb |= e == b;
    }
    if (ha && hb) return true;
  }
  return false;
}

int choose_fan(const std::vector<std::uint8_t>& loop, const std::array<Face, 6>& faces) {
  const std::size_t n = loop.size();
  if (n == 3) return 0;
  for (std::size_t s = 0; s < n; ++s) {
    bool ok = true;
    for (std::size_t k = 2; k + 1 < n && ok; ++k) ok = !share_face(loop[s], loop[(s + k) % n], faces);
    if (ok) return int(s);
  }
  return -1;
}

// Builds every case from per-face contour segments. On a face whose two
// inside corners are diagonal, each inside corner is cut off separately;
// since that choice depends only on the face, neighbouring cells agree and
// the surface closes.
CaseTable build_table() {
  const auto faces = make_faces();
  CaseTable table;
  for (int mask = 0; mask < 256; ++mask) {
    auto inside = [&](int c) { return ((mask >> c) & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    for (const Face& face : faces) {
      std::vector<std::array<int, 2>> segs;
      for (int i = 0; i < 4; ++i) {
        const int c = face.corners[i];
        if (!inside(c)) continue;
        const int prev = face.corners[(i + 3) % 4], nxt = face.corners[(i + 1) % 4];
        if (inside(prev) && inside(nxt)) continue;
        if (!inside(prev) && !inside(nxt)) {
          segs.push_back({edge_between(c, prev), edge_between(c, nxt)});
        } else if (!inside(prev)) {
          // run of inside corners starting at c, ending where the next is outside
          int j = i;
          while (inside(face.corners[(j + 1) % 4])) j = (j + 1) % 4;
          segs.push_back({edge_between(c, prev), edge_between(face.corners[j], face.corners[(j + 1) % 4])});
        }
      }
      for (auto [a, b] : segs) {
        // Orient so the inside region is on the right when viewed from outside.
        const Vec3 pa = edge_mid(a), pb = edge_mid(b);
        const int in_corner = inside(kEdges[a][0]) ? kEdges[a][0] : kEdges[a][1];
        const double side = dot(cross(face.normal, pb - pa), corner_pos(in_corner) - pa);
        if (side > 0) std::swap(a, b);
        next[a] = b;
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      Loop loop;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.edges.push_back(std::uint8_t(e));
      }
      loop.fan = choose_fan(loop.edges, faces);
      table[mask].push_back(std::move(loop));
    }
  }
  return table;
}

const CaseTable& case_table() {
  static const CaseTable table = build_table();
  return table;
}

}  // namespace

TriangleMesh marching_cubes(const VoxelGrid& grid, double iso) {
  validate(grid);
  if (!(iso > 0.0 && iso < 1.0)) throw Error("marching_cubes iso must lie in (0, 1)");
  TriangleMesh mesh;
  const std::size_t occupied = grid.occupied_count();
  if (occupied == 0 || occupied == grid.voxel_count()) return mesh;

  const long nx = long(grid.dims[0]), ny = long(grid.dims[1]), nz = long(grid.dims[2]);
  auto value = [&](long x, long y, long z) -> bool {
    if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return false;
    return grid.occupancy[grid.index(std::size_t(x), std::size_t(y), std::size_t(z))] != 0;
  };
  // Lattice points run from -1 to n in each axis.
  const long px = nx + 2, py = ny + 2;
  auto lattice_id = [&](long x, long y, long z) { return std::uint64_t((x + 1) + px * ((y + 1) + py * (z + 1))); };

  std::unordered_map<std::uint64_t, std::uint32_t> welded;
  const auto& table = case_table();
  for (long z = -1; z < nz; ++z)
    for (long y = -1; y < ny; ++y)
      for (long x = -1; x < nx; ++x) {
        int mask = 0;
        for (int c = 0; c < 8; ++c)
          if (value(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1))) mask |= 1 << c;
        if (mask == 0 || mask == 255) continue;
        std::array<std::uint32_t, 12> vid{};
        std::array<bool, 12> have{};
        auto vertex = [&](int e) {
          if (have[e]) return vid[e];
          const int a = kEdges[e][0];
          const long ax = x + (a & 1), ay = y + ((a >> 1) & 1), az = z + ((a >> 2) & 1);
          const int axis = e / 4;
          const std::uint64_t key = lattice_id(ax, ay, az) * 3 + std::uint64_t(axis);
          auto [it, fresh] = welded.try_emplace(key, std::uint32_t(mesh.vertices.size()));
          if (fresh) {
            // Interpolate from the empty end toward the occupied end.
            const bool a_in = (mask >> a) & 1;
            const double t = a_in ? 1.0 - iso : iso;
            Vec3 p{double(ax), double(ay), double(az)};
            p[axis] += t;
            mesh.vertices.push_back({grid.origin_mm[0] + grid.spacing_mm[0] * p[0],
                                     grid.origin_mm[1] + grid.spacing_mm[1] * p[1],
                                     grid.origin_mm[2] + grid.spacing_mm[2] * p[2]});
          }
          have[e] = true;
          vid[e] = it->second;
          return vid[e];
        };
        for (const Loop& loop : table[mask]) {
          const std::size_t n = loop.edges.size();
          if (loop.fan >= 0) {
            const std::size_t s0 = std::size_t(loop.fan);
            const std::uint32_t apex = vertex(loop.edges[s0]);
            for (std::size_t k = 1; k + 1 < n; ++k)
              mesh.faces.push_back({apex, vertex(loop.edges[(s0 + k) % n]), vertex(loop.edges[(s0 + k + 1) % n])});
          } else {
            Vec3 c{0.0, 0.0, 0.0};
            for (auto e : loop.edges) {
              const std::uint32_t v = vertex(e);
              c = c + mesh.vertices[v];
            }
            const auto apex = std::uint32_t(mesh.vertices.size());
            mesh.vertices.push_back((1.0 / double(n)) * c);
            for (std::size_t k = 0; k < n; ++k)
              mesh.faces.push_back({apex, vertex(loop.edges[k]), vertex(loop.edges[(k + 1) % n])});
          }
        }
      }
  return mesh;
}

}  // namespace shaperefine::geometry
