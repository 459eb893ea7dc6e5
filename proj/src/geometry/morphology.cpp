#include "shaperefine/geometry/morphology.hpp"

#include <array>
#include <cmath>
#include <deque>

#include "shaperefine/error.hpp"

namespace shaperefine::geometry {
namespace {

// Voxels whose unit cube intersects the Euclidean ball of radius r; at r = 1
// this is the full 3x3x3 block.
std::vector<std::array<int, 3>> ball_offsets(int r) {
  auto gap = [](int o) {
    const double d = std::abs(o) - 0.5;
    return d > 0.0 ? d * d : 0.0;
  };
  std::vector<std::array<int, 3>> out;
  for (int z = -r; z <= r; ++z)
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x)
        if (gap(x) + gap(y) + gap(z) <= static_cast<double>(r * r)) out.push_back({x, y, z});
  return out;
}

}  // namespace

VoxelGrid binary_closing(const VoxelGrid& grid, int radius_voxels) {
  validate(grid);
  if (radius_voxels < 1) throw Error("binary_closing radius must be >= 1");
  const int r = radius_voxels;
  const auto offsets = ball_offsets(r);
  const long nx = static_cast<long>(grid.dims[0]), ny = static_cast<long>(grid.dims[1]),
             nz = static_cast<long>(grid.dims[2]);
  const long px = nx + 2 * r, py = ny + 2 * r, pz = nz + 2 * r;
  auto pidx = [&](long x, long y, long z) { return static_cast<std::size_t>(x + px * (y + py * z)); };

  std::vector<std::uint8_t> dilated(static_cast<std::size_t>(px * py * pz), 0);
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        if (!grid.occupancy[grid.index(x, y, z)]) continue;
        for (const auto& o : offsets) dilated[pidx(x + r + o[0], y + r + o[1], z + r + o[2])] = 1;
      }

  VoxelGrid out = grid;
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        bool keep = dilated[pidx(x + r, y + r, z + r)] != 0;
        for (std::size_t k = 0; keep && k < offsets.size(); ++k) {
          const auto& o = offsets[k];
          keep = dilated[pidx(x + r + o[0], y + r + o[1], z + r + o[2])] != 0;
        }
        out.occupancy[grid.index(x, y, z)] = keep ? 1 : 0;
      }
  return out;
}

ComponentLabels connected_components(const VoxelGrid& grid) {
  validate(grid);
  ComponentLabels result;
  result.labels.assign(grid.voxel_count(), 0);
  const long nx = static_cast<long>(grid.dims[0]), ny = static_cast<long>(grid.dims[1]),
             nz = static_cast<long>(grid.dims[2]);
  std::deque<std::array<long, 3>> queue;
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        const std::size_t start = grid.index(x, y, z);
        if (!grid.occupancy[start] || result.labels[start]) continue;
        const auto label = static_cast<std::int32_t>(++result.count);
        result.labels[start] = label;
        queue.push_back({x, y, z});
        while (!queue.empty()) {
          const auto [cx, cy, cz] = queue.front();
          queue.pop_front();
          for (long dz = -1; dz <= 1; ++dz)
            for (long dy = -1; dy <= 1; ++dy)
              for (long dx = -1; dx <= 1; ++dx) {
                const long qx = cx + dx, qy = cy + dy, qz = cz + dz;
                if (qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz) continue;
                const std::size_t q = grid.index(qx, qy, qz);
                if (grid.occupancy[q] && !result.labels[q]) {
                  result.labels[q] = label;
                  queue.push_back({qx, qy, qz});
                }
              }
        }
      }
  return result;
}

VoxelGrid keep_largest_component(const VoxelGrid& grid) {
  const ComponentLabels cc = connected_components(grid);
  VoxelGrid out = grid;
  if (cc.count <= 1) return out;
  std::vector<std::size_t> sizes(cc.count + 1, 0);
  for (auto l : cc.labels) ++sizes[static_cast<std::size_t>(l)];
  std::size_t best = 1;
  for (std::size_t l = 2; l <= cc.count; ++l)
    if (sizes[l] > sizes[best]) best = l;
  for (std::size_t i = 0; i < out.occupancy.size(); ++i)
    out.occupancy[i] = static_cast<std::size_t>(cc.labels[i]) == best ? 1 : 0;
  return out;
}

}  // namespace shaperefine::geometry
