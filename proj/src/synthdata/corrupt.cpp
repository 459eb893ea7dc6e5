#include "shaperefine/synthdata/corrupt.hpp"

#include <algorithm>
#include <cmath>

#include "shaperefine/error.hpp"

namespace shaperefine::synthdata {

using geometry::operator+;
using geometry::operator-;
using geometry::operator*;

namespace {

// Calls f(x, y, z) for every voxel whose centre lies in the axis-aligned box.
template <typename F>
void for_box(const VoxelGrid& g, const Vec3& lo, const Vec3& hi, F&& f) {
  std::array<long, 3> b0{}, b1{};
  for (int a = 0; a < 3; ++a) {
    b0[a] = std::max(0L, long(std::ceil((lo[a] - g.origin_mm[a]) / g.spacing_mm[a])));
    b1[a] = std::min(long(g.dims[a]) - 1, long(std::floor((hi[a] - g.origin_mm[a]) / g.spacing_mm[a])));
  }
  for (long z = b0[2]; z <= b1[2]; ++z)
    for (long y = b0[1]; y <= b1[1]; ++y)
      for (long x = b0[0]; x <= b1[0]; ++x) f(std::size_t(x), std::size_t(y), std::size_t(z));
}

// Grows the grid (same spacing, lattice-aligned) until it contains the box.
void cover(VoxelGrid& g, const Vec3& lo, const Vec3& hi) {
  std::array<long, 3> add_lo{}, add_hi{};
  bool grow = false;
  for (int a = 0; a < 3; ++a) {
    const double h = g.spacing_mm[a];
    add_lo[a] = std::max(0L, long(std::ceil((g.origin_mm[a] - lo[a]) / h)));
    const double top = g.origin_mm[a] + h * double(g.dims[a] - 1);
    add_hi[a] = std::max(0L, long(std::ceil((hi[a] - top) / h)));
    grow |= add_lo[a] > 0 || add_hi[a] > 0;
  }
  if (!grow) return;
  std::array<std::size_t, 3> dims{};
  Vec3 origin{};
  for (int a = 0; a < 3; ++a) {
    dims[a] = g.dims[a] + std::size_t(add_lo[a] + add_hi[a]);
    origin[a] = g.origin_mm[a] - g.spacing_mm[a] * double(add_lo[a]);
  }
  VoxelGrid big(dims, g.spacing_mm, origin);
  for (std::size_t z = 0; z < g.dims[2]; ++z)
    for (std::size_t y = 0; y < g.dims[1]; ++y)
      for (std::size_t x = 0; x < g.dims[0]; ++x)
        if (g.occupied(x, y, z))
          big.set(x + std::size_t(add_lo[0]), y + std::size_t(add_lo[1]), z + std::size_t(add_lo[2]), true);
  g = std::move(big);
}

Vec3 unit(const Vec3& v) { return (1.0 / geometry::norm(v)) * v; }

void add_blob(VoxelGrid& g, const CorruptionSpec& s, const Centerline& line, numerics::Rng& rng) {
  const std::size_t k = rng.index(line.points.size());
  const std::size_t k2 = std::min(k + 1, line.points.size() - 1), k1 = k2 == k ? k - 1 : k;
  const Vec3 tangent = unit(line.points[k2] - line.points[k1]);
  // Random direction perpendicular to the path.
  Vec3 d{rng.normal(), rng.normal(), rng.normal()};
  d = d - geometry::dot(d, tangent) * tangent;
  d = unit(d);
  const Vec3 axes{rng.uniform(s.min_blob_radius_mm, s.max_blob_radius_mm),
                  rng.uniform(s.min_blob_radius_mm, s.max_blob_radius_mm),
                  rng.uniform(s.min_blob_radius_mm, s.max_blob_radius_mm)};
  const double offset = rng.uniform(s.min_blob_offset_mm, s.max_blob_offset_mm);
  // Blob's near side sits `offset` beyond the wall along d.
  const double reach_d = axes[0];
  const Vec3 centre = line.points[k] + (line.radii[k] + offset + reach_d) * d;
  // Ellipsoid frame: first axis along d.
  const Vec3 e1 = d;
  const Vec3 e2 = unit(geometry::cross(std::abs(d[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}, d));
  const Vec3 e3 = geometry::cross(e1, e2);
  const double m = std::max({axes[0], axes[1], axes[2]});
  cover(g, centre - Vec3{m + 2.0 * g.spacing_mm[0], m + 2.0 * g.spacing_mm[1], m + 2.0 * g.spacing_mm[2]},
        centre + Vec3{m + 2.0 * g.spacing_mm[0], m + 2.0 * g.spacing_mm[1], m + 2.0 * g.spacing_mm[2]});
  for_box(g, centre - Vec3{m, m, m}, centre + Vec3{m, m, m}, [&](std::size_t x, std::size_t y, std::size_t z) {
    const Vec3 v = g.center(x, y, z) - centre;
    const double a = geometry::dot(v, e1) / axes[0], b = geometry::dot(v, e2) / axes[1],
                 c = geometry::dot(v, e3) / axes[2];
    if (a * a + b * b + c * c <= 1.0) g.set(x, y, z, true);
  });
}

void jitter(VoxelGrid& g, double sigma, numerics::Rng& rng) {
  const double h = std::min({g.spacing_mm[0], g.spacing_mm[1], g.spacing_mm[2]});
  const double p = std::min(0.5, sigma / (2.0 * h));
  const VoxelGrid src = g;
  const long nx = long(g.dims[0]), ny = long(g.dims[1]), nz = long(g.dims[2]);
  auto at = [&](long x, long y, long z) {
    if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return false;
    return src.occupied(std::size_t(x), std::size_t(y), std::size_t(z));
  };
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        const bool v = at(x, y, z);
        const bool boundary = at(x - 1, y, z) != v || at(x + 1, y, z) != v || at(x, y - 1, z) != v ||
                              at(x, y + 1, z) != v || at(x, y, z - 1) != v || at(x, y, z + 1) != v;
        if (boundary && rng.uniform() < p) g.set(std::size_t(x), std::size_t(y), std::size_t(z), !v);
      }
}

}  // namespace

void erase_path_segment(VoxelGrid& g, const Centerline& line, double start_mm, double end_mm) {
  const double pad = 2.0 * std::max({g.spacing_mm[0], g.spacing_mm[1], g.spacing_mm[2]});
  for (std::size_t k = 0; k < line.points.size(); ++k) {
    if (line.arclength[k] < start_mm || line.arclength[k] > end_mm) continue;
    const Vec3& c = line.points[k];
    const double r = line.radii[k] + pad, r2 = r * r;
    for_box(g, c - Vec3{r, r, r}, c + Vec3{r, r, r}, [&](std::size_t x, std::size_t y, std::size_t z) {
      if (geometry::squared_distance(g.center(x, y, z), c) <= r2) g.set(x, y, z, false);
    });
  }
}

void validate(const CorruptionSpec& s) {
  auto frac = [](double f) { return f > 0.0 && f < 0.5; };
  if (!frac(s.min_deleted_fraction) || !frac(s.max_deleted_fraction) || s.max_deleted_fraction < s.min_deleted_fraction)
    throw Error("deleted fractions must lie in (0, 0.5) with min <= max");
  if (!(s.min_blob_radius_mm > 0.0) || s.max_blob_radius_mm < s.min_blob_radius_mm)
    throw Error("invalid blob radius range");
  if (!(s.min_blob_offset_mm >= 0.0) || s.max_blob_offset_mm < s.min_blob_offset_mm)
    throw Error("invalid blob offset range");
  if (!(s.jitter_sigma_mm >= 0.0)) throw Error("jitter sigma must be non-negative");
}

VoxelGrid corrupt(const VoxelGrid& grid, const CorruptionSpec& spec, const Centerline& line, numerics::Rng& rng) {
  geometry::validate(grid);
  validate(spec);
  VoxelGrid out = grid;
  if (spec.n_deleted_segments + spec.n_spurious_blobs == 0 && spec.jitter_sigma_mm == 0.0) return out;
  if (line.points.size() < 2) throw Error("corruption needs a centreline with at least 2 samples");
  for (std::size_t i = 0; i < spec.n_deleted_segments; ++i) {
    const double len = rng.uniform(spec.min_deleted_fraction, spec.max_deleted_fraction) * line.length();
    const double start = rng.uniform(0.0, line.length() - len);
    erase_path_segment(out, line, start, start + len);
  }
  for (std::size_t i = 0; i < spec.n_spurious_blobs; ++i) add_blob(out, spec, line, rng);
  if (spec.jitter_sigma_mm > 0.0) jitter(out, spec.jitter_sigma_mm, rng);
  return out;
}

}  // namespace shaperefine::synthdata
