#include "shaperefine/synthdata/tube.hpp"

#include <algorithm>
#include <cmath>

#include "shaperefine/error.hpp"

namespace shaperefine::synthdata {

using geometry::operator+;
using geometry::operator-;
using geometry::operator*;

namespace {

std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {0.5 * (-t + 2.0 * t2 - t3), 0.5 * (2.0 - 5.0 * t2 + 3.0 * t3), 0.5 * (t + 4.0 * t2 - 3.0 * t3),
          0.5 * (t3 - t2)};
}

}  // namespace

void validate(const TubeSpec& spec) {
  if (spec.control_points.size() < 2) throw Error("tube needs at least 2 control points");
  if (spec.radii.size() != spec.control_points.size()) throw Error("tube needs one radius per control point");
  for (double r : spec.radii)
    if (!(r > 0.0) || !std::isfinite(r)) throw Error("tube radii must be positive");
  if (!(spec.spacing_mm > 0.0)) throw Error("tube spacing must be positive");
  if (!(spec.margin_mm >= 0.0)) throw Error("tube margin must be non-negative");
  for (std::size_t i = 0; i + 1 < spec.control_points.size(); ++i)
    if (geometry::distance(spec.control_points[i], spec.control_points[i + 1]) < 1e-9)
      throw Error("degenerate tube path: coincident consecutive control points");
  for (const Vec3& p : spec.control_points)
    for (double c : p)
      if (!std::isfinite(c)) throw Error("tube control points must be finite");
}

Centerline tube_centerline(const TubeSpec& spec, double max_step_mm) {
  validate(spec);
  if (!(max_step_mm > 0.0)) throw Error("centerline step must be positive");
  const auto& cp = spec.control_points;
  const std::size_t n = cp.size();
  // Ends are extended by reflection so the path leaves each endpoint straight.
  auto point = [&](long i) -> Vec3 {
    if (i < 0) return 2.0 * cp[0] - cp[1];
    if (i >= long(n)) return 2.0 * cp[n - 1] - cp[n - 2];
    return cp[std::size_t(i)];
  };
  auto radius = [&](long i) { return spec.radii[std::size_t(std::clamp(i, 0L, long(n) - 1))]; };
  Centerline line;
  for (std::size_t seg = 0; seg + 1 < n; ++seg) {
    const long i = long(seg);
    const double chord = geometry::distance(cp[seg], cp[seg + 1]);
    const std::size_t steps = std::max<std::size_t>(1, std::size_t(std::ceil(2.0 * chord / max_step_mm)));
    for (std::size_t k = (seg == 0 ? 0 : 1); k <= steps; ++k) {
      const auto w = catmull_rom_weights(double(k) / double(steps));
      Vec3 p{0.0, 0.0, 0.0};
      double r = 0.0;
      for (long j = 0; j < 4; ++j) {
        p = p + w[std::size_t(j)] * point(i - 1 + j);
        r += w[std::size_t(j)] * radius(i - 1 + j);
      }
      line.points.push_back(p);
      line.radii.push_back(r);
    }
  }
  line.arclength.resize(line.points.size(), 0.0);
  for (std::size_t k = 1; k < line.points.size(); ++k)
    line.arclength[k] = line.arclength[k - 1] + geometry::distance(line.points[k], line.points[k - 1]);
  return line;
}

bool self_intersects(const Centerline& line, double clearance_mm) {
  const std::size_t n = line.points.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double reach = line.radii[i] + line.radii[j] + clearance_mm;
      const double d = geometry::distance(line.points[i], line.points[j]);
      if (d >= reach) continue;
      // Close in space but much farther along the path: the tube folds back.
      if (d < 0.7 * (line.arclength[j] - line.arclength[i])) return true;
    }
  return false;
}

TubeSpec random_tube_spec(numerics::Rng& rng, const TubeOptions& o) {
  if (o.min_points < 2 || o.max_points < o.min_points) throw Error("invalid tube point-count range");
  if (!(o.min_radius_mm > 0.0) || o.max_radius_mm < o.min_radius_mm) throw Error("invalid tube radius range");
  for (std::size_t attempt = 0; attempt < o.max_attempts; ++attempt) {
    TubeSpec spec;
    spec.spacing_mm = o.spacing_mm;
    spec.seed = rng.seed();
    const std::size_t count = o.min_points + rng.index(o.max_points - o.min_points + 1);
    const double lo = o.max_radius_mm, hi = o.box_mm - o.max_radius_mm;
    Vec3 p{rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    dir = (1.0 / geometry::norm(dir)) * dir;
    double r = rng.uniform(o.min_radius_mm, o.max_radius_mm);
    bool ok = true;
    for (std::size_t i = 0; i < count && ok; ++i) {
      spec.control_points.push_back(p);
      spec.radii.push_back(r);
      // Persistent turn, then a step that must stay inside the box.
      bool placed = false;
      for (int tries = 0; tries < 50 && !placed; ++tries) {
        Vec3 d = dir + Vec3{0.6 * rng.normal(), 0.6 * rng.normal(), 0.6 * rng.normal()};
        d = (1.0 / geometry::norm(d)) * d;
        const Vec3 q = p + rng.uniform(o.min_step_mm, o.max_step_mm) * d;
        if (q[0] < lo || q[1] < lo || q[2] < lo || q[0] > hi || q[1] > hi || q[2] > hi) continue;
        dir = d;
        p = q;
        placed = true;
      }
      ok = placed;
      r = std::clamp(r + rng.uniform(-3.0, 3.0), o.min_radius_mm, o.max_radius_mm);
    }
    if (!ok) continue;
    const Centerline line = tube_centerline(spec, 2.0);
    if (self_intersects(line, 2.0 * o.spacing_mm)) continue;
    return spec;
  }
  throw Error("could not draw a non-self-intersecting tube");
}

VoxelGrid gen_tube(const TubeSpec& spec) {
  validate(spec);
  const double h = spec.spacing_mm;
  const Centerline line = tube_centerline(spec, 0.5 * h);
  Vec3 lo = line.points[0], hi = lo;
  for (std::size_t k = 0; k < line.points.size(); ++k)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], line.points[k][a] - line.radii[k]);
      hi[a] = std::max(hi[a], line.points[k][a] + line.radii[k]);
    }
  std::array<std::size_t, 3> dims{};
  Vec3 origin{};
  for (int a = 0; a < 3; ++a) {
    origin[a] = std::floor((lo[a] - spec.margin_mm) / h) * h;
    dims[a] = std::size_t(std::ceil((hi[a] + spec.margin_mm - origin[a]) / h)) + 1;
  }
  VoxelGrid grid(dims, {h, h, h}, origin);
  for (std::size_t k = 0; k < line.points.size(); ++k) {
    const Vec3& c = line.points[k];
    const double r = line.radii[k], r2 = r * r;
    std::array<long, 3> b0{}, b1{};
    for (int a = 0; a < 3; ++a) {
      b0[a] = std::max(0L, long(std::ceil((c[a] - r - origin[a]) / h)));
      b1[a] = std::min(long(dims[a]) - 1, long(std::floor((c[a] + r - origin[a]) / h)));
    }
    for (long z = b0[2]; z <= b1[2]; ++z)
      for (long y = b0[1]; y <= b1[1]; ++y)
        for (long x = b0[0]; x <= b1[0]; ++x) {
          const Vec3 v = grid.center(std::size_t(x), std::size_t(y), std::size_t(z));
          if (geometry::squared_distance(v, c) <= r2) grid.set(std::size_t(x), std::size_t(y), std::size_t(z), true);
        }
  }
  return grid;
}

}  // namespace shaperefine::synthdata
