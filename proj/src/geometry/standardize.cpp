#include "shaperefine/geometry/standardize.hpp"

#include <cmath>

#include "shaperefine/error.hpp"

namespace shaperefine::geometry {
namespace {
void check_stats(const StandardizationStats& s) {
  if (!(s.std > 0.0) || !std::isfinite(s.std)) throw Error("standardization std must be positive");
  for (double m : s.mean)
    if (!std::isfinite(m)) throw Error("standardization mean must be finite");
}
}  // namespace

StandardizationStats compute_standardization(std::span<const PointCloud> clouds) {
  std::size_t count = 0;
  Vec3 sum{0.0, 0.0, 0.0};
  for (const auto& c : clouds) {
    if (c.frame != Frame::kWorldMM) throw Error("standardization statistics need world-frame clouds");
    validate(c);
    for (const Vec3& p : c.points) sum = sum + p;
    count += c.size();
  }
  if (count == 0) throw Error("standardization needs at least one point");
  StandardizationStats s;
  s.mean = (1.0 / double(count)) * sum;
  double ss = 0.0;
  for (const auto& c : clouds)
    for (const Vec3& p : c.points) ss += squared_distance(p, s.mean);
  s.std = std::sqrt(ss / (3.0 * double(count)));
  if (!(s.std > 0.0)) throw Error("standardization input has zero variance");
  return s;
}

PointCloud standardize(const PointCloud& cloud, const StandardizationStats& stats) {
  check_stats(stats);
  if (cloud.frame != Frame::kWorldMM) throw Error("standardize expects a world-frame cloud");
  PointCloud out{cloud.points, Frame::kStandardized};
  const double inv = 1.0 / stats.std;
  for (Vec3& p : out.points)
    for (int k = 0; k < 3; ++k) p[k] = (p[k] - stats.mean[k]) * inv;
  return out;
}

PointCloud destandardize(const PointCloud& cloud, const StandardizationStats& stats) {
  check_stats(stats);
  if (cloud.frame != Frame::kStandardized) throw Error("destandardize expects a standardized cloud");
  PointCloud out{cloud.points, Frame::kWorldMM};
  for (Vec3& p : out.points)
    for (int k = 0; k < 3; ++k) p[k] = p[k] * stats.std + stats.mean[k];
  return out;
}

}  // namespace shaperefine::geometry
