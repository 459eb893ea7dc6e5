#include "shaperefine/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/kdtree.hpp"

namespace shaperefine::geometry {
namespace {

std::vector<double> cumulative_areas(const TriangleMesh& mesh) {
  validate(mesh);
  if (mesh.empty()) throw Error("cannot sample an empty mesh");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cdf[i] = total;
  }
  if (!(total > 0.0)) throw Error("cannot sample a mesh with zero surface area");
  return cdf;
}

Vec3 sample_point(const TriangleMesh& mesh, const std::vector<double>& cdf, numerics::Rng& rng) {
  const double target = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) --it;
  const auto& f = mesh.faces[std::size_t(it - cdf.begin())];
  const double s = std::sqrt(rng.uniform()), t = rng.uniform();
  const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
  return (1.0 - s) * a + (s * (1.0 - t)) * b + (s * t) * c;
}

}  // namespace

PointCloud uniform_area_sample(const TriangleMesh& mesh, std::size_t n, numerics::Rng& rng) {
  if (n < 1) throw Error("sample count must be >= 1");
  const auto cdf = cumulative_areas(mesh);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.points.push_back(sample_point(mesh, cdf, rng));
  return out;
}

PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, numerics::Rng& rng,
                               const PoissonDiskOptions& options) {
  if (n < 1) throw Error("sample count must be >= 1");
  if (!(options.oversample >= 1.0)) throw Error("oversample factor must be >= 1");
  const auto cdf = cumulative_areas(mesh);
  const std::size_t m = std::max(n, std::size_t(std::ceil(options.oversample * double(n))));
  std::vector<Vec3> cand(m);
  for (auto& p : cand) p = sample_point(mesh, cdf, rng);
  if (m == n) return PointCloud{cand, Frame::kWorldMM};

  // Maximal packing radius for n points on a surface of this area.
  const double r_max = std::sqrt(cdf.back() / (2.0 * std::sqrt(3.0) * double(n)));
  const double reach = 2.0 * r_max;
  const KdTree tree(cand);
  std::vector<std::vector<KdTree::Neighbor>> nbrs(m);
  std::vector<double> weight(m, 0.0);
  auto w = [&](double d2) { return std::pow(1.0 - std::sqrt(d2) / reach, options.alpha); };
  for (std::size_t i = 0; i < m; ++i) {
    nbrs[i] = tree.within(cand[i], reach, i);
    for (const auto& nb : nbrs[i])
      if (nb.squared_distance < reach * reach) weight[i] += w(nb.squared_distance);
  }

  // Lazy max-heap; stale entries are skipped. Ties go to the larger index.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t i = 0; i < m; ++i) heap.push({weight[i], i});
  std::vector<bool> removed(m, false);
  std::size_t remaining = m;
  while (remaining > n) {
    const auto [wt, i] = heap.top();
    heap.pop();
    if (removed[i] || wt != weight[i]) continue;
    removed[i] = true;
    --remaining;
    for (const auto& nb : nbrs[i]) {
      if (removed[nb.index] || nb.squared_distance >= reach * reach) continue;
      weight[nb.index] -= w(nb.squared_distance);
      heap.push({weight[nb.index], nb.index});
    }
  }
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < m; ++i)
    if (!removed[i]) out.points.push_back(cand[i]);
  return out;
}

}  // namespace shaperefine::geometry
