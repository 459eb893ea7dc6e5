#include "shaperefine/postprocess/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/kdtree.hpp"

namespace shaperefine::postprocess {

using geometry::KdTree;
using geometry::Vec3;

void validate(const PostprocessConfig& c) {
  if (!(c.mls_radius_mm > 0.0) || !(c.densify_gap_mm > 0.0) || !(c.outlier_radius_mm > 0.0) ||
      c.densify_neighborhood < 1 || c.outlier_min_neighbors < 1) {
    throw Error("postprocess parameters must all be positive");
  }
}

PointCloud mls_smooth(const PointCloud& cloud, double radius_mm) {
  if (cloud.empty()) throw Error("mls_smooth needs a non-empty cloud");
  if (!(radius_mm > 0.0)) throw Error("mls radius must be positive");
  geometry::validate(cloud);
  const KdTree tree(cloud.points);
  const double inv_h2 = 4.0 / (radius_mm * radius_mm);
  PointCloud out = cloud;
  std::vector<Vec3> nbrs;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto found = tree.within(p, radius_mm, i);
    if (found.size() < 3) continue;
    // Sum in coordinate order so the result does not depend on input order.
    nbrs.clear();
    nbrs.push_back(p);
    for (const auto& n : found) nbrs.push_back(cloud.points[n.index]);
    std::sort(nbrs.begin(), nbrs.end());

    double wsum = 0.0;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    std::vector<double> w(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      w[k] = std::exp(-geometry::squared_distance(p, nbrs[k]) * inv_h2);
      wsum += w[k];
      centroid += w[k] * Eigen::Vector3d(nbrs[k][0], nbrs[k][1], nbrs[k][2]);
    }
    centroid /= wsum;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const Eigen::Vector3d d = Eigen::Vector3d(nbrs[k][0], nbrs[k][1], nbrs[k][2]) - centroid;
      cov += w[k] * d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d normal = eig.eigenvectors().col(0);  // smallest eigenvalue
    const Eigen::Vector3d q(p[0], p[1], p[2]);
    const Eigen::Vector3d proj = q - (q - centroid).dot(normal) * normal;
    out.points[i] = {proj[0], proj[1], proj[2]};
  }
  return out;
}

PointCloud densify(const PointCloud& cloud, const PostprocessConfig& config) {
  validate(config);
  if (cloud.size() < 2) throw Error("densify needs at least two points");
  geometry::validate(cloud);
  const KdTree tree(cloud.points);
  const double gap2 = config.densify_gap_mm * config.densify_gap_mm;
  std::vector<Vec3> mids;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    for (const auto& n : tree.knn(p, config.densify_neighborhood, i)) {
      if (n.squared_distance <= gap2) continue;
      const Vec3& q = cloud.points[n.index];
      mids.push_back({0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])});
    }
  }
  std::sort(mids.begin(), mids.end());
  mids.erase(std::unique(mids.begin(), mids.end()), mids.end());
  std::vector<Vec3> originals = cloud.points;
  std::sort(originals.begin(), originals.end());

  PointCloud out = cloud;
  for (const Vec3& m : mids)
    if (!std::binary_search(originals.begin(), originals.end(), m)) out.points.push_back(m);
  return out;
}

PointCloud remove_outliers(const PointCloud& cloud, const PostprocessConfig& config) {
  validate(config);
  if (cloud.empty()) throw Error("remove_outliers needs a non-empty cloud");
  geometry::validate(cloud);
  const KdTree tree(cloud.points);
  PointCloud out;
  out.frame = cloud.frame;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (tree.count_within(cloud.points[i], config.outlier_radius_mm, i) >= config.outlier_min_neighbors)
      out.points.push_back(cloud.points[i]);
  return out;
}

PointCloud postprocess(const PointCloud& standardized, const geometry::StandardizationStats& stats,
                       const PostprocessConfig& config) {
  PointCloud cloud;
  try {
    validate(config);
    cloud = geometry::destandardize(standardized, stats);
  } catch (...) {
    rethrow_with_stage("destandardize");
  }
  try {
    cloud = mls_smooth(cloud, config.mls_radius_mm);
  } catch (...) {
    rethrow_with_stage("mls_smooth");
  }
  try {
    cloud = densify(cloud, config);
  } catch (...) {
    rethrow_with_stage("densify");
  }
  try {
    cloud = remove_outliers(cloud, config);
  } catch (...) {
    rethrow_with_stage("remove_outliers");
  }
  return cloud;
}

}  // namespace shaperefine::postprocess
