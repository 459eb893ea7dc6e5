#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::geometry {

/// Static 3-d tree over a point set. All queries are exact: they return the
/// same squared distances as a brute-force scan, with ties broken by the
/// smaller point index.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  static constexpr std::size_t kNoExclude = std::numeric_limits<std::size_t>::max();

  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Closest point to q, optionally skipping one index.
  Neighbor nearest(const Vec3& q, std::size_t exclude = kNoExclude) const;

  /// The k closest points sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k, std::size_t exclude = kNoExclude) const;

  /// Points with distance <= radius, sorted by index.
  std::vector<Neighbor> within(const Vec3& q, double radius, std::size_t exclude = kNoExclude) const;

  std::size_t count_within(const Vec3& q, double radius, std::size_t exclude = kNoExclude) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    int axis = -1;                   // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  template <typename Visit>
  void search(std::size_t node, const Vec3& q, double& bound, Visit&& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace shaperefine::geometry
