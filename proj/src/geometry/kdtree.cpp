#include "shaperefine/geometry/kdtree.hpp"

#include <algorithm>
#include <queue>

namespace shaperefine::geometry {
namespace {
constexpr std::size_t kLeafSize = 12;

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}
}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()), order_(points.size()) {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * (points_.size() / kLeafSize + 1));
  if (!points_.empty()) build(0, points_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], points_[order_[i]][k]);
      hi[k] = std::max(hi[k], points_[order_[i]][k]);
    }
  int axis = 0;
  for (int k = 1; k < 3; ++k)
    if (hi[k] - lo[k] > hi[axis] - lo[axis]) axis = k;
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     return points_[a][axis] < points_[b][axis] ||
                            (points_[a][axis] == points_[b][axis] && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

// `bound` is a squared-distance pruning radius that `visit` may shrink.
template <typename Visit>
void KdTree::search(std::size_t node_id, const Vec3& q, double& bound, Visit&& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      visit(idx, squared_distance(q, points_[idx]));
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::size_t near = diff < 0 ? node.left : node.right;
  const std::size_t far = diff < 0 ? node.right : node.left;
  search(near, q, bound, visit);
  if (diff * diff <= bound) search(far, q, bound, visit);
}

KdTree::Neighbor KdTree::nearest(const Vec3& q, std::size_t exclude) const {
  Neighbor best{kNoExclude, std::numeric_limits<double>::infinity()};
  if (points_.empty()) return best;
  double bound = best.squared_distance;
  search(0, q, bound, [&](std::size_t idx, double d2) {
    if (idx == exclude) return;
    const Neighbor cand{idx, d2};
    if (closer(cand, best)) {
      best = cand;
      bound = d2;
    }
  });
  return best;
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& q, std::size_t k, std::size_t exclude) const {
  std::vector<Neighbor> heap;  // max-heap under `closer`
  if (k == 0 || points_.empty()) return heap;
  double bound = std::numeric_limits<double>::infinity();
  search(0, q, bound, [&](std::size_t idx, double d2) {
    if (idx == exclude) return;
    const Neighbor cand{idx, d2};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
    if (heap.size() == k) bound = heap.front().squared_distance;
  });
  std::sort(heap.begin(), heap.end(), closer);
  return heap;
}

std::vector<KdTree::Neighbor> KdTree::within(const Vec3& q, double radius, std::size_t exclude) const {
  std::vector<Neighbor> out;
  if (points_.empty()) return out;
  const double r2 = radius * radius;
  double bound = r2;
  search(0, q, bound, [&](std::size_t idx, double d2) {
    if (idx != exclude && d2 <= r2) out.push_back({idx, d2});
  });
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  return out;
}

std::size_t KdTree::count_within(const Vec3& q, double radius, std::size_t exclude) const {
  std::size_t count = 0;
  if (points_.empty()) return count;
  const double r2 = radius * radius;
  double bound = r2;
  search(0, q, bound, [&](std::size_t idx, double d2) {
    if (idx != exclude && d2 <= r2) ++count;
  });
  return count;
}

}  // namespace shaperefine::geometry
