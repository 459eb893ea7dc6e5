#include "shaperefine/geometry/matching.hpp"

#include <cmath>
#include <limits>

#include "shaperefine/error.hpp"

namespace shaperefine::geometry {

std::vector<std::size_t> min_cost_assignment(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw Error("assignment cost matrix must be n x n");
  for (double c : cost)
    if (!std::isfinite(c)) throw Error("assignment costs must be finite");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based shortest augmenting path formulation; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

std::vector<std::size_t> match_points(const PointCloud& anchor, const PointCloud& other, double exponent) {
  if (anchor.size() != other.size()) throw Error("match_points needs clouds of equal size");
  if (anchor.frame != other.frame) throw Error("match_points needs clouds in the same frame");
  if (!(exponent > 0.0)) throw Error("matching exponent must be positive");
  const std::size_t n = anchor.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d2 = squared_distance(anchor.points[i], other.points[j]);
      cost[i * n + j] = exponent == 2.0 ? d2 : std::pow(d2, 0.5 * exponent);
    }
  return min_cost_assignment(cost, n);
}

}  // namespace shaperefine::geometry
