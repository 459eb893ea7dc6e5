#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/standardize.hpp"
#include "shaperefine/numerics/rng.hpp"
#include "shaperefine/postprocess/postprocess.hpp"

namespace sr = shaperefine;
using namespace shaperefine::postprocess;
using namespace shaperefine::geometry;
using shaperefine::numerics::Rng;

namespace {

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(v);
    if (n > 1e-6) return (1.0 / n) * v;
  }
}

PointCloud noisy_sphere(Rng& rng, std::size_t n, double radius, double sigma) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back((radius + sigma * rng.normal()) * random_unit(rng));
  return c;
}

double mean_radial_deviation(const PointCloud& c, double radius) {
  double s = 0;
  for (const Vec3& p : c.points) s += std::abs(norm(p) - radius);
  return s / double(c.size());
}

PointCloud random_cloud(Rng& rng, std::size_t n, double scale) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({scale * rng.uniform(), scale * rng.uniform(), scale * rng.uniform()});
  return c;
}

std::vector<Vec3> sorted(std::vector<Vec3> v) {
  std::sort(v.begin(), v.end());
  return v;
}

PointCloud shuffled(const PointCloud& c, Rng& rng) {
  PointCloud out = c;
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out.points[i - 1], out.points[rng.index(i)]);
  return out;
}

}  // namespace

TEST(MlsSmooth, PlanarPointsAreFixed) {
  Rng rng(1);
  PointCloud c;
  for (int i = 0; i < 400; ++i) {
    const double u = rng.uniform(-40, 40), v = rng.uniform(-40, 40);
    // plane through (1, 2, 3) spanned by two oblique directions
    c.points.push_back({1 + 0.6 * u + 0.1 * v, 2 + 0.8 * u - 0.3 * v, 3 + 0.2 * v});
  }
  const PointCloud s = mls_smooth(c, 10.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.points[i][k], c.points[i][k], 1e-9);
}

TEST(MlsSmooth, SinglePointUnchanged) {
  PointCloud c;
  c.points.push_back({1.5, -2.0, 7.25});
  EXPECT_EQ(mls_smooth(c, 10.0).points, c.points);
}

TEST(MlsSmooth, SparseNeighbourhoodLeftAlone) {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0.5}};  // only two others in range
  EXPECT_EQ(mls_smooth(c, 10.0).points, c.points);
}

TEST(MlsSmooth, ReducesRadialNoiseOnSphere) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const PointCloud c = noisy_sphere(rng, 4000, 50.0, 1.0);
    const double before = mean_radial_deviation(c, 50.0);
    const double after = mean_radial_deviation(mls_smooth(c, 10.0), 50.0);
    EXPECT_LE(after, 0.7 * before) << "seed " << seed;
  }
}

TEST(MlsSmooth, RejectsEmptyCloud) { EXPECT_THROW(mls_smooth(PointCloud{}, 10.0), sr::Error); }

TEST(Densify, DenseCloudUnchanged) {
  PointCloud c;
  for (int i = 0; i < 12; ++i) c.points.push_back({0.5 * i, 0.0, 0.0});  // 5.5 mm span
  EXPECT_EQ(densify(c, {}).points, c.points);
}

TEST(Densify, TwoDistantPointsGainOneMidpoint) {
  PointCloud c;
  c.points = {{0, 0, 0}, {20, 0, 0}};
  const PointCloud d = densify(c, {});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.points[2], (Vec3{10, 0, 0}));
}

TEST(Densify, SupersetAndMonotone) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud c = random_cloud(rng, 200, 100.0);
    const PointCloud d = densify(c, {});
    ASSERT_GE(d.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(d.points[i], c.points[i]);
    // every added point is the midpoint of some distant pair
    EXPECT_GT(d.size(), c.size());
  }
}

TEST(Densify, RejectsSinglePoint) {
  PointCloud c;
  c.points.push_back({0, 0, 0});
  EXPECT_THROW(densify(c, {}), sr::Error);
}

TEST(RemoveOutliers, TightClusterRetained) {
  Rng rng(3);
  PointCloud c;
  for (int i = 0; i < 10; ++i) c.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  EXPECT_EQ(remove_outliers(c, {}).points, c.points);
}

TEST(RemoveOutliers, IsolatedPointRemoved) {
  Rng rng(4);
  PointCloud c;
  for (int i = 0; i < 10; ++i) c.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  c.points.insert(c.points.begin() + 4, Vec3{100, 0, 0});
  const PointCloud r = remove_outliers(c, {});
  ASSERT_EQ(r.size(), 10u);
  for (const Vec3& p : r.points) EXPECT_LT(p[0], 2.0);
}

TEST(RemoveOutliers, MatchesBruteForce) {
  Rng rng(5);
  const PostprocessConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud c = random_cloud(rng, 300, 120.0);
    std::vector<Vec3> expected;
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < c.size(); ++j)
        if (j != i && distance(c.points[i], c.points[j]) <= cfg.outlier_radius_mm) ++count;
      if (count >= cfg.outlier_min_neighbors) expected.push_back(c.points[i]);
    }
    EXPECT_EQ(remove_outliers(c, cfg).points, expected);
  }
}

TEST(RemoveOutliers, SecondPassOnlyDropsPointsWithAlteredNeighbourhoods) {
  Rng rng(6);
  const PostprocessConfig cfg;
  const PointCloud c = random_cloud(rng, 300, 150.0);
  const PointCloud once = remove_outliers(c, cfg);
  const PointCloud twice = remove_outliers(once, cfg);
  for (const Vec3& p : once.points) {
    if (std::find(twice.points.begin(), twice.points.end(), p) != twice.points.end()) continue;
    // p survived the first pass, so some neighbour of p must have been dropped
    bool lost_neighbour = false;
    for (const Vec3& q : c.points)
      if (q != p && distance(p, q) <= cfg.outlier_radius_mm &&
          std::find(once.points.begin(), once.points.end(), q) == once.points.end())
        lost_neighbour = true;
    EXPECT_TRUE(lost_neighbour);
  }
}

TEST(Postprocess, StagesArePermutationInvariantAsSets) {
  Rng rng(8);
  const PostprocessConfig cfg;
  const PointCloud c = noisy_sphere(rng, 600, 40.0, 2.0);
  const PointCloud p = shuffled(c, rng);
  EXPECT_EQ(sorted(mls_smooth(c, 10.0).points), sorted(mls_smooth(p, 10.0).points));
  EXPECT_EQ(sorted(densify(c, cfg).points), sorted(densify(p, cfg).points));
  EXPECT_EQ(sorted(remove_outliers(c, cfg).points), sorted(remove_outliers(p, cfg).points));
}

TEST(Postprocess, OutputSubsetOfDensified) {
  Rng rng(9);
  const PostprocessConfig cfg;
  const PointCloud c = random_cloud(rng, 250, 80.0);
  const PointCloud d = densify(c, cfg);
  const auto ds = sorted(d.points);
  for (const Vec3& p : remove_outliers(d, cfg).points) EXPECT_TRUE(std::binary_search(ds.begin(), ds.end(), p));
}

TEST(Postprocess, CleanDenseCylinderBarelyMoves) {
  // Dense samples of a 20 mm radius cylinder, standardized then post-processed.
  Rng rng(10);
  PointCloud world;
  for (int i = 0; i < 3000; ++i) {
    const double a = rng.uniform(0, 2 * std::numbers::pi), z = rng.uniform(0, 150);
    world.points.push_back({20 * std::cos(a), 20 * std::sin(a), z});
  }
  const PointCloud clouds[] = {world};
  const StandardizationStats stats = compute_standardization(clouds);
  const PointCloud out = postprocess(standardize(world, stats), stats, {});
  ASSERT_EQ(out.frame, Frame::kWorldMM);
  ASSERT_EQ(out.size(), world.size());  // nothing to densify, nothing isolated
  std::vector<double> moved;
  for (std::size_t i = 0; i < world.size(); ++i) moved.push_back(distance(out.points[i], world.points[i]));
  std::nth_element(moved.begin(), moved.begin() + moved.size() / 2, moved.end());
  EXPECT_LT(moved[moved.size() / 2], 0.5);
}

TEST(Postprocess, Deterministic) {
  Rng rng(11);
  PointCloud c = noisy_sphere(rng, 500, 1.0, 0.05);
  c.frame = Frame::kStandardized;
  const StandardizationStats stats{{1, 2, 3}, 40.0};
  EXPECT_EQ(postprocess(c, stats, {}).points, postprocess(c, stats, {}).points);
}

TEST(Postprocess, ErrorsCarryStageTag) {
  PointCloud world;
  world.points.push_back({0, 0, 0});
  try {
    postprocess(world, {}, {});  // not standardized
    FAIL();
  } catch (const sr::Error& e) {
    EXPECT_EQ(e.stage(), "destandardize");
  }
  PointCloud single;
  single.frame = Frame::kStandardized;
  single.points.push_back({0, 0, 0});
  try {
    postprocess(single, {}, {});
    FAIL();
  } catch (const sr::Error& e) {
    EXPECT_EQ(e.stage(), "densify");
  }
}
