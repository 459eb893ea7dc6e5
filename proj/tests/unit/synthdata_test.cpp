#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/marching_cubes.hpp"
#include "shaperefine/geometry/morphology.hpp"
#include "shaperefine/geometry/sampling.hpp"
#include "shaperefine/metrics/metrics.hpp"
#include "shaperefine/synthdata/dataset.hpp"

namespace sr = shaperefine;
using namespace shaperefine::synthdata;
using shaperefine::numerics::Rng;

namespace {

TubeSpec straight_tube(double radius, double length) {
  TubeSpec t;
  t.control_points = {{0, 0, 0}, {0.5 * length, 0, 0}, {length, 0, 0}};
  t.radii = {radius, radius, radius};
  return t;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
  return v[v.size() / 2];
}

PointCloud sample(const VoxelGrid& g, std::uint64_t seed, std::size_t n = 256) {
  Rng rng(seed);
  return sr::geometry::poisson_disk_sample(sr::geometry::marching_cubes(g), n, rng);
}

}  // namespace

TEST(Tube, StraightCapsuleVolume) {
  const double r = 20.0, len = 200.0;
  const VoxelGrid g = gen_tube(straight_tube(r, len));
  const double volume = double(g.occupied_count()) * g.voxel_volume();
  const double capsule = std::numbers::pi * r * r * len + 4.0 / 3.0 * std::numbers::pi * r * r * r;
  EXPECT_NEAR(volume / capsule, 1.0, 0.10) << volume << " vs " << capsule;
  EXPECT_EQ(g.spacing_mm, (sr::geometry::Vec3{2.0, 2.0, 2.0}));
}

TEST(Tube, RandomTubesAreSingleComponentAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng a(seed), b(seed);
    const TubeSpec ta = random_tube_spec(a), tb = random_tube_spec(b);
    EXPECT_EQ(ta.control_points, tb.control_points);
    const VoxelGrid ga = gen_tube(ta);
    EXPECT_EQ(ga.occupancy, gen_tube(tb).occupancy);
    EXPECT_EQ(sr::geometry::connected_components(ga).count, 1u);
    EXPECT_GE(ta.control_points.size(), 8u);
    EXPECT_LE(ta.control_points.size(), 16u);
    for (double rad : ta.radii) {
      EXPECT_GE(rad, 15.0);
      EXPECT_LE(rad, 30.0);
    }
    EXPECT_FALSE(self_intersects(tube_centerline(ta, 2.0), 4.0));
  }
}

TEST(Tube, Errors) {
  TubeSpec t = straight_tube(10, 100);
  t.control_points[1] = t.control_points[0];
  EXPECT_THROW(gen_tube(t), sr::Error);
  t = straight_tube(10, 100);
  t.radii.pop_back();
  EXPECT_THROW(gen_tube(t), sr::Error);
  t = straight_tube(10, 100);
  t.control_points.resize(1);
  t.radii.resize(1);
  EXPECT_THROW(gen_tube(t), sr::Error);
}

TEST(Tube, SelfIntersectionDetectsFoldBack) {
  TubeSpec t;
  t.control_points = {{0, 0, 0}, {100, 0, 0}, {100, 20, 0}, {0, 20, 0}};
  t.radii = {12, 12, 12, 12};
  EXPECT_TRUE(self_intersects(tube_centerline(t, 2.0), 4.0));
  EXPECT_FALSE(self_intersects(tube_centerline(straight_tube(20, 300), 2.0), 4.0));
}

TEST(Corrupt, ZeroSpecIsIdentity) {
  const TubeSpec t = straight_tube(15, 150);
  const VoxelGrid g = gen_tube(t);
  Rng rng(1);
  const auto before = rng.next_u64();
  Rng rng2(1);
  const VoxelGrid c = corrupt(g, CorruptionSpec{}, tube_centerline(t), rng2);
  EXPECT_EQ(c.occupancy, g.occupancy);
  EXPECT_EQ(rng2.next_u64(), before);
}

TEST(Corrupt, MiddleDeletionDisconnects) {
  const TubeSpec t = straight_tube(15, 200);
  const VoxelGrid g = gen_tube(t);
  VoxelGrid c = g;
  erase_path_segment(c, tube_centerline(t), 90.0, 110.0);
  EXPECT_GE(sr::geometry::connected_components(c).count, 2u);
  EXPECT_LT(c.occupied_count(), g.occupied_count());
}

TEST(Corrupt, BlobsAddDisconnectedOccupancyAndMayGrowGrid) {
  const TubeSpec t = straight_tube(15, 150);
  const VoxelGrid g = gen_tube(t);
  CorruptionSpec s;
  s.n_spurious_blobs = 1;
  s.min_blob_offset_mm = 8.0;
  s.max_blob_offset_mm = 10.0;
  Rng rng(2);
  const VoxelGrid c = corrupt(g, s, tube_centerline(t), rng);
  EXPECT_EQ(sr::geometry::connected_components(c).count, 2u);
  EXPECT_GT(c.occupied_count(), g.occupied_count());
  EXPECT_EQ(c.spacing_mm, g.spacing_mm);
}

TEST(Corrupt, ChamferGrowsWithDeletedFraction) {
  std::vector<double> medians;
  for (double frac : {0.05, 0.15, 0.3}) {
    std::vector<double> cds;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng tube_rng(100 + seed);
      const TubeSpec t = random_tube_spec(tube_rng);
      const VoxelGrid g = gen_tube(t);
      CorruptionSpec s;
      s.n_deleted_segments = 1;
      s.min_deleted_fraction = s.max_deleted_fraction = frac;
      Rng rng(seed);
      const VoxelGrid c = corrupt(g, s, tube_centerline(t), rng);
      cds.push_back(sr::metrics::chamfer(sample(c, seed), sample(g, seed + 50)));
    }
    medians.push_back(median(cds));
  }
  EXPECT_LT(medians[0], medians[1]);
  EXPECT_LT(medians[1], medians[2]);
}

TEST(Corrupt, ValidatesSpec) {
  CorruptionSpec s;
  s.max_deleted_fraction = 0.5;
  EXPECT_THROW(validate(s), sr::Error);
  s = {};
  s.jitter_sigma_mm = -1;
  EXPECT_THROW(validate(s), sr::Error);
}

TEST(Dataset, SplitSizes) {
  DatasetOptions o;
  const SplitSizes a = split_sizes(100, o);
  EXPECT_EQ(a.train, 70u);
  EXPECT_EQ(a.val, 10u);
  EXPECT_EQ(a.test, 20u);
  o.val_cases = 11;
  o.test_cases = 34;
  const SplitSizes b = split_sizes(150, o);
  EXPECT_EQ(b.train, 105u);
  EXPECT_EQ(b.val, 11u);
  EXPECT_EQ(b.test, 34u);
  EXPECT_THROW(split_sizes(9, DatasetOptions{}), sr::Error);
}

class DatasetDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / "shaperefine_dataset_test";
    std::filesystem::remove_all(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(DatasetDir, BuildsPairsWithTrainOnlyStatsAndRoundTrips) {
  DatasetOptions o;
  o.points_per_cloud = 64;
  const Dataset ds = make_dataset(12, o, 7, dir_);
  ASSERT_EQ(ds.cases.size(), 12u);
  std::vector<PointCloud> train;
  for (const auto& c : ds.cases) {
    EXPECT_EQ(c.ref.size(), 64u);
    EXPECT_EQ(c.sub.size(), 64u);
    if (c.split == Split::kTrain) {
      train.push_back(c.ref);
      train.push_back(c.sub);
    }
  }
  EXPECT_EQ(train.size(), 2u * 9u);
  const auto stats = sr::geometry::compute_standardization(train);
  EXPECT_EQ(stats.mean, ds.stats.mean);
  EXPECT_EQ(stats.std, ds.stats.std);

  const Dataset back = load_dataset(dir_);
  ASSERT_EQ(back.cases.size(), ds.cases.size());
  for (std::size_t i = 0; i < ds.cases.size(); ++i) {
    EXPECT_EQ(back.cases[i].id, ds.cases[i].id);
    EXPECT_EQ(back.cases[i].split, ds.cases[i].split);
    EXPECT_EQ(back.cases[i].severity, ds.cases[i].severity);
    EXPECT_EQ(back.cases[i].ref.points, ds.cases[i].ref.points);
    EXPECT_EQ(back.cases[i].sub.points, ds.cases[i].sub.points);
  }
  EXPECT_EQ(back.stats.std, ds.stats.std);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "cases" / "case_0000" / "ref.vgrd"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "cases" / "case_0011" / "sub.vgrd"));
}

TEST(Dataset, DeterministicAcrossThreadCounts) {
  DatasetOptions o;
  o.points_per_cloud = 32;
  const Dataset a = make_dataset(10, o, 3);
  o.threads = 3;
  const Dataset b = make_dataset(10, o, 3);
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_EQ(a.cases[i].ref.points, b.cases[i].ref.points);
    EXPECT_EQ(a.cases[i].sub.points, b.cases[i].sub.points);
  }
  const Dataset c = make_dataset(10, o, 4);
  EXPECT_NE(a.cases[0].ref.points, c.cases[0].ref.points);
}

TEST(Dataset, DefaultMixSpansBothStrata) {
  DatasetOptions o;
  const Dataset ds = make_dataset(60, o, 11);
  std::size_t easy = 0;
  for (const auto& c : ds.cases) easy += sr::metrics::chamfer(c.sub, c.ref) < 10.0;
  EXPECT_GE(double(easy), 0.2 * 60);
  EXPECT_GE(double(60 - easy), 0.2 * 60);
}
