#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shaperefine/geometry/standardize.hpp"
#include "shaperefine/synthdata/corrupt.hpp"
#include "shaperefine/synthdata/tube.hpp"

namespace shaperefine::synthdata {

using geometry::PointCloud;
using geometry::StandardizationStats;

enum class Split : std::uint8_t { kTrain, kVal, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SeverityLevel {
  std::string name;
  double weight = 1.0;
  CorruptionSpec spec;
};

/// Three levels, tuned so that both the easy (< 10 mm) and hard (>= 10 mm)
/// initial-CD strata hold a substantial share of cases at N = 256.
std::vector<SeverityLevel> default_severity_mix();

struct DatasetOptions {
  std::size_t points_per_cloud = 256;
  TubeOptions tube;
  std::vector<SeverityLevel> severities = default_severity_mix();
  int closing_radius = 1;
  double val_fraction = 0.10;
  double test_fraction = 0.20;
  std::optional<std::size_t> val_cases;   // overrides val_fraction
  std::optional<std::size_t> test_cases;  // overrides test_fraction
  std::size_t threads = 1;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

/// val = floor(n * val_fraction), test = floor(n * test_fraction), train the
/// rest, unless explicit counts are given. Throws for n < 10 or when any
/// split would be empty.
SplitSizes split_sizes(std::size_t n, const DatasetOptions& options);

struct CaseRecord {
  std::string id;
  Split split = Split::kTrain;
  std::string severity;
  PointCloud ref;  // world mm
  PointCloud sub;  // world mm
};

struct Dataset {
  std::vector<CaseRecord> cases;  // ordered by id; train, then val, then test
  StandardizationStats stats;     // from the training split only
};

/// Per-case seeds are derive_seed(seed, case index), so a case does not
/// depend on the thread count or on the other cases. When `out_dir` is set
/// the grids and clouds are written under cases/<id>/ together with
/// splits.csv and stats.bin.
Dataset make_dataset(std::size_t n_cases, const DatasetOptions& options, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Reads splits.csv, every case's clouds, and stats.bin.
Dataset load_dataset(const std::filesystem::path& dir);

std::vector<const CaseRecord*> cases_in(const Dataset& ds, Split split);

void save_stats(const std::filesystem::path& path, const StandardizationStats& stats);
StandardizationStats load_stats(const std::filesystem::path& path);

/// Single-case generation, exposed for tests: reference grid (closed, one
/// component) and the corrupted grid.
struct CaseGrids {
  VoxelGrid ref;
  VoxelGrid sub;
  std::string severity;
};
CaseGrids make_case_grids(const DatasetOptions& options, std::uint64_t case_seed);

}  // namespace shaperefine::synthdata
