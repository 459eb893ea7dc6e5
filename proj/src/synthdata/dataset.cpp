#include "shaperefine/synthdata/dataset.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/io.hpp"
#include "shaperefine/geometry/marching_cubes.hpp"
#include "shaperefine/geometry/morphology.hpp"
#include "shaperefine/geometry/sampling.hpp"

namespace shaperefine::synthdata {
namespace {

enum Stream : std::uint64_t { kTube = 1, kSeverity, kCorrupt, kSampleRef, kSampleSub };

std::string case_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%04zu", i);
  return buf;
}

const SeverityLevel& pick_severity(const std::vector<SeverityLevel>& levels, numerics::Rng& rng) {
  double total = 0.0;
  for (const auto& l : levels) total += l.weight;
  double u = rng.uniform() * total;
  for (const auto& l : levels) {
    if (u < l.weight) return l;
    u -= l.weight;
  }
  return levels.back();
}

void check_options(const DatasetOptions& o) {
  if (o.points_per_cloud < 1) throw Error("points per cloud must be >= 1");
  if (o.severities.empty()) throw Error("severity mix is empty");
  for (const auto& l : o.severities) {
    if (!(l.weight >= 0.0)) throw Error("severity weights must be non-negative");
    if (l.name.empty() || l.name.find_first_of(",\n") != std::string::npos) throw Error("bad severity name");
    validate(l.spec);
  }
  if (o.closing_radius < 1) throw Error("closing radius must be >= 1");
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error("unknown split '" + std::string(name) + "'");
}

std::vector<SeverityLevel> default_severity_mix() {
  SeverityLevel mild{"mild", 0.3, {}};
  mild.spec.jitter_sigma_mm = 1.0;
  mild.spec.n_spurious_blobs = 1;
  mild.spec.min_blob_radius_mm = 4.0;
  mild.spec.max_blob_radius_mm = 8.0;
  mild.spec.max_blob_offset_mm = 4.0;

  SeverityLevel moderate{"moderate", 0.35, {}};
  moderate.spec.jitter_sigma_mm = 1.0;
  moderate.spec.n_deleted_segments = 1;
  moderate.spec.min_deleted_fraction = 0.1;
  moderate.spec.max_deleted_fraction = 0.25;
  moderate.spec.n_spurious_blobs = 2;

  SeverityLevel severe{"severe", 0.35, {}};
  severe.spec.jitter_sigma_mm = 1.5;
  severe.spec.n_deleted_segments = 2;
  severe.spec.min_deleted_fraction = 0.15;
  severe.spec.max_deleted_fraction = 0.3;
  severe.spec.n_spurious_blobs = 3;
  severe.spec.max_blob_radius_mm = 18.0;
  severe.spec.max_blob_offset_mm = 25.0;
  return {mild, moderate, severe};
}

SplitSizes split_sizes(std::size_t n, const DatasetOptions& o) {
  if (n < 10) throw Error("need at least 10 cases to split, got " + std::to_string(n));
  auto frac = [](double f) { return f > 0.0 && f < 1.0; };
  SplitSizes s;
  if (o.val_cases) {
    s.val = *o.val_cases;
  } else {
    if (!frac(o.val_fraction)) throw Error("val fraction must lie in (0, 1)");
    s.val = std::size_t(std::floor(double(n) * o.val_fraction));
  }
  if (o.test_cases) {
    s.test = *o.test_cases;
  } else {
    if (!frac(o.test_fraction)) throw Error("test fraction must lie in (0, 1)");
    s.test = std::size_t(std::floor(double(n) * o.test_fraction));
  }
  if (s.val + s.test >= n) throw Error("validation and test splits leave no training cases");
  s.train = n - s.val - s.test;
  if (s.val == 0 || s.test == 0) throw Error("every split needs at least one case");
  return s;
}

CaseGrids make_case_grids(const DatasetOptions& options, std::uint64_t case_seed) {
  check_options(options);
  numerics::Rng tube_rng(numerics::derive_seed(case_seed, kTube));
  numerics::Rng sev_rng(numerics::derive_seed(case_seed, kSeverity));
  numerics::Rng cor_rng(numerics::derive_seed(case_seed, kCorrupt));
  const TubeSpec spec = random_tube_spec(tube_rng, options.tube);
  const VoxelGrid raw = gen_tube(spec);
  CaseGrids out;
  out.ref = geometry::binary_closing(raw, options.closing_radius);
  if (geometry::connected_components(out.ref).count != 1) out.ref = geometry::keep_largest_component(out.ref);
  const SeverityLevel& level = pick_severity(options.severities, sev_rng);
  out.severity = level.name;
  out.sub = corrupt(out.ref, level.spec, tube_centerline(spec, 1.0), cor_rng);
  return out;
}

Dataset make_dataset(std::size_t n_cases, const DatasetOptions& options, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& out_dir) {
  check_options(options);
  const SplitSizes sizes = split_sizes(n_cases, options);
  Dataset ds;
  ds.cases.resize(n_cases);

  auto build = [&](std::size_t i) {
    const std::uint64_t case_seed = numerics::derive_seed(seed, i);
    CaseRecord& rec = ds.cases[i];
    rec.id = case_id(i);
    rec.split = i < sizes.train ? Split::kTrain : i < sizes.train + sizes.val ? Split::kVal : Split::kTest;
    CaseGrids grids = make_case_grids(options, case_seed);
    rec.severity = grids.severity;
    numerics::Rng ref_rng(numerics::derive_seed(case_seed, kSampleRef));
    numerics::Rng sub_rng(numerics::derive_seed(case_seed, kSampleSub));
    const auto ref_mesh = geometry::marching_cubes(grids.ref);
    const auto sub_mesh = geometry::marching_cubes(grids.sub);
    if (ref_mesh.empty() || sub_mesh.empty()) throw Error("case " + rec.id + " produced an empty surface");
    rec.ref = geometry::poisson_disk_sample(ref_mesh, options.points_per_cloud, ref_rng);
    rec.sub = geometry::poisson_disk_sample(sub_mesh, options.points_per_cloud, sub_rng);
    if (out_dir) {
      const auto dir = *out_dir / "cases" / rec.id;
      geometry::save_voxels(dir / "ref.vgrd", grids.ref);
      geometry::save_voxels(dir / "sub.vgrd", grids.sub);
      geometry::save_cloud(dir / "ref.pcld", rec.ref);
      geometry::save_cloud(dir / "sub.pcld", rec.sub);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, n_cases));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n_cases;) {
      try {
        build(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_cases;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<PointCloud> train_refs;
  for (const auto& c : ds.cases)
    if (c.split == Split::kTrain) {
      train_refs.push_back(c.ref);
      train_refs.push_back(c.sub);
    }
  ds.stats = geometry::compute_standardization(train_refs);

  if (out_dir) {
    std::ofstream splits(*out_dir / "splits.csv");
    if (!splits) throw Error("cannot write splits.csv in " + out_dir->string());
    splits << "case_id,split,severity\n";
    for (const auto& c : ds.cases) splits << c.id << ',' << split_name(c.split) << ',' << c.severity << '\n';
    save_stats(*out_dir / "stats.bin", ds.stats);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream splits(dir / "splits.csv");
  if (!splits) throw Error("missing splits.csv in " + dir.string());
  std::string line;
  if (!std::getline(splits, line) || line != "case_id,split,severity")
    throw Error(dir.string() + "/splits.csv: unexpected header");
  Dataset ds;
  while (std::getline(splits, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, split, severity;
    if (!std::getline(ss, id, ',') || !std::getline(ss, split, ',') || !std::getline(ss, severity))
      throw Error(dir.string() + "/splits.csv: malformed row '" + line + "'");
    CaseRecord rec;
    rec.id = id;
    rec.split = parse_split(split);
    rec.severity = severity;
    rec.ref = geometry::load_cloud(dir / "cases" / id / "ref.pcld");
    rec.sub = geometry::load_cloud(dir / "cases" / id / "sub.pcld");
    ds.cases.push_back(std::move(rec));
  }
  if (ds.cases.empty()) throw Error(dir.string() + ": dataset has no cases");
  ds.stats = load_stats(dir / "stats.bin");
  return ds;
}

std::vector<const CaseRecord*> cases_in(const Dataset& ds, Split split) {
  std::vector<const CaseRecord*> out;
  for (const auto& c : ds.cases)
    if (c.split == split) out.push_back(&c);
  return out;
}

void save_stats(const std::filesystem::path& path, const StandardizationStats& stats) {
  ByteWriter w;
  for (double m : stats.mean) w.f64(m);
  w.f64(stats.std);
  w.save(path);
}

StandardizationStats load_stats(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  StandardizationStats s;
  for (double& m : s.mean) m = r.f64();
  s.std = r.f64();
  r.expect_end();
  if (!(s.std > 0.0)) throw Error(path.string() + ": std must be positive");
  return s;
}

}  // namespace shaperefine::synthdata
