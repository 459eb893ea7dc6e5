#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "shaperefine/diffusion/ddpm.hpp"
#include "shaperefine/metrics/metrics.hpp"
#include "shaperefine/pipeline/config.hpp"
#include "shaperefine/pipeline/eval.hpp"
#include "shaperefine/synthdata/dataset.hpp"
#include "shaperefine/vae/vae.hpp"

namespace shaperefine::pipeline {

/// Layout of a run directory.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path dataset_override;

  explicit RunPaths(std::filesystem::path out, const RunConfig& config);

  std::filesystem::path dataset() const;
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path vae_checkpoint() const { return checkpoints() / "vae.ckpt"; }
  std::filesystem::path global_checkpoint() const { return checkpoints() / "global_ddpm.ckpt"; }
  std::filesystem::path local_checkpoint() const { return checkpoints() / "local_ddpm.ckpt"; }
  std::filesystem::path refined() const { return root / "refined"; }
  /// Decoded cloud before postprocessing, world mm.
  std::filesystem::path decoded_cloud(const std::string& case_id) const;
  /// Postprocessed cloud, world mm.
  std::filesystem::path refined_cloud(const std::string& case_id) const;
  std::filesystem::path per_case() const { return root / "per_case.csv"; }
  std::filesystem::path summary() const { return root / "summary.csv"; }
  std::filesystem::path resolved_config() const { return root / "config.resolved"; }
  std::filesystem::path scatter_svg() const { return root / "cd_scatter.svg"; }
  std::filesystem::path ablation() const { return root / "ablation.csv"; }
  std::filesystem::path bench() const { return root / "bench.csv"; }
};

/// Progress messages from long stages.
using Log = std::function<void(const std::string&)>;

/// Independent generator streams per stage, all derived from run.seed.
enum class Stream : std::uint64_t { kVae = 1, kDdpm = 2, kRefine = 3, kAblate = 4 };
std::uint64_t stream_seed(const RunConfig& config, Stream stream);

synthdata::Dataset run_synth(const RunConfig& config, const RunPaths& paths);
/// Throws with a hint to run `synth` when the dataset is missing.
synthdata::Dataset open_dataset(const RunPaths& paths);

/// Reference and input clouds of the training split, standardized.
std::vector<geometry::PointCloud> vae_training_shapes(const synthdata::Dataset& ds);
std::vector<diffusion::ShapePair> ddpm_training_pairs(const synthdata::Dataset& ds);

vae::VaeModel run_train_vae(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths,
                            const Log& log = {});
/// Loads the run's VAE; its dimensions must equal the configured ones.
vae::VaeModel load_run_vae(const RunConfig& config, const RunPaths& paths);

struct Denoisers {
  diffusion::GlobalDenoiser global;
  diffusion::LocalDenoiser local;
};

Denoisers run_train_ddpm(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                         const RunPaths& paths, const Log& log = {});
Denoisers load_run_ddpms(const RunConfig& config, const RunPaths& paths);

/// Refines every test case. Each case has its own generator, so results do
/// not depend on run.threads. Writes decoded and postprocessed clouds.
void run_refine(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                const Denoisers& ddpms, const RunPaths& paths, const Log& log = {});

struct EvalResult {
  std::vector<metrics::CaseMetrics> rows;
  EvalSummary summary;
};

/// Metrics of the postprocessed refined clouds against the references,
/// written to per_case.csv and summary.csv (plus the scatter when `svg`).
EvalResult run_eval(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths, bool svg);

struct AblationRow {
  std::size_t epochs = 0;
  MeanStd f1, cd, hd;
};

/// Trains one VAE per ablate.vae_epochs entry and scores the reconstructions
/// of the test references (F1 at 1% of the bounding-box diagonal, CD, HD).
std::vector<AblationRow> run_ablate_kl(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths,
                                       const Log& log = {});

struct BenchRow {
  std::string stage;
  MeanStd seconds;
};

/// Per-case wall time of each refinement stage over the test split.
std::vector<BenchRow> run_bench(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                                const Denoisers& ddpms, const RunPaths& paths);

}  // namespace shaperefine::pipeline
