#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "shaperefine/diffusion/ddpm.hpp"
#include "shaperefine/numerics/checkpoint.hpp"
#include "shaperefine/postprocess/postprocess.hpp"
#include "shaperefine/synthdata/dataset.hpp"
#include "shaperefine/vae/vae.hpp"

namespace shaperefine::pipeline {

/// Every hyperparameter of a run. The defaults are the desk-scale recipe.
struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  std::size_t cases = 150;
  /// 0 uses the split fractions.
  std::size_t val_cases = 0;
  std::size_t test_cases = 0;
  /// Empty means <out>/dataset.
  std::string dataset_dir;
  synthdata::DatasetOptions data;

  vae::VaeConfig vae;
  diffusion::DdpmConfig ddpm;
  postprocess::PostprocessConfig post;

  double stratify_threshold_mm = 10.0;
  /// VAE epoch counts compared by ablate-kl.
  std::vector<std::size_t> ablate_epochs{50, 100, 200};
};

void validate(const RunConfig& config);

/// Flat "section.key" view; the order is the file order.
numerics::ConfigEcho to_echo(const RunConfig& config);
/// Every key must be present and known.
RunConfig run_config_from_echo(const numerics::ConfigEcho& echo);

/// "[section]" headers followed by "key = value" lines; '#' starts a comment.
std::string format_run_config(const RunConfig& config);
/// Keys not given keep the value from `base`. Unknown sections or keys,
/// duplicates and malformed lines are errors that name the line.
RunConfig parse_run_config(std::string_view text, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// Dataset options with the explicit split counts applied.
synthdata::DatasetOptions dataset_options(const RunConfig& config);

}  // namespace shaperefine::pipeline
