#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "shaperefine/diffusion/schedule.hpp"
#include "shaperefine/geometry/types.hpp"
#include "shaperefine/numerics/checkpoint.hpp"
#include "shaperefine/numerics/nn.hpp"
#include "shaperefine/vae/vae.hpp"

namespace shaperefine::diffusion {

using geometry::PointCloud;

struct DdpmConfig {
  std::size_t steps = 100;  // T
  double beta_start = 1e-3;
  double beta_end = 0.2;
  std::size_t time_dim = 64;
  std::size_t global_hidden = 128;
  std::size_t global_blocks = 4;
  std::size_t local_hidden = 64;
  /// Neighbours per point in the condition path of the local denoiser; 0
  /// turns the edge features off (plain per-point path).
  std::size_t condition_knn = 8;
  /// Exponent of the point distance in the reference-to-input assignment
  /// that pairs target rows with condition rows.
  double matching_exponent = 2.0;
  std::size_t epochs = 1500;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
};

void validate(const DdpmConfig& config);
numerics::ConfigEcho to_echo(const DdpmConfig& config);
DdpmConfig ddpm_config_from_echo(const numerics::ConfigEcho& echo);
NoiseSchedule make_schedule(const DdpmConfig& config);

/// eps prediction of the closed-form Gaussian denoiser for x ~ N(c, V):
/// sqrt(1 - ab) / (ab V + 1 - ab) * (x_t - sqrt(ab) c), per row block with its
/// own t and per column with its own V. The networks learn the residual.
Tensor skip_prediction(const Tensor& x_t, const Tensor& c, const std::vector<std::size_t>& t,
                       std::span<const double> variance, const NoiseSchedule& schedule);

/// Residual network of squeeze-and-excitation blocks over
/// concat(z_t, time embedding, features of z_c).
class GlobalDenoiser {
 public:
  GlobalDenoiser(const DdpmConfig& config, std::size_t latent_dim, std::vector<double> skip_variance, Rng& rng);

  const DdpmConfig& config() const noexcept { return config_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  const std::vector<double>& skip_variance() const noexcept { return variance_; }
  const numerics::ParameterSet& params() const noexcept { return params_; }
  numerics::ParameterSet& params() noexcept { return params_; }

  /// z_t, z_c: [B, D_z].
  Var predict(const numerics::BoundParams& p, const Var& z_t, const std::vector<std::size_t>& t, const Var& z_c) const;

 private:
  struct SeBlock {
    numerics::Linear l1, l2, gate1, gate2;
  };
  DdpmConfig config_;
  std::size_t latent_dim_;
  NoiseSchedule schedule_;
  numerics::ParameterSet params_;
  std::vector<double> variance_;
  numerics::Linear cond0_, cond1_, input_, output_;
  std::vector<SeBlock> blocks_;
};

/// Edge rows [h_i, h_j - h_i] for the k nearest neighbours j of each row i
/// (by the xyz columns, within its own cloud): [B * N * k, 2C].
Tensor condition_edges(const Tensor& h_c, std::size_t batch, std::size_t k);

/// Dual-path per-point network. Path A sees [h_t, time embedding] per row;
/// path B sees the condition h_c through max-pooled neighbour edges. Both
/// are fused row by row with their cloud-wide maxima, then modulated by a
/// scale and shift computed from z.
class LocalDenoiser {
 public:
  LocalDenoiser(const DdpmConfig& config, std::size_t latent_dim, std::size_t channels,
                std::vector<double> skip_variance, Rng& rng);

  const DdpmConfig& config() const noexcept { return config_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  std::size_t channels() const noexcept { return channels_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  const std::vector<double>& skip_variance() const noexcept { return variance_; }
  const numerics::ParameterSet& params() const noexcept { return params_; }
  numerics::ParameterSet& params() noexcept { return params_; }

  /// Path B features [B * N, W]; depends only on h_c, so a sampler computes
  /// it once.
  Var condition_features(const numerics::BoundParams& p, const Tensor& h_c, std::size_t batch) const;
  /// h_t, h_c: [B * N, C]; z: [B, D_z].
  Var predict(const numerics::BoundParams& p, const Var& h_t, const std::vector<std::size_t>& t, const Var& h_c,
              const Var& cond_features, const Var& z, std::size_t batch) const;
  Var predict(const numerics::BoundParams& p, const Var& h_t, const std::vector<std::size_t>& t, const Var& h_c,
              const Var& z, std::size_t batch) const;

 private:
  DdpmConfig config_;
  std::size_t latent_dim_;
  std::size_t channels_;
  NoiseSchedule schedule_;
  numerics::ParameterSet params_;
  std::vector<double> variance_;
  numerics::Linear a0_, a1_, b0_, b1_, fuse_, film_, out0_, out1_;
};

/// Reverse processes from standard normal x_T.
std::vector<double> reverse_sample_global(std::span<const double> z_c, const GlobalDenoiser& model, Rng& rng,
                                          SamplerOptions options = {});
/// h_c: [N, C]; returns h_x0 [N, C].
Tensor reverse_sample_local(const Tensor& h_c, std::span<const double> z_x0, const LocalDenoiser& model, Rng& rng,
                            SamplerOptions options = {});

/// Reference and corrupted cloud of one case, standardized, N points each.
struct ShapePair {
  PointCloud reference;
  PointCloud input;
};

/// Posterior statistics of one training pair, with the reference rows
/// reordered to match the input rows.
struct LatentPair {
  std::vector<double> z_x_mu, z_x_logvar;  // D_z
  std::vector<double> z_c;                 // posterior mean
  Tensor h_x_mu, h_x_logvar;               // [N, C]
  Tensor h_c;                              // posterior mean
};

std::vector<LatentPair> encode_pairs(std::span<const ShapePair> pairs, const vae::VaeModel& vae,
                                     double matching_exponent);

/// Per-column mean of (x_mu - c)^2 + exp(x_logvar) over all pairs.
std::vector<double> global_skip_variance(std::span<const LatentPair> latents);
std::vector<double> local_skip_variance(std::span<const LatentPair> latents);

struct DdpmTraining {
  GlobalDenoiser global;
  LocalDenoiser local;
  std::uint64_t epochs = 0;
  std::vector<double> global_history;
  std::vector<double> local_history;
};

/// (epoch, mean global loss, mean local loss).
using DdpmEpochCallback = std::function<void(std::size_t, double, double)>;

/// Trains both denoisers on the frozen VAE's latents. Every step draws fresh
/// reparameterized targets (z_x, h_x); the local denoiser is conditioned on
/// the same z_x draw. Each network has its own forked generator.
DdpmTraining train_ddpms(std::span<const ShapePair> pairs, const vae::VaeModel& vae, const DdpmConfig& config,
                         Rng& rng, const DdpmEpochCallback& on_epoch = {});

numerics::Checkpoint make_global_checkpoint(const DdpmTraining& trained);
numerics::Checkpoint make_local_checkpoint(const DdpmTraining& trained);
/// `latent_dim` is the D_z of the VAE the model will run with.
GlobalDenoiser load_global(const numerics::Checkpoint& ckpt, std::size_t latent_dim);
LocalDenoiser load_local(const numerics::Checkpoint& ckpt, std::size_t latent_dim, std::size_t channels);

/// Encode c with posterior means, run the global then the local reverse
/// process, decode. Returns a standardized cloud of N points.
PointCloud refine(const PointCloud& c, const vae::VaeModel& vae, const GlobalDenoiser& global,
                  const LocalDenoiser& local, Rng& rng, SamplerOptions options = {});

}  // namespace shaperefine::diffusion
