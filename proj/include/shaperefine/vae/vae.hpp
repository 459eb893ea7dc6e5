#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "shaperefine/geometry/types.hpp"
#include "shaperefine/numerics/autodiff.hpp"
#include "shaperefine/numerics/checkpoint.hpp"
#include "shaperefine/numerics/nn.hpp"
#include "shaperefine/numerics/rng.hpp"

namespace shaperefine::vae {

using geometry::PointCloud;
using numerics::Rng;
using numerics::Tensor;
using numerics::Var;

struct VaeConfig {
  std::size_t n_points = 256;
  std::size_t latent_dim = 32;     // D_z
  std::size_t local_features = 4;  // D_h
  std::size_t hidden = 128;
  /// Standard deviation of the fixed-variance Gaussian decoder, in
  /// standardized units. The reconstruction term of the loss is
  /// MSE / (2 obs_sigma^2); sqrt(0.5) gives plain MSE.
  double obs_sigma = 0.05;
  double max_lambda_z = 0.4;
  double max_lambda_h = 0.4;
  std::size_t epochs = 200;
  double warmup_fraction = 0.5;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
};

void validate(const VaeConfig& config);
numerics::ConfigEcho to_echo(const VaeConfig& config);
VaeConfig vae_config_from_echo(const numerics::ConfigEcho& echo);

struct KlAnnealSchedule {
  std::size_t warmup_epochs = 1;
  double max_lambda_z = 0.4;
  double max_lambda_h = 0.4;
};

void validate(const KlAnnealSchedule& schedule);
/// warmup = max(1, round(warmup_fraction * epochs)).
KlAnnealSchedule kl_schedule(const VaeConfig& config);
/// Linear ramp from 0 at epoch 0 to the maxima at warmup_epochs.
std::pair<double, double> anneal_kl(std::size_t epoch, const KlAnnealSchedule& schedule);

/// log-variance soft clamp 10 tanh(x / 10): smooth, and always within [-10, 10].
Var clamp_logvar(const Var& raw);

/// 0.5 (mu^2 + exp(logvar) - 1 - logvar), averaged over every element.
Var kl_to_standard_normal(const Var& mu, const Var& logvar);

/// Parameters and layer layout. Layers are created in a fixed order, so two
/// models built from the same config have identical parameter names.
class VaeModel {
 public:
  VaeModel(const VaeConfig& config, Rng& rng);

  const VaeConfig& config() const noexcept { return config_; }
  const numerics::ParameterSet& params() const noexcept { return params_; }
  numerics::ParameterSet& params() noexcept { return params_; }

  struct Posterior {
    Var mu;
    Var logvar;
  };

  // Batched tape forms. `x` stacks `batch` clouds as [batch * N, 3] rows;
  // z is [batch, D_z] and h is [batch * N, 3 + D_h].
  Posterior global_posterior(const numerics::BoundParams& p, const Var& x, std::size_t batch) const;
  Posterior local_posterior(const numerics::BoundParams& p, const Var& x, const Var& z, std::size_t batch) const;
  Var decode(const numerics::BoundParams& p, const Var& z, const Var& h, std::size_t batch) const;

 private:
  struct Split {
    numerics::Linear rows;  // per-point part, carries the bias
    std::size_t cond = 0;   // weight for the broadcast z part
  };
  Var split_apply(const numerics::BoundParams& p, const Split& s, const Var& rows, const Var& z, std::size_t batch) const;

  VaeConfig config_;
  numerics::ParameterSet params_;
  std::vector<numerics::Linear> gpoint_, ghead_;
  Split lin0_;
  std::vector<numerics::Linear> lrest_;
  Split dec0_;
  std::vector<numerics::Linear> drest_;
};

/// `z + exp(logvar / 2) * eps` with eps drawn from rng (recorded as a constant).
Var reparameterize(const Var& mu, const Var& logvar, Rng& rng);

/// Stacks clouds into a [count * N, 3] tensor; every cloud must have N points.
Tensor stack_clouds(std::span<const PointCloud> clouds, std::size_t n_points);

struct GlobalEncoding {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> z;
};

struct LocalEncoding {
  Tensor mu;      // [N, 3 + D_h]
  Tensor logvar;  // [N, 3 + D_h]
  Tensor h;       // [N, 3 + D_h]
};

GlobalEncoding encode_global(const PointCloud& s, const VaeModel& model, Rng& rng);
LocalEncoding encode_local(const PointCloud& s, std::span<const double> z, const VaeModel& model, Rng& rng);
/// Decoded cloud in the standardized frame.
PointCloud decode(std::span<const double> z, const Tensor& h, const VaeModel& model);

/// Posterior-mean round trip: decode(mu_z, mu_h).
PointCloud reconstruct(const PointCloud& s, const VaeModel& model);

struct ElboTerms {
  Var total;
  Var recon;  // mean squared error
  Var kl_z;
  Var kl_h;
};

/// total = recon / (2 obs_sigma^2) + lambda_z kl_z + lambda_h kl_h, over a
/// batch stacked as in VaeModel.
ElboTerms elbo_terms(const VaeModel& model, const numerics::BoundParams& p, const Var& x, std::size_t batch,
                     double lambda_z, double lambda_h, Rng& rng);

struct ElboValue {
  double total = 0;
  double recon = 0;
  double kl_z = 0;
  double kl_h = 0;
};

ElboValue elbo_loss(const PointCloud& s, const VaeModel& model, double lambda_z, double lambda_h, Rng& rng);

struct VaeTraining {
  VaeModel model;
  std::uint64_t epochs = 0;
  std::vector<double> total_history;
  std::vector<double> recon_history;
  std::vector<double> kl_z_history;
  std::vector<double> kl_h_history;
};

/// Optional per-epoch observer: (epoch, mean total, mean recon).
using EpochCallback = std::function<void(std::size_t, double, double)>;

/// Minimizes the ELBO over `shapes` (standardized, each an independent
/// sample) with Adam and the annealed KL weights.
VaeTraining train_vae(std::span<const PointCloud> shapes, const VaeConfig& config, Rng& rng,
                      const EpochCallback& on_epoch = {});

numerics::Checkpoint make_checkpoint(const VaeTraining& trained);
VaeModel load_vae(const numerics::Checkpoint& ckpt);

}  // namespace shaperefine::vae
