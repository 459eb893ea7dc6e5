#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "shaperefine/numerics/autodiff.hpp"
#include "shaperefine/numerics/rng.hpp"
#include "shaperefine/numerics/tensor.hpp"

namespace shaperefine::diffusion {

using numerics::Rng;
using numerics::Tensor;
using numerics::Var;

struct NoiseSchedule {
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  std::size_t steps() const noexcept { return beta.size(); }
};

/// Linear betas from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end);

/// sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps.
Tensor forward_diffuse(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule);

/// Noise prediction for a batch on a tape. Global: z_t and z_c are
/// [B, D_z] and `t` has B entries.
using GlobalEpsFn = std::function<Var(const Var& z_t, const std::vector<std::size_t>& t, const Var& z_c)>;

/// Local: h_t and h_c are [B * N, C], z is [B, D_z], `t` has B entries.
using LocalEpsFn =
    std::function<Var(const Var& h_t, const std::vector<std::size_t>& t, const Var& h_c, const Var& z, std::size_t batch)>;

/// Training pairs, one row (global) or one block of N rows (local) per sample.
struct GlobalBatch {
  Tensor z_x;  // [B, D_z]
  Tensor z_c;  // [B, D_z]
};

struct LocalBatch {
  Tensor h_x;   // [B * N, C]
  Tensor h_c;   // [B * N, C]
  Tensor z_x0;  // [B, D_z]
  std::size_t batch = 1;
};

/// Mean over the batch of ||eps - eps_hat||^2 with t ~ U{0..T-1} and
/// eps ~ N(0, I) drawn per sample (t first, then eps). The condition is
/// passed through undiffused.
Var global_loss(numerics::Tape& tape, const GlobalBatch& batch, const GlobalEpsFn& eps_fn,
                const NoiseSchedule& schedule, Rng& rng);
Var local_loss(numerics::Tape& tape, const LocalBatch& batch, const LocalEpsFn& eps_fn, const NoiseSchedule& schedule,
               Rng& rng);

/// The same losses for given steps (one per sample) and noise (shape of the
/// targets).
Var global_loss_at(numerics::Tape& tape, const GlobalBatch& batch, const GlobalEpsFn& eps_fn,
                   const NoiseSchedule& schedule, const std::vector<std::size_t>& t, const Tensor& eps);
Var local_loss_at(numerics::Tape& tape, const LocalBatch& batch, const LocalEpsFn& eps_fn,
                  const NoiseSchedule& schedule, const std::vector<std::size_t>& t, const Tensor& eps);

struct SamplerOptions {
  /// false sets sigma_t = 0 at every step (deterministic given x_T).
  bool stochastic = true;
};

/// Value-level noise prediction at one step for the whole sample.
using StepEpsFn = std::function<Tensor(const Tensor& x_t, std::size_t t)>;

/// Ancestral sampling from x_T: for t = T-1..0,
/// x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t) + sqrt(beta_t) noise,
/// with no noise at t = 0.
Tensor ancestral_sample(Tensor x_T, const StepEpsFn& eps_fn, const NoiseSchedule& schedule, Rng& rng,
                        SamplerOptions options = {});

}  // namespace shaperefine::diffusion
