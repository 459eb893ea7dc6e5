#include "shaperefine/diffusion/schedule.hpp"

#include <cmath>
#include <string>

#include "shaperefine/error.hpp"

namespace shaperefine::diffusion {

using numerics::Shape;
using numerics::Tape;

NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw Error("schedule needs T >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw Error("schedule needs 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  double prod = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    const double b = beta_start + f * (beta_end - beta_start);
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bar.push_back(prod);
  }
  return s;
}

Tensor forward_diffuse(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule) {
  if (t >= schedule.steps()) throw Error("diffusion step " + std::to_string(t) + " out of range");
  if (!x0.same_shape(eps)) throw Error("eps must have the shape of x0");
  const double a = std::sqrt(schedule.alpha_bar[t]), b = std::sqrt(1.0 - schedule.alpha_bar[t]);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return Tensor(x0.shape(), std::move(out));
}

namespace {

struct Draws {
  std::vector<std::size_t> t;
  Tensor eps;
};

// t first, then the noise of that sample's rows.
Draws draw(const Tensor& x0, std::size_t samples, const NoiseSchedule& schedule, Rng& rng) {
  const std::size_t per = x0.size() / samples;
  Draws d;
  std::vector<double> eps;
  eps.reserve(x0.size());
  for (std::size_t b = 0; b < samples; ++b) {
    d.t.push_back(rng.index(schedule.steps()));
    for (std::size_t k = 0; k < per; ++k) eps.push_back(rng.normal());
  }
  d.eps = Tensor(x0.shape(), std::move(eps));
  return d;
}

// Diffuses each sample's block of rows with its own t.
Tensor diffuse_blocks(const Tensor& x0, const std::vector<std::size_t>& t, const Tensor& eps,
                      const NoiseSchedule& schedule) {
  if (!x0.same_shape(eps)) throw Error("noise must have the shape of the targets");
  if (t.empty() || x0.size() % t.size() != 0) throw Error("one diffusion step per sample required");
  const std::size_t per = x0.size() / t.size();
  std::vector<double> xt(x0.size());
  for (std::size_t b = 0; b < t.size(); ++b) {
    if (t[b] >= schedule.steps()) throw Error("diffusion step " + std::to_string(t[b]) + " out of range");
    const double sa = std::sqrt(schedule.alpha_bar[t[b]]), sb = std::sqrt(1.0 - schedule.alpha_bar[t[b]]);
    for (std::size_t k = b * per; k < (b + 1) * per; ++k) xt[k] = sa * x0[k] + sb * eps[k];
  }
  return Tensor(x0.shape(), std::move(xt));
}

void check_global(const GlobalBatch& batch) {
  if (batch.z_x.rank() != 2 || !batch.z_x.same_shape(batch.z_c) || batch.z_x.rows() < 1)
    throw Error("global batch needs z_x and z_c of equal shape [B, D_z]");
}

void check_local(const LocalBatch& batch) {
  const std::size_t b = batch.batch;
  if (b < 1 || batch.h_x.rank() != 2 || !batch.h_x.same_shape(batch.h_c) || batch.h_x.rows() % b != 0 ||
      batch.h_x.rows() == 0)
    throw Error("local batch needs h_x and h_c of equal shape [B*N, C]");
  if (batch.z_x0.rank() != 2 || batch.z_x0.rows() != b) throw Error("local batch needs one z_x0 row per sample");
}

}  // namespace

Var global_loss_at(Tape& tape, const GlobalBatch& batch, const GlobalEpsFn& eps_fn, const NoiseSchedule& schedule,
                   const std::vector<std::size_t>& t, const Tensor& eps) {
  check_global(batch);
  if (t.size() != batch.z_x.rows()) throw Error("one diffusion step per sample required");
  const Var pred = eps_fn(tape.constant(diffuse_blocks(batch.z_x, t, eps, schedule)), t, tape.constant(batch.z_c));
  if (pred.shape() != batch.z_x.shape()) throw Error("global denoiser returned shape " + numerics::shape_string(pred.shape()));
  return scale(sum(square(pred - tape.constant(eps))), 1.0 / static_cast<double>(t.size()));
}

Var local_loss_at(Tape& tape, const LocalBatch& batch, const LocalEpsFn& eps_fn, const NoiseSchedule& schedule,
                  const std::vector<std::size_t>& t, const Tensor& eps) {
  check_local(batch);
  if (t.size() != batch.batch) throw Error("one diffusion step per sample required");
  const Var pred = eps_fn(tape.constant(diffuse_blocks(batch.h_x, t, eps, schedule)), t, tape.constant(batch.h_c),
                          tape.constant(batch.z_x0), batch.batch);
  if (pred.shape() != batch.h_x.shape()) throw Error("local denoiser returned shape " + numerics::shape_string(pred.shape()));
  return scale(sum(square(pred - tape.constant(eps))), 1.0 / static_cast<double>(t.size()));
}

Var global_loss(Tape& tape, const GlobalBatch& batch, const GlobalEpsFn& eps_fn, const NoiseSchedule& schedule,
                Rng& rng) {
  check_global(batch);
  const Draws d = draw(batch.z_x, batch.z_x.rows(), schedule, rng);
  return global_loss_at(tape, batch, eps_fn, schedule, d.t, d.eps);
}

Var local_loss(Tape& tape, const LocalBatch& batch, const LocalEpsFn& eps_fn, const NoiseSchedule& schedule, Rng& rng) {
  check_local(batch);
  const Draws d = draw(batch.h_x, batch.batch, schedule, rng);
  return local_loss_at(tape, batch, eps_fn, schedule, d.t, d.eps);
}

Tensor ancestral_sample(Tensor x, const StepEpsFn& eps_fn, const NoiseSchedule& schedule, Rng& rng,
                        SamplerOptions options) {
  for (std::size_t step = schedule.steps(); step-- > 0;) {
    const Tensor eps = eps_fn(x, step);
    if (!eps.same_shape(x)) throw Error("denoiser returned shape " + numerics::shape_string(eps.shape()));
    const double b = schedule.beta[step];
    const double c = b / std::sqrt(1.0 - schedule.alpha_bar[step]);
    const double inv = 1.0 / std::sqrt(schedule.alpha[step]);
    const double sigma = (options.stochastic && step > 0) ? std::sqrt(b) : 0.0;
    std::vector<double> next(x.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = inv * (x[i] - c * eps[i]);
      if (sigma > 0.0) next[i] += sigma * rng.normal();
    }
    x = Tensor(x.shape(), std::move(next));
  }
  return x;
}

}  // namespace shaperefine::diffusion
