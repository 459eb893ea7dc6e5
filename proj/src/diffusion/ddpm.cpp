#include "shaperefine/diffusion/ddpm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/kdtree.hpp"
#include "shaperefine/geometry/matching.hpp"
#include "shaperefine/numerics/adam.hpp"

namespace shaperefine::diffusion {

using namespace numerics;

void validate(const DdpmConfig& c) {
  if (c.steps < 1) throw Error("DDPM needs T >= 1");
  if (!(c.beta_start > 0.0) || !(c.beta_start <= c.beta_end) || !(c.beta_end < 1.0))
    throw Error("DDPM needs 0 < beta_start <= beta_end < 1");
  if (c.time_dim < 2 || c.time_dim % 2 != 0) throw Error("time embedding dimension must be even and >= 2");
  if (c.global_hidden < 4 || c.local_hidden < 1) throw Error("DDPM widths too small");
  if (c.epochs < 1 || c.batch_size < 1) throw Error("DDPM epochs and batch size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw Error("DDPM learning rate must be positive");
  if (!(c.matching_exponent > 0.0)) throw Error("matching exponent must be positive");
}

ConfigEcho to_echo(const DdpmConfig& c) {
  ConfigEcho e;
  e.set("ddpm.steps", std::uint64_t{c.steps});
  e.set("ddpm.beta_start", c.beta_start);
  e.set("ddpm.beta_end", c.beta_end);
  e.set("ddpm.time_dim", std::uint64_t{c.time_dim});
  e.set("ddpm.global_hidden", std::uint64_t{c.global_hidden});
  e.set("ddpm.global_blocks", std::uint64_t{c.global_blocks});
  e.set("ddpm.local_hidden", std::uint64_t{c.local_hidden});
  e.set("ddpm.condition_knn", std::uint64_t{c.condition_knn});
  e.set("ddpm.matching_exponent", c.matching_exponent);
  e.set("ddpm.epochs", std::uint64_t{c.epochs});
  e.set("ddpm.batch_size", std::uint64_t{c.batch_size});
  e.set("ddpm.learning_rate", c.learning_rate);
  return e;
}

DdpmConfig ddpm_config_from_echo(const ConfigEcho& e) {
  DdpmConfig c;
  c.steps = e.get_u64("ddpm.steps");
  c.beta_start = e.get_double("ddpm.beta_start");
  c.beta_end = e.get_double("ddpm.beta_end");
  c.time_dim = e.get_u64("ddpm.time_dim");
  c.global_hidden = e.get_u64("ddpm.global_hidden");
  c.global_blocks = e.get_u64("ddpm.global_blocks");
  c.local_hidden = e.get_u64("ddpm.local_hidden");
  c.condition_knn = e.get_u64("ddpm.condition_knn");
  c.matching_exponent = e.get_double("ddpm.matching_exponent");
  c.epochs = e.get_u64("ddpm.epochs");
  c.batch_size = e.get_u64("ddpm.batch_size");
  c.learning_rate = e.get_double("ddpm.learning_rate");
  validate(c);
  return c;
}

NoiseSchedule make_schedule(const DdpmConfig& c) { return make_schedule(c.steps, c.beta_start, c.beta_end); }

Tensor skip_prediction(const Tensor& x_t, const Tensor& c, const std::vector<std::size_t>& t,
                       std::span<const double> variance, const NoiseSchedule& schedule) {
  if (x_t.rank() != 2 || !x_t.same_shape(c)) throw Error("skip needs x_t and c of equal shape [R, C]");
  if (variance.size() != x_t.cols()) throw Error("skip variance has the wrong length");
  if (t.empty() || x_t.rows() % t.size() != 0) throw Error("row count is not a multiple of the step count");
  const std::size_t per = x_t.rows() / t.size(), cols = x_t.cols();
  std::vector<double> out(x_t.size());
  for (std::size_t b = 0; b < t.size(); ++b) {
    if (t[b] >= schedule.steps()) throw Error("diffusion step out of range");
    const double ab = schedule.alpha_bar[t[b]], sa = std::sqrt(ab), s1 = std::sqrt(1.0 - ab);
    for (std::size_t r = b * per; r < (b + 1) * per; ++r)
      for (std::size_t k = 0; k < cols; ++k) {
        const std::size_t i = r * cols + k;
        out[i] = s1 / (ab * variance[k] + 1.0 - ab) * (x_t[i] - sa * c[i]);
      }
  }
  return Tensor(x_t.shape(), std::move(out));
}

namespace {

void check_variance(const std::vector<double>& v, std::size_t n) {
  if (v.size() != n) throw Error("skip variance needs " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error("skip variance must be finite and >= 0");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw Error("trailing characters");
    } catch (const std::exception&) {
      throw Error("malformed number list: " + s);
    }
  }
  return out;
}

Var time_embedding(Tape& tape, const std::vector<std::size_t>& t, std::size_t dim) {
  return tape.constant(sinusoidal_embedding(t, dim));
}

}  // namespace

GlobalDenoiser::GlobalDenoiser(const DdpmConfig& config, std::size_t latent_dim, std::vector<double> skip_variance,
                               Rng& rng)
    : config_(config), latent_dim_(latent_dim) {
  validate(config_);
  if (latent_dim_ < 1) throw Error("global denoiser needs D_z >= 1");
  check_variance(skip_variance, latent_dim_);
  schedule_ = make_schedule(config_);
  variance_ = std::move(skip_variance);
  const std::size_t w = config_.global_hidden, dz = latent_dim_;
  cond0_ = make_linear(params_, "global.cond0", dz, w, rng);
  cond1_ = make_linear(params_, "global.cond1", w, w, rng);
  input_ = make_linear(params_, "global.input", dz + config_.time_dim + w, w, rng);
  for (std::size_t i = 0; i < config_.global_blocks; ++i) {
    const std::string n = "global.block" + std::to_string(i);
    blocks_.push_back({make_linear(params_, n + ".l1", w, w, rng), make_linear(params_, n + ".l2", w, w, rng),
                       make_linear(params_, n + ".gate1", w, w / 4, rng),
                       make_linear(params_, n + ".gate2", w / 4, w, rng)});
  }
  output_ = make_linear(params_, "global.output", w, dz, rng);
}

Var GlobalDenoiser::predict(const BoundParams& p, const Var& z_t, const std::vector<std::size_t>& t,
                            const Var& z_c) const {
  if (z_t.cols() != latent_dim_ || z_t.shape() != z_c.shape() || z_t.rows() != t.size()) {
    throw Error("global denoiser expects z_t, z_c of shape [" + std::to_string(t.size()) + "," +
                std::to_string(latent_dim_) + "], got " + shape_string(z_t.shape()) + " and " +
                shape_string(z_c.shape()));
  }
  Tape& tape = z_t.tape();
  const Var cond = apply(p, cond1_, relu(apply(p, cond0_, z_c)));
  Var x = apply(p, input_, concat_cols({z_t, time_embedding(tape, t, config_.time_dim), cond}));
  for (const SeBlock& b : blocks_) {
    const Var y = apply(p, b.l2, relu(apply(p, b.l1, relu(x))));
    const Var gate = sigmoid(apply(p, b.gate2, relu(apply(p, b.gate1, y))));
    x = x + y * gate;
  }
  const Var skip =
      tape.constant(skip_prediction(z_t.value(), z_c.value(), t, variance_, schedule_));
  return skip + apply(p, output_, relu(x));
}

Tensor condition_edges(const Tensor& h_c, std::size_t batch, std::size_t k) {
  if (batch < 1 || h_c.rank() != 2 || h_c.cols() < 3 || h_c.rows() % batch != 0 || h_c.rows() == 0)
    throw Error("condition edges need h_c of shape [B*N, C >= 3]");
  const std::size_t n = h_c.rows() / batch, c = h_c.cols();
  if (k < 1 || k >= n) throw Error("condition kNN needs 1 <= k < N");
  std::vector<double> out;
  out.reserve(h_c.rows() * k * 2 * c);
  std::vector<geometry::Vec3> xyz(n);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * n;
    for (std::size_t i = 0; i < n; ++i) xyz[i] = {h_c.at(base + i, 0), h_c.at(base + i, 1), h_c.at(base + i, 2)};
    const geometry::KdTree tree(xyz);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& nb : tree.knn(xyz[i], k, i)) {
        for (std::size_t q = 0; q < c; ++q) out.push_back(h_c.at(base + i, q));
        for (std::size_t q = 0; q < c; ++q) out.push_back(h_c.at(base + nb.index, q) - h_c.at(base + i, q));
      }
    }
  }
  return Tensor({h_c.rows() * k, 2 * c}, std::move(out));
}

LocalDenoiser::LocalDenoiser(const DdpmConfig& config, std::size_t latent_dim, std::size_t channels,
                             std::vector<double> skip_variance, Rng& rng)
    : config_(config), latent_dim_(latent_dim), channels_(channels) {
  validate(config_);
  if (latent_dim_ < 1 || channels_ < 3) throw Error("local denoiser needs D_z >= 1 and >= 3 channels");
  check_variance(skip_variance, channels_);
  schedule_ = make_schedule(config_);
  variance_ = std::move(skip_variance);
  const std::size_t w = config_.local_hidden, c = channels_;
  a0_ = make_linear(params_, "local.noisy0", c + config_.time_dim, w, rng);
  a1_ = make_linear(params_, "local.noisy1", w, w, rng);
  b0_ = make_linear(params_, "local.cond0", config_.condition_knn > 0 ? 2 * c : c, w, rng);
  b1_ = make_linear(params_, "local.cond1", w, w, rng);
  fuse_ = make_linear(params_, "local.fuse", 4 * w, w, rng);
  film_ = make_linear(params_, "local.film", latent_dim_, 2 * w, rng);
  out0_ = make_linear(params_, "local.out0", w, w, rng);
  out1_ = make_linear(params_, "local.out1", w, c, rng);
}

Var LocalDenoiser::condition_features(const BoundParams& p, const Tensor& h_c, std::size_t batch) const {
  if (h_c.rank() != 2 || h_c.cols() != channels_ || batch < 1 || h_c.rows() % batch != 0 || h_c.rows() == 0)
    throw Error("local denoiser expects h_c of shape [B*N, " + std::to_string(channels_) + "], got " +
                shape_string(h_c.shape()));
  Tape& tape = p.vars().front().tape();
  if (config_.condition_knn == 0) return relu(apply(p, b1_, relu(apply(p, b0_, tape.constant(h_c)))));
  const std::size_t n = h_c.rows() / batch;
  const std::size_t k = std::min(config_.condition_knn, n - 1);
  const Var e = tape.constant(condition_edges(h_c, batch, k));
  return segment_max(relu(apply(p, b1_, relu(apply(p, b0_, e)))), h_c.rows());
}

Var LocalDenoiser::predict(const BoundParams& p, const Var& h_t, const std::vector<std::size_t>& t, const Var& h_c,
                           const Var& cond_features, const Var& z, std::size_t batch) const {
  if (batch < 1 || t.size() != batch || h_t.cols() != channels_ || h_t.shape() != h_c.shape() ||
      h_t.rows() % batch != 0 || h_t.rows() == 0) {
    throw Error("local denoiser expects h_t, h_c of shape [B*N, " + std::to_string(channels_) + "], got " +
                shape_string(h_t.shape()) + " and " + shape_string(h_c.shape()));
  }
  if (z.rows() != batch || z.cols() != latent_dim_) throw Error("local denoiser expects z of shape [B, D_z]");
  if (cond_features.rows() != h_t.rows()) throw Error("condition features do not match h_t rows");
  Tape& tape = h_t.tape();
  const std::size_t n = h_t.rows() / batch, w = config_.local_hidden;
  const Var te = repeat_rows(time_embedding(tape, t, config_.time_dim), n);
  const Var a = relu(apply(p, a1_, relu(apply(p, a0_, concat_cols({h_t, te})))));
  const Var& b = cond_features;
  const Var g = repeat_rows(concat_cols({segment_max(a, batch), segment_max(b, batch)}), n);
  const Var f = apply(p, fuse_, concat_cols({a, b, g}));
  const Var mod = apply(p, film_, z);
  const Var gain = add_scalar(repeat_rows(slice_cols(mod, 0, w), n), 1.0);
  const Var shift = repeat_rows(slice_cols(mod, w, 2 * w), n);
  const Var out = apply(p, out1_, relu(apply(p, out0_, relu(f * gain + shift))));
  const Var skip =
      tape.constant(skip_prediction(h_t.value(), h_c.value(), t, variance_, schedule_));
  return skip + out;
}

Var LocalDenoiser::predict(const BoundParams& p, const Var& h_t, const std::vector<std::size_t>& t, const Var& h_c,
                           const Var& z, std::size_t batch) const {
  return predict(p, h_t, t, h_c, condition_features(p, h_c.value(), batch), z, batch);
}

std::vector<double> reverse_sample_global(std::span<const double> z_c, const GlobalDenoiser& model, Rng& rng,
                                          SamplerOptions options) {
  const std::size_t dz = model.latent_dim();
  if (z_c.size() != dz) throw Error("z_c has dimension " + std::to_string(z_c.size()) + ", model expects " + std::to_string(dz));
  const Tensor zc({1, dz}, std::vector<double>(z_c.begin(), z_c.end()));
  const StepEpsFn eps = [&](const Tensor& x, std::size_t t) {
    Tape tape;
    const BoundParams p(tape, model.params(), false);
    return model.predict(p, tape.constant(x), {t}, tape.constant(zc)).value();
  };
  Tensor x({1, dz}, rng.normal_vector(dz));
  return ancestral_sample(std::move(x), eps, model.schedule(), rng, options).to_vector();
}

Tensor reverse_sample_local(const Tensor& h_c, std::span<const double> z_x0, const LocalDenoiser& model, Rng& rng,
                            SamplerOptions options) {
  if (h_c.rank() != 2 || h_c.cols() != model.channels() || h_c.rows() < 2)
    throw Error("h_c must be [N >= 2, " + std::to_string(model.channels()) + "], got " + shape_string(h_c.shape()));
  if (z_x0.size() != model.latent_dim()) throw Error("z_x0 has the wrong dimension");
  const Tensor z({1, z_x0.size()}, std::vector<double>(z_x0.begin(), z_x0.end()));
  Tensor features;
  {
    Tape tape;
    const BoundParams p(tape, model.params(), false);
    features = model.condition_features(p, h_c, 1).value();
  }
  const StepEpsFn eps = [&](const Tensor& x, std::size_t t) {
    Tape tape;
    const BoundParams p(tape, model.params(), false);
    return model
        .predict(p, tape.constant(x), {t}, tape.constant(h_c), tape.constant(features), tape.constant(z), 1)
        .value();
  };
  Tensor x(h_c.shape(), rng.normal_vector(h_c.size()));
  return ancestral_sample(std::move(x), eps, model.schedule(), rng, options);
}

namespace {

struct Posteriors {
  std::vector<double> z_mu, z_logvar;
  Tensor h_mu, h_logvar;
};

Posteriors posteriors(const PointCloud& s, const vae::VaeModel& vae) {
  if (s.frame != geometry::Frame::kStandardized) throw Error("DDPM inputs must be in the standardized frame");
  Tape tape;
  const BoundParams p(tape, vae.params(), false);
  const Var x = tape.constant(vae::stack_clouds(std::span(&s, 1), vae.config().n_points));
  const auto g = vae.global_posterior(p, x, 1);
  const auto l = vae.local_posterior(p, x, g.mu, 1);
  return {g.mu.value().to_vector(), g.logvar.value().to_vector(), l.mu.value(), l.logvar.value()};
}

}  // namespace

std::vector<LatentPair> encode_pairs(std::span<const ShapePair> pairs, const vae::VaeModel& vae,
                                     double matching_exponent) {
  std::vector<LatentPair> out;
  out.reserve(pairs.size());
  for (const ShapePair& pair : pairs) {
    const auto perm = geometry::match_points(pair.input, pair.reference, matching_exponent);
    PointCloud matched = pair.reference;
    for (std::size_t i = 0; i < perm.size(); ++i) matched.points[i] = pair.reference.points[perm[i]];
    const Posteriors x = posteriors(matched, vae);
    const Posteriors c = posteriors(pair.input, vae);
    out.push_back({x.z_mu, x.z_logvar, c.z_mu, x.h_mu, x.h_logvar, c.h_mu});
  }
  return out;
}

namespace {

template <typename Get>
std::vector<double> column_variance(std::span<const LatentPair> latents, std::size_t cols, Get get) {
  if (latents.empty()) throw Error("skip variance needs at least one pair");
  std::vector<double> sum(cols, 0.0);
  std::size_t rows = 0;
  for (const LatentPair& l : latents) {
    const auto [mu, lv, c] = get(l);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double d = mu[i] - c[i];
      sum[i % cols] += d * d + std::exp(lv[i]);
    }
    rows += mu.size() / cols;
  }
  for (double& s : sum) s /= static_cast<double>(rows);
  return sum;
}

}  // namespace

std::vector<double> global_skip_variance(std::span<const LatentPair> latents) {
  const std::size_t dz = latents.empty() ? 0 : latents.front().z_c.size();
  return column_variance(latents, dz, [](const LatentPair& l) {
    return std::tuple{std::span<const double>(l.z_x_mu), std::span<const double>(l.z_x_logvar),
                      std::span<const double>(l.z_c)};
  });
}

std::vector<double> local_skip_variance(std::span<const LatentPair> latents) {
  const std::size_t c = latents.empty() ? 0 : latents.front().h_c.cols();
  return column_variance(latents, c, [](const LatentPair& l) {
    return std::tuple{l.h_x_mu.data(), l.h_x_logvar.data(), l.h_c.data()};
  });
}

namespace {

// mu + exp(logvar / 2) eps, eps drawn in element order.
void sample_into(std::vector<double>& out, std::span<const double> mu, std::span<const double> logvar, Rng& rng) {
  for (std::size_t i = 0; i < mu.size(); ++i) out.push_back(mu[i] + std::exp(0.5 * logvar[i]) * rng.normal());
}

}  // namespace

DdpmTraining train_ddpms(std::span<const ShapePair> pairs, const vae::VaeModel& vae, const DdpmConfig& config,
                         Rng& rng, const DdpmEpochCallback& on_epoch) {
  validate(config);
  if (pairs.empty()) throw Error("train_ddpms needs at least one pair");
  const std::size_t n = vae.config().n_points, dz = vae.config().latent_dim, c = 3 + vae.config().local_features;
  const std::vector<LatentPair> latents = encode_pairs(pairs, vae, config.matching_exponent);

  Rng init = rng.fork(1), data = rng.fork(2), grng = rng.fork(3), lrng = rng.fork(4);
  DdpmTraining out{GlobalDenoiser(config, dz, global_skip_variance(latents), init),
                   LocalDenoiser(config, dz, c, local_skip_variance(latents), init),
                   0,
                   {},
                   {}};
  AdamState gadam({.learning_rate = config.learning_rate}, out.global.params().values());
  AdamState ladam({.learning_rate = config.learning_rate}, out.local.params().values());
  const NoiseSchedule& schedule = out.global.schedule();

  std::vector<std::size_t> order(latents.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[data.index(i)]);
    double gsum = 0.0, lsum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size), b = end - start;
      std::vector<double> zx, zc, hx, hc;
      for (std::size_t i = start; i < end; ++i) {
        const LatentPair& l = latents[order[i]];
        sample_into(zx, l.z_x_mu, l.z_x_logvar, data);
        sample_into(hx, l.h_x_mu.data(), l.h_x_logvar.data(), data);
        zc.insert(zc.end(), l.z_c.begin(), l.z_c.end());
        hc.insert(hc.end(), l.h_c.data().begin(), l.h_c.data().end());
      }
      const Tensor z_x({b, dz}, std::move(zx));
      const GlobalBatch gb{z_x, Tensor({b, dz}, std::move(zc))};
      const LocalBatch lb{Tensor({b * n, c}, std::move(hx)), Tensor({b * n, c}, std::move(hc)), z_x, b};
      double gl = 0.0, ll = 0.0;
      {
        Tape tape;
        const BoundParams p(tape, out.global.params(), true);
        const GlobalEpsFn fn = [&](const Var& zt, const std::vector<std::size_t>& t, const Var& cond) {
          return out.global.predict(p, zt, t, cond);
        };
        const Var loss = global_loss(tape, gb, fn, schedule, grng);
        gl = loss.value().item();
        if (!std::isfinite(gl)) throw Error("global DDPM loss is not finite at epoch " + std::to_string(epoch));
        out.global.params().assign(gadam.update(out.global.params().values(), p.gradients(tape.backward(loss))));
      }
      {
        Tape tape;
        const BoundParams p(tape, out.local.params(), true);
        const LocalEpsFn fn = [&](const Var& ht, const std::vector<std::size_t>& t, const Var& cond, const Var& z,
                                  std::size_t batch) { return out.local.predict(p, ht, t, cond, z, batch); };
        const Var loss = local_loss(tape, lb, fn, schedule, lrng);
        ll = loss.value().item();
        if (!std::isfinite(ll)) throw Error("local DDPM loss is not finite at epoch " + std::to_string(epoch));
        out.local.params().assign(ladam.update(out.local.params().values(), p.gradients(tape.backward(loss))));
      }
      gsum += static_cast<double>(b) * gl;
      lsum += static_cast<double>(b) * ll;
    }
    const double m = static_cast<double>(latents.size());
    out.global_history.push_back(gsum / m);
    out.local_history.push_back(lsum / m);
    out.epochs = epoch + 1;
    if (on_epoch) on_epoch(epoch, gsum / m, lsum / m);
  }
  return out;
}

namespace {

Checkpoint ddpm_checkpoint(ModelKind kind, const DdpmConfig& config, std::size_t latent_dim, std::size_t channels,
                           const std::vector<double>& variance, const ParameterSet& params, std::uint64_t epochs,
                           const std::vector<double>& history) {
  Checkpoint ck;
  ck.kind = kind;
  ck.config = to_echo(config);
  ck.config.set("model.latent_dim", std::uint64_t{latent_dim});
  ck.config.set("model.channels", std::uint64_t{channels});
  ck.config.set("model.skip_variance", join_doubles(variance));
  ck.params = params;
  ck.epochs = epochs;
  if (!history.empty()) ck.final_losses = {{"loss", history.back()}};
  ck.histories = {{"loss", history}};
  return ck;
}

void expect_latent_dim(const Checkpoint& ck, std::size_t latent_dim) {
  const std::uint64_t stored = ck.config.get_u64("model.latent_dim");
  if (stored != latent_dim) {
    throw Error(std::string(model_kind_name(ck.kind)) + " checkpoint has D_z = " + std::to_string(stored) +
                " but the configured D_z is " + std::to_string(latent_dim));
  }
}

}  // namespace

Checkpoint make_global_checkpoint(const DdpmTraining& t) {
  return ddpm_checkpoint(ModelKind::kGlobalDdpm, t.global.config(), t.global.latent_dim(), t.global.latent_dim(),
                         t.global.skip_variance(), t.global.params(), t.epochs, t.global_history);
}

Checkpoint make_local_checkpoint(const DdpmTraining& t) {
  return ddpm_checkpoint(ModelKind::kLocalDdpm, t.local.config(), t.local.latent_dim(), t.local.channels(),
                         t.local.skip_variance(), t.local.params(), t.epochs, t.local_history);
}

GlobalDenoiser load_global(const Checkpoint& ck, std::size_t latent_dim) {
  expect_kind(ck, ModelKind::kGlobalDdpm);
  expect_latent_dim(ck, latent_dim);
  Rng init(0);
  GlobalDenoiser model(ddpm_config_from_echo(ck.config), latent_dim, split_doubles(ck.config.get("model.skip_variance")),
                       init);
  load_parameters(model.params(), ck);
  return model;
}

LocalDenoiser load_local(const Checkpoint& ck, std::size_t latent_dim, std::size_t channels) {
  expect_kind(ck, ModelKind::kLocalDdpm);
  expect_latent_dim(ck, latent_dim);
  if (ck.config.get_u64("model.channels") != channels)
    throw Error("LOCAL_DDPM checkpoint channel count does not match the VAE");
  Rng init(0);
  LocalDenoiser model(ddpm_config_from_echo(ck.config), latent_dim, channels,
                      split_doubles(ck.config.get("model.skip_variance")), init);
  load_parameters(model.params(), ck);
  return model;
}

PointCloud refine(const PointCloud& c, const vae::VaeModel& vae, const GlobalDenoiser& global,
                  const LocalDenoiser& local, Rng& rng, SamplerOptions options) {
  const std::size_t dz = vae.config().latent_dim;
  if (global.latent_dim() != dz || local.latent_dim() != dz || local.channels() != 3 + vae.config().local_features)
    throw Error("denoiser dimensions do not match the VAE", "refine");
  Posteriors post;
  try {
    if (c.size() != vae.config().n_points)
      throw Error("input has " + std::to_string(c.size()) + " points, model expects " +
                  std::to_string(vae.config().n_points));
    post = posteriors(c, vae);
  } catch (...) {
    rethrow_with_stage("encode");
  }
  std::vector<double> z;
  try {
    z = reverse_sample_global(post.z_mu, global, rng, options);
  } catch (...) {
    rethrow_with_stage("global_reverse");
  }
  Tensor h;
  try {
    h = reverse_sample_local(post.h_mu, z, local, rng, options);
  } catch (...) {
    rethrow_with_stage("local_reverse");
  }
  try {
    return vae::decode(z, h, vae);
  } catch (...) {
    rethrow_with_stage("decode");
  }
}

}  // namespace shaperefine::diffusion
