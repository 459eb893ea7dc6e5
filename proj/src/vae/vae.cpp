#include "shaperefine/vae/vae.hpp"

#include <cmath>
#include <string>

#include "shaperefine/error.hpp"
#include "shaperefine/numerics/adam.hpp"

namespace shaperefine::vae {

using namespace numerics;

void validate(const VaeConfig& c) {
  if (c.n_points < 1 || c.latent_dim < 1 || c.local_features < 1 || c.hidden < 1)
    throw Error("VAE dimensions must be positive");
  if (!(c.obs_sigma > 0.0)) throw Error("VAE obs_sigma must be positive");
  if (!(c.max_lambda_z > 0.0) || !(c.max_lambda_h > 0.0)) throw Error("KL weight maxima must be positive");
  if (c.epochs < 1 || c.batch_size < 1) throw Error("VAE epochs and batch size must be >= 1");
  if (!(c.warmup_fraction > 0.0 && c.warmup_fraction <= 1.0)) throw Error("warmup_fraction must be in (0, 1]");
  if (!(c.learning_rate > 0.0)) throw Error("VAE learning rate must be positive");
}

ConfigEcho to_echo(const VaeConfig& c) {
  ConfigEcho e;
  e.set("vae.n_points", std::uint64_t{c.n_points});
  e.set("vae.latent_dim", std::uint64_t{c.latent_dim});
  e.set("vae.local_features", std::uint64_t{c.local_features});
  e.set("vae.hidden", std::uint64_t{c.hidden});
  e.set("vae.obs_sigma", c.obs_sigma);
  e.set("vae.max_lambda_z", c.max_lambda_z);
  e.set("vae.max_lambda_h", c.max_lambda_h);
  e.set("vae.epochs", std::uint64_t{c.epochs});
  e.set("vae.warmup_fraction", c.warmup_fraction);
  e.set("vae.batch_size", std::uint64_t{c.batch_size});
  e.set("vae.learning_rate", c.learning_rate);
  return e;
}

VaeConfig vae_config_from_echo(const ConfigEcho& e) {
  VaeConfig c;
  c.n_points = e.get_u64("vae.n_points");
  c.latent_dim = e.get_u64("vae.latent_dim");
  c.local_features = e.get_u64("vae.local_features");
  c.hidden = e.get_u64("vae.hidden");
  c.obs_sigma = e.get_double("vae.obs_sigma");
  c.max_lambda_z = e.get_double("vae.max_lambda_z");
  c.max_lambda_h = e.get_double("vae.max_lambda_h");
  c.epochs = e.get_u64("vae.epochs");
  c.warmup_fraction = e.get_double("vae.warmup_fraction");
  c.batch_size = e.get_u64("vae.batch_size");
  c.learning_rate = e.get_double("vae.learning_rate");
  validate(c);
  return c;
}

void validate(const KlAnnealSchedule& s) {
  if (s.warmup_epochs < 1) throw Error("KL warmup must be >= 1 epoch");
  if (!(s.max_lambda_z > 0.0) || !(s.max_lambda_h > 0.0)) throw Error("KL weight maxima must be positive");
}

KlAnnealSchedule kl_schedule(const VaeConfig& c) {
  KlAnnealSchedule s;
  s.warmup_epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c.warmup_fraction * double(c.epochs))));
  s.max_lambda_z = c.max_lambda_z;
  s.max_lambda_h = c.max_lambda_h;
  return s;
}

std::pair<double, double> anneal_kl(std::size_t epoch, const KlAnnealSchedule& s) {
  validate(s);
  if (epoch >= s.warmup_epochs) return {s.max_lambda_z, s.max_lambda_h};
  const double f = static_cast<double>(epoch) / static_cast<double>(s.warmup_epochs);
  return {f * s.max_lambda_z, f * s.max_lambda_h};
}

Var clamp_logvar(const Var& raw) { return scale(numerics::tanh(scale(raw, 0.1)), 10.0); }

Var kl_to_standard_normal(const Var& mu, const Var& logvar) {
  return add_scalar(scale(mean(square(mu) + numerics::exp(logvar) - logvar), 0.5), -0.5);
}

VaeModel::VaeModel(const VaeConfig& config, Rng& rng) : config_(config) {
  validate(config_);
  const std::size_t w = config_.hidden, dz = config_.latent_dim, dl = 3 + config_.local_features;
  auto split = [&](const std::string& name, std::size_t rows_in, std::size_t cond_in, std::size_t out) {
    const double total = static_cast<double>(rows_in + cond_in);
    Split s;
    s.rows = numerics::make_linear(params_, name + ".rows", rows_in, out, rng, std::sqrt(double(rows_in) / total));
    const double bound = 1.0 / std::sqrt(total);
    std::vector<double> wc(cond_in * out);
    for (double& x : wc) x = rng.uniform(-bound, bound);
    s.cond = params_.add(name + ".cond_weight", Tensor({cond_in, out}, std::move(wc)));
    return s;
  };
  gpoint_.push_back(numerics::make_linear(params_, "genc.point0", 3, w, rng));
  gpoint_.push_back(numerics::make_linear(params_, "genc.point1", w, w, rng));
  gpoint_.push_back(numerics::make_linear(params_, "genc.point2", w, 2 * w, rng));
  ghead_.push_back(numerics::make_linear(params_, "genc.head0", 2 * w, w, rng));
  ghead_.push_back(numerics::make_linear(params_, "genc.head1", w, 2 * dz, rng));
  lin0_ = split("lenc.layer0", 3, dz, w);
  lrest_.push_back(numerics::make_linear(params_, "lenc.layer1", w, w, rng));
  lrest_.push_back(numerics::make_linear(params_, "lenc.layer2", w, 2 * dl, rng));
  dec0_ = split("dec.layer0", dl, dz, w);
  drest_.push_back(numerics::make_linear(params_, "dec.layer1", w, w, rng));
  drest_.push_back(numerics::make_linear(params_, "dec.layer2", w, 3, rng));
}

Var VaeModel::split_apply(const BoundParams& p, const Split& s, const Var& rows, const Var& z, std::size_t batch) const {
  if (z.rows() != batch || z.cols() != config_.latent_dim) {
    throw Error("expected z of shape [" + std::to_string(batch) + "," + std::to_string(config_.latent_dim) + "], got " +
                numerics::shape_string(z.shape()));
  }
  if (rows.rows() % batch != 0) throw Error("row count is not a multiple of the batch size");
  const Var per_shape = add(matmul(z, p[s.cond]), p[s.rows.bias]);
  return matmul(rows, p[s.rows.weight]) + repeat_rows(per_shape, rows.rows() / batch);
}

VaeModel::Posterior VaeModel::global_posterior(const BoundParams& p, const Var& x, std::size_t batch) const {
  if (x.cols() != 3 || x.rows() != batch * config_.n_points) {
    throw Error("global encoder expects " + std::to_string(batch) + " clouds of " + std::to_string(config_.n_points) +
                " points, got " + numerics::shape_string(x.shape()));
  }
  Var f = x;
  for (const Linear& l : gpoint_) f = relu(apply(p, l, f));
  Var g = relu(apply(p, ghead_[0], segment_max(f, batch)));
  const Var out = apply(p, ghead_[1], g);
  const std::size_t dz = config_.latent_dim;
  return {slice_cols(out, 0, dz), clamp_logvar(slice_cols(out, dz, 2 * dz))};
}

VaeModel::Posterior VaeModel::local_posterior(const BoundParams& p, const Var& x, const Var& z, std::size_t batch) const {
  if (x.cols() != 3 || x.rows() != batch * config_.n_points) {
    throw Error("local encoder expects " + std::to_string(batch) + " clouds of " + std::to_string(config_.n_points) +
                " points, got " + numerics::shape_string(x.shape()));
  }
  Var f = relu(split_apply(p, lin0_, x, z, batch));
  f = relu(apply(p, lrest_[0], f));
  const Var out = apply(p, lrest_[1], f);
  const std::size_t dl = 3 + config_.local_features;
  // The spatial mean is residual on the input coordinates.
  const Var mu = concat_cols({slice_cols(out, 0, 3) + x, slice_cols(out, 3, dl)});
  return {mu, clamp_logvar(slice_cols(out, dl, 2 * dl))};
}

Var VaeModel::decode(const BoundParams& p, const Var& z, const Var& h, std::size_t batch) const {
  if (h.cols() != 3 + config_.local_features) {
    throw Error("decoder expects h with " + std::to_string(3 + config_.local_features) + " channels, got " +
                numerics::shape_string(h.shape()));
  }
  Var f = relu(split_apply(p, dec0_, h, z, batch));
  f = relu(apply(p, drest_[0], f));
  return apply(p, drest_[1], f) + slice_cols(h, 0, 3);
}

Var reparameterize(const Var& mu, const Var& logvar, Rng& rng) {
  const Tensor eps(mu.shape(), rng.normal_vector(mu.value().size()));
  return mu + numerics::exp(scale(logvar, 0.5)) * mu.tape().constant(eps);
}

Tensor stack_clouds(std::span<const PointCloud> clouds, std::size_t n_points) {
  std::vector<double> data;
  data.reserve(clouds.size() * n_points * 3);
  for (const PointCloud& c : clouds) {
    if (c.size() != n_points) {
      throw Error("expected clouds of " + std::to_string(n_points) + " points, got " + std::to_string(c.size()));
    }
    for (const auto& p : c.points) data.insert(data.end(), p.begin(), p.end());
  }
  return Tensor({clouds.size() * n_points, 3}, std::move(data));
}

namespace {

void check_standardized(const PointCloud& s) {
  if (s.frame != geometry::Frame::kStandardized) throw Error("VAE inputs must be in the standardized frame");
}

PointCloud to_cloud(const Tensor& t) {
  PointCloud out;
  out.frame = geometry::Frame::kStandardized;
  out.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) out.points[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
  return out;
}

}  // namespace

GlobalEncoding encode_global(const PointCloud& s, const VaeModel& model, Rng& rng) {
  check_standardized(s);
  Tape tape;
  const BoundParams p(tape, model.params(), false);
  const Var x = tape.constant(stack_clouds(std::span(&s, 1), model.config().n_points));
  const auto post = model.global_posterior(p, x, 1);
  const Var z = reparameterize(post.mu, post.logvar, rng);
  return {post.mu.value().to_vector(), post.logvar.value().to_vector(), z.value().to_vector()};
}

LocalEncoding encode_local(const PointCloud& s, std::span<const double> z, const VaeModel& model, Rng& rng) {
  check_standardized(s);
  if (z.size() != model.config().latent_dim) {
    throw Error("z has dimension " + std::to_string(z.size()) + ", VAE expects " +
                std::to_string(model.config().latent_dim));
  }
  Tape tape;
  const BoundParams p(tape, model.params(), false);
  const Var x = tape.constant(stack_clouds(std::span(&s, 1), model.config().n_points));
  const Var zv = tape.constant(Tensor({1, z.size()}, std::vector<double>(z.begin(), z.end())));
  const auto post = model.local_posterior(p, x, zv, 1);
  const Var h = reparameterize(post.mu, post.logvar, rng);
  return {post.mu.value(), post.logvar.value(), h.value()};
}

PointCloud decode(std::span<const double> z, const Tensor& h, const VaeModel& model) {
  const std::size_t dl = 3 + model.config().local_features;
  if (h.rank() != 2 || h.cols() != dl || h.rows() < 1)
    throw Error("h must be [N, " + std::to_string(dl) + "], got " + numerics::shape_string(h.shape()));
  if (z.size() != model.config().latent_dim) {
    throw Error("z has dimension " + std::to_string(z.size()) + ", VAE expects " +
                std::to_string(model.config().latent_dim));
  }
  Tape tape;
  const BoundParams p(tape, model.params(), false);
  const Var zv = tape.constant(Tensor({1, z.size()}, std::vector<double>(z.begin(), z.end())));
  return to_cloud(model.decode(p, zv, tape.constant(h), 1).value());
}

PointCloud reconstruct(const PointCloud& s, const VaeModel& model) {
  check_standardized(s);
  Tape tape;
  const BoundParams p(tape, model.params(), false);
  const Var x = tape.constant(stack_clouds(std::span(&s, 1), model.config().n_points));
  const auto g = model.global_posterior(p, x, 1);
  const auto l = model.local_posterior(p, x, g.mu, 1);
  return to_cloud(model.decode(p, g.mu, l.mu, 1).value());
}

ElboTerms elbo_terms(const VaeModel& model, const BoundParams& p, const Var& x, std::size_t batch, double lambda_z,
                     double lambda_h, Rng& rng) {
  if (!(lambda_z >= 0.0) || !(lambda_h >= 0.0)) throw Error("KL weights must be >= 0");
  const auto g = model.global_posterior(p, x, batch);
  const Var z = reparameterize(g.mu, g.logvar, rng);
  const auto l = model.local_posterior(p, x, z, batch);
  const Var h = reparameterize(l.mu, l.logvar, rng);
  const Var recon = mean(square(model.decode(p, z, h, batch) - x));
  const Var kl_z = kl_to_standard_normal(g.mu, g.logvar);
  const Var kl_h = kl_to_standard_normal(l.mu, l.logvar);
  const double sigma = model.config().obs_sigma;
  const Var total = scale(recon, 1.0 / (2.0 * sigma * sigma)) + scale(kl_z, lambda_z) + scale(kl_h, lambda_h);
  return {total, recon, kl_z, kl_h};
}

ElboValue elbo_loss(const PointCloud& s, const VaeModel& model, double lambda_z, double lambda_h, Rng& rng) {
  check_standardized(s);
  Tape tape;
  const BoundParams p(tape, model.params(), false);
  const Var x = tape.constant(stack_clouds(std::span(&s, 1), model.config().n_points));
  const auto t = elbo_terms(model, p, x, 1, lambda_z, lambda_h, rng);
  return {t.total.value().item(), t.recon.value().item(), t.kl_z.value().item(), t.kl_h.value().item()};
}

VaeTraining train_vae(std::span<const PointCloud> shapes, const VaeConfig& config, Rng& rng,
                      const EpochCallback& on_epoch) {
  validate(config);
  if (shapes.empty()) throw Error("train_vae needs at least one shape");
  for (const PointCloud& s : shapes) {
    check_standardized(s);
    if (s.size() != config.n_points) {
      throw Error("training shape has " + std::to_string(s.size()) + " points, config says " +
                  std::to_string(config.n_points));
    }
  }
  VaeTraining out{VaeModel(config, rng), 0, {}, {}, {}, {}};
  ParameterSet& params = out.model.params();
  numerics::AdamState adam({.learning_rate = config.learning_rate}, params.values());
  const KlAnnealSchedule schedule = kl_schedule(config);
  std::vector<std::size_t> order(shapes.size());
  std::vector<PointCloud> batch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto [lz, lh] = anneal_kl(epoch, schedule);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double sum_total = 0, sum_recon = 0, sum_kz = 0, sum_kh = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(shapes[order[i]]);
      try {
        Tape tape;
        const BoundParams p(tape, params, true);
        const Var x = tape.constant(stack_clouds(batch, config.n_points));
        const ElboTerms t = elbo_terms(out.model, p, x, batch.size(), lz, lh, rng);
        const double w = static_cast<double>(batch.size());
        sum_total += w * t.total.value().item();
        sum_recon += w * t.recon.value().item();
        sum_kz += w * t.kl_z.value().item();
        sum_kh += w * t.kl_h.value().item();
        const auto grads = p.gradients(tape.backward(t.total));
        params.assign(adam.update(params.values(), grads));
      } catch (const Error& e) {
        throw Error("VAE training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    const double n = static_cast<double>(shapes.size());
    out.total_history.push_back(sum_total / n);
    out.recon_history.push_back(sum_recon / n);
    out.kl_z_history.push_back(sum_kz / n);
    out.kl_h_history.push_back(sum_kh / n);
    out.epochs = epoch + 1;
    if (on_epoch) on_epoch(epoch, sum_total / n, sum_recon / n);
  }
  return out;
}

numerics::Checkpoint make_checkpoint(const VaeTraining& t) {
  numerics::Checkpoint c;
  c.kind = numerics::ModelKind::kVae;
  c.config = to_echo(t.model.config());
  c.params = t.model.params();
  c.epochs = t.epochs;
  if (!t.total_history.empty()) {
    c.final_losses = {{"total", t.total_history.back()},
                      {"recon", t.recon_history.back()},
                      {"kl_z", t.kl_z_history.back()},
                      {"kl_h", t.kl_h_history.back()}};
  }
  c.histories = {{"total", t.total_history},
                 {"recon", t.recon_history},
                 {"kl_z", t.kl_z_history},
                 {"kl_h", t.kl_h_history}};
  return c;
}

VaeModel load_vae(const numerics::Checkpoint& ckpt) {
  numerics::expect_kind(ckpt, numerics::ModelKind::kVae);
  Rng init(0);
  VaeModel model(vae_config_from_echo(ckpt.config), init);
  numerics::load_parameters(model.params(), ckpt);
  return model;
}

}  // namespace shaperefine::vae
