#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fd_oracle.hpp"
#include "shaperefine/diffusion/ddpm.hpp"
#include "shaperefine/error.hpp"
#include "shaperefine/metrics/metrics.hpp"
#include "shaperefine/numerics/adam.hpp"

namespace sr = shaperefine;
using namespace shaperefine::diffusion;
using namespace shaperefine::numerics;
using shaperefine::geometry::Frame;
using shaperefine::geometry::Vec3;

namespace {

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, rng.normal_vector(rows * cols));
}

DdpmConfig toy_ddpm() {
  DdpmConfig c;
  c.steps = 10;
  c.beta_start = 0.01;
  c.beta_end = 0.3;
  c.time_dim = 4;
  c.global_hidden = 8;
  c.global_blocks = 2;
  c.local_hidden = 4;
  c.condition_knn = 2;
  c.epochs = 3;
  c.batch_size = 2;
  return c;
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  std::vector<double> out;
  for (std::size_t i : perm)
    for (std::size_t k = 0; k < t.cols(); ++k) out.push_back(t.at(i, k));
  return Tensor(t.shape(), std::move(out));
}

// Oracle that recovers the true noise from x_t and the clean targets.
Tensor true_noise(const Tensor& x_t, const Tensor& x0, const std::vector<std::size_t>& t,
                  const NoiseSchedule& s) {
  const std::size_t per = x0.size() / t.size();
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ab = s.alpha_bar[t[i / per]];
    out[i] = (x_t[i] - std::sqrt(ab) * x0[i]) / std::sqrt(1.0 - ab);
  }
  return Tensor(x0.shape(), std::move(out));
}

PointCloud ellipsoid(Rng& rng, std::size_t n) {
  const Vec3 axes{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
  PointCloud c;
  c.frame = Frame::kStandardized;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    c.points.push_back({axes[0] * d[0] / len, axes[1] * d[1] / len, axes[2] * d[2] / len});
  }
  return c;
}

// Reference ellipsoid and a jittered copy with its rows shuffled.
std::vector<ShapePair> toy_pairs(std::uint64_t seed, std::size_t count, std::size_t n, double jitter) {
  Rng rng(seed);
  std::vector<ShapePair> out;
  for (std::size_t i = 0; i < count; ++i) {
    ShapePair p{ellipsoid(rng, n), {}};
    p.input = p.reference;
    const auto perm = random_permutation(rng, n);
    for (std::size_t k = 0; k < n; ++k)
      for (int d = 0; d < 3; ++d) p.input.points[k][d] = p.reference.points[perm[k]][d] + jitter * rng.normal();
    out.push_back(std::move(p));
  }
  return out;
}

sr::vae::VaeModel toy_vae(const std::vector<ShapePair>& pairs, std::size_t n, std::size_t epochs) {
  sr::vae::VaeConfig c;
  c.n_points = n;
  c.latent_dim = 3;
  c.local_features = 2;
  c.hidden = 8;
  c.epochs = epochs;
  c.batch_size = 4;
  c.obs_sigma = 0.05;
  std::vector<PointCloud> shapes;
  for (const auto& p : pairs) {
    shapes.push_back(p.reference);
    shapes.push_back(p.input);
  }
  Rng rng(5);
  return sr::vae::train_vae(shapes, c, rng).model;
}

}  // namespace

TEST(Schedule, Examples) {
  const NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
  EXPECT_LT(s.alpha_bar.back(), 1e-4);
  EXPECT_NEAR(s.beta.front(), 1e-4, 1e-18);
  EXPECT_NEAR(s.beta.back(), 0.02, 1e-15);
  const NoiseSchedule one = make_schedule(1, 0.05, 0.2);
  EXPECT_DOUBLE_EQ(one.alpha_bar[0], 1.0 - 0.05);
  EXPECT_THROW(make_schedule(0, 0.1, 0.2), sr::Error);
  EXPECT_THROW(make_schedule(10, 0.0, 0.2), sr::Error);
  EXPECT_THROW(make_schedule(10, 0.3, 0.2), sr::Error);
  EXPECT_THROW(make_schedule(10, 0.1, 1.0), sr::Error);
}

TEST(Schedule, InvariantsForRandomInputs) {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const double b0 = rng.uniform(1e-5, 0.3), b1 = rng.uniform(b0, 0.99);
    const NoiseSchedule s = make_schedule(1 + rng.index(300), b0, b1);
    for (std::size_t t = 0; t < s.steps(); ++t) {
      EXPECT_GT(s.beta[t], 0.0);
      EXPECT_LT(s.beta[t], 1.0);
      EXPECT_DOUBLE_EQ(s.alpha[t], 1.0 - s.beta[t]);
      if (t > 0) {
        EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
      }
    }
    EXPECT_DOUBLE_EQ(s.alpha_bar[0], 1.0 - b0);
  }
}

TEST(ForwardDiffuse, ExamplesAndErrors) {
  Rng rng(2);
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const Tensor x0 = random_tensor(rng, 4, 3);
  const Tensor xt = forward_diffuse(x0, 30, Tensor::zeros({4, 3}), s);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_DOUBLE_EQ(xt[i], std::sqrt(s.alpha_bar[30]) * x0[i]);
  EXPECT_THROW(forward_diffuse(x0, 100, x0, s), sr::Error);
  EXPECT_THROW(forward_diffuse(x0, 0, Tensor::zeros({3, 4}), s), sr::Error);
}

TEST(ForwardDiffuse, SingleStepInversionAtZero) {
  Rng rng(3);
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const Tensor x0 = random_tensor(rng, 5, 7), eps = random_tensor(rng, 5, 7);
  const Tensor xt = forward_diffuse(x0, 0, eps, s);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double back = (xt[i] - std::sqrt(1.0 - s.alpha_bar[0]) * eps[i]) / std::sqrt(s.alpha_bar[0]);
    EXPECT_NEAR(back, x0[i], 1e-12);
  }
}

TEST(ForwardDiffuse, MarginalMatchesClosedForm) {
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const Tensor x0({1, 2}, {1.5, -0.7});
  const std::size_t draws = 100000;
  Rng rng(4);
  for (std::size_t t : {std::size_t{1}, std::size_t{50}, std::size_t{99}}) {
    for (std::size_t d = 0; d < 2; ++d) {
      double sum = 0, sq = 0;
      for (std::size_t k = 0; k < draws; ++k) {
        const double v = forward_diffuse(x0, t, Tensor({1, 2}, rng.normal_vector(2)), s)[d];
        sum += v;
        sq += v * v;
      }
      const double m = sum / draws, var = sq / draws - m * m;
      const double mean_true = std::sqrt(s.alpha_bar[t]) * x0[d], var_true = 1.0 - s.alpha_bar[t];
      EXPECT_LT(std::abs(m - mean_true), 3.0 * std::sqrt(var_true / draws)) << t;
      EXPECT_LT(std::abs(var - var_true), 3.0 * var_true * std::sqrt(2.0 / (draws - 1))) << t;
    }
  }
}

TEST(GlobalLoss, OracleAndZeroDenoiser) {
  Rng rng(5);
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const std::size_t dz = 6;
  const GlobalBatch batch{random_tensor(rng, 16, dz), random_tensor(rng, 16, dz)};
  Tape tape;
  const GlobalEpsFn oracle = [&](const Var& zt, const std::vector<std::size_t>& t, const Var&) {
    return tape.constant(true_noise(zt.value(), batch.z_x, t, s));
  };
  EXPECT_LT(global_loss(tape, batch, oracle, s, rng).value().item(), 1e-20);

  const GlobalEpsFn zero = [&](const Var& zt, const std::vector<std::size_t>&, const Var&) {
    return tape.constant(Tensor::zeros(zt.shape()));
  };
  double total = 0;
  const int reps = 400;
  for (int k = 0; k < reps; ++k) total += global_loss(tape, batch, zero, s, rng).value().item();
  EXPECT_NEAR(total / reps, double(dz), 0.05 * dz);
}

TEST(GlobalLoss, ConditionIsNeverNoised) {
  Rng rng(6);
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const GlobalBatch batch{random_tensor(rng, 4, 3), random_tensor(rng, 4, 3)};
  Tape tape;
  const GlobalEpsFn probe = [&](const Var& zt, const std::vector<std::size_t>&, const Var& zc) {
    EXPECT_TRUE(zc.value().bitwise_equal(batch.z_c));
    return tape.constant(Tensor::zeros(zt.shape()));
  };
  for (int k = 0; k < 20; ++k) global_loss(tape, batch, probe, s, rng);
}

TEST(GlobalLoss, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  const DdpmConfig c = toy_ddpm();
  GlobalDenoiser model(c, 3, {0.5, 0.2, 1.0}, rng);
  const GlobalBatch batch{random_tensor(rng, 3, 3), random_tensor(rng, 3, 3)};
  auto run = [&](GlobalDenoiser& m, Tape& tape, const BoundParams& p) {
    Rng shared(11);
    const GlobalEpsFn fn = [&](const Var& zt, const std::vector<std::size_t>& t, const Var& zc) {
      return m.predict(p, zt, t, zc);
    };
    return global_loss(tape, batch, fn, m.schedule(), shared);
  };
  auto loss = [&](const std::vector<Tensor>& values) {
    GlobalDenoiser m = model;
    m.params().assign(values);
    Tape tape;
    const BoundParams p(tape, m.params(), false);
    return run(m, tape, p).value().item();
  };
  Tape tape;
  const BoundParams p(tape, model.params(), true);
  const auto grads = p.gradients(tape.backward(run(model, tape, p)));
  const auto fd = sr::testing::central_differences(loss, model.params().values(), 1e-6);
  for (std::size_t k = 0; k < grads.size(); ++k)
    EXPECT_LT(sr::testing::relative_error(grads[k].to_vector(), fd[k]), 1e-3) << model.params().name(k);
}

TEST(LocalLoss, OracleZeroAndErrors) {
  Rng rng(8);
  const NoiseSchedule s = make_schedule(100, 1e-3, 0.2);
  const std::size_t b = 2, n = 10, c = 5;
  const LocalBatch batch{random_tensor(rng, b * n, c), random_tensor(rng, b * n, c), random_tensor(rng, b, 3), b};
  Tape tape;
  const LocalEpsFn oracle = [&](const Var& ht, const std::vector<std::size_t>& t, const Var&, const Var&,
                                std::size_t) { return tape.constant(true_noise(ht.value(), batch.h_x, t, s)); };
  EXPECT_LT(local_loss(tape, batch, oracle, s, rng).value().item(), 1e-20);

  const LocalEpsFn zero = [&](const Var& ht, const std::vector<std::size_t>&, const Var&, const Var&, std::size_t) {
    return tape.constant(Tensor::zeros(ht.shape()));
  };
  double total = 0;
  const int reps = 400;
  for (int k = 0; k < reps; ++k) total += local_loss(tape, batch, zero, s, rng).value().item();
  EXPECT_NEAR(total / reps, double(n * c), 0.05 * n * c);

  const LocalBatch bad{random_tensor(rng, b * n, c), random_tensor(rng, b * n, c + 1), random_tensor(rng, b, 3), b};
  EXPECT_THROW(local_loss(tape, bad, zero, s, rng), sr::Error);
  const LocalBatch bad_z{random_tensor(rng, b * n, c), random_tensor(rng, b * n, c), random_tensor(rng, 3, 3), b};
  EXPECT_THROW(local_loss(tape, bad_z, zero, s, rng), sr::Error);
}

TEST(LocalLoss, JointRowPermutationInvariant) {
  Rng rng(9);
  const DdpmConfig c = toy_ddpm();
  const std::size_t n = 12, ch = 5;
  const LocalDenoiser model(c, 3, ch, {0.1, 0.1, 0.1, 0.9, 0.9}, rng);
  const LocalBatch batch{random_tensor(rng, n, ch), random_tensor(rng, n, ch), random_tensor(rng, 1, 3), 1};
  const Tensor eps = random_tensor(rng, n, ch);
  auto eval = [&](const LocalBatch& lb, const Tensor& noise) {
    Tape tape;
    const BoundParams p(tape, model.params(), false);
    const LocalEpsFn fn = [&](const Var& ht, const std::vector<std::size_t>& t, const Var& hc, const Var& z,
                              std::size_t bb) { return model.predict(p, ht, t, hc, z, bb); };
    return local_loss_at(tape, lb, fn, model.schedule(), {4}, noise).value().item();
  };
  const double base = eval(batch, eps);
  for (int k = 0; k < 10; ++k) {
    const auto perm = random_permutation(rng, n);
    const LocalBatch pb{permute_rows(batch.h_x, perm), permute_rows(batch.h_c, perm), batch.z_x0, 1};
    EXPECT_NEAR(eval(pb, permute_rows(eps, perm)), base, 1e-12 * std::max(1.0, base));
  }
}

TEST(LocalLoss, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  const DdpmConfig c = toy_ddpm();
  LocalDenoiser model(c, 3, 5, {0.05, 0.1, 0.2, 0.8, 1.2}, rng);
  const std::size_t b = 2, n = 6;
  const LocalBatch batch{random_tensor(rng, b * n, 5), random_tensor(rng, b * n, 5), random_tensor(rng, b, 3), b};
  auto run = [&](LocalDenoiser& m, Tape& tape, const BoundParams& p) {
    Rng shared(12);
    const LocalEpsFn fn = [&](const Var& ht, const std::vector<std::size_t>& t, const Var& hc, const Var& z,
                              std::size_t bb) { return m.predict(p, ht, t, hc, z, bb); };
    return local_loss(tape, batch, fn, m.schedule(), shared);
  };
  auto loss = [&](const std::vector<Tensor>& values) {
    LocalDenoiser m = model;
    m.params().assign(values);
    Tape tape;
    const BoundParams p(tape, m.params(), false);
    return run(m, tape, p).value().item();
  };
  Tape tape;
  const BoundParams p(tape, model.params(), true);
  const auto grads = p.gradients(tape.backward(run(model, tape, p)));
  const auto fd = sr::testing::central_differences(loss, model.params().values(), 1e-6);
  for (std::size_t k = 0; k < grads.size(); ++k)
    EXPECT_LT(sr::testing::relative_error(grads[k].to_vector(), fd[k]), 1e-3) << model.params().name(k);
}

TEST(LocalDenoiser, RowPermutationEquivariant) {
  Rng rng(13);
  for (std::size_t knn : {std::size_t{0}, std::size_t{3}}) {
    DdpmConfig c = toy_ddpm();
    c.condition_knn = knn;
    const LocalDenoiser model(c, 3, 5, {0.1, 0.1, 0.1, 1.0, 1.0}, rng);
    const Tensor ht = random_tensor(rng, 15, 5), hc = random_tensor(rng, 15, 5), z = random_tensor(rng, 1, 3);
    auto eval = [&](const Tensor& a, const Tensor& b) {
      Tape tape;
      const BoundParams p(tape, model.params(), false);
      return model.predict(p, tape.constant(a), {7}, tape.constant(b), tape.constant(z), 1).value();
    };
    const Tensor base = eval(ht, hc);
    for (int k = 0; k < 10; ++k) {
      const auto perm = random_permutation(rng, 15);
      const Tensor out = eval(permute_rows(ht, perm), permute_rows(hc, perm));
      const Tensor expect = permute_rows(base, perm);
      for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expect[i], 1e-12);
    }
  }
}

TEST(ConditionEdges, LayoutAndErrors) {
  // Three points on a line; k = 1 picks the nearest other point.
  const Tensor h({3, 3}, {0, 0, 0, 1, 0, 0, 3, 0, 0});
  const Tensor e = condition_edges(h, 1, 1);
  ASSERT_EQ(e.shape(), (Shape{3, 6}));
  EXPECT_EQ(e.at(0, 3), 1.0);
  EXPECT_EQ(e.at(1, 3), -1.0);
  EXPECT_EQ(e.at(2, 3), -2.0);
  EXPECT_THROW(condition_edges(h, 1, 3), sr::Error);
  EXPECT_THROW(condition_edges(h, 2, 1), sr::Error);
}

TEST(SkipPrediction, IsTheExactDenoiserForGaussianData) {
  // For x ~ N(c, V) the skip term alone minimizes the expected loss; any
  // rescaling of it does worse.
  Rng rng(14);
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.3);
  const std::vector<double> v{0.3, 2.0};
  const Tensor c({1, 2}, {0.5, -1.0});
  for (std::size_t t : {std::size_t{3}, std::size_t{25}}) {
    double loss[3] = {0, 0, 0};
    for (int k = 0; k < 20000; ++k) {
      const Tensor x({1, 2}, {c[0] + std::sqrt(v[0]) * rng.normal(), c[1] + std::sqrt(v[1]) * rng.normal()});
      const Tensor eps({1, 2}, rng.normal_vector(2));
      const Tensor xt = forward_diffuse(x, t, eps, s);
      const Tensor pred = skip_prediction(xt, c, {t}, v, s);
      const double scales[3] = {1.0, 0.8, 1.25};
      for (int j = 0; j < 3; ++j)
        for (std::size_t d = 0; d < 2; ++d) loss[j] += std::pow(scales[j] * pred[d] - eps[d], 2);
    }
    EXPECT_LT(loss[0], loss[1]);
    EXPECT_LT(loss[0], loss[2]);
  }
}

TEST(AncestralSample, SingleStepOracleRecoversX0) {
  Rng rng(15);
  const NoiseSchedule s = make_schedule(1, 0.07, 0.07);
  const Tensor x0 = random_tensor(rng, 4, 3), eps = random_tensor(rng, 4, 3);
  const Tensor xt = forward_diffuse(x0, 0, eps, s);
  const Tensor out = ancestral_sample(xt, [&](const Tensor&, std::size_t) { return eps; }, s, rng);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(out[i], x0[i], 1e-12);
}

TEST(AncestralSample, ZeroVarianceIsDeterministicGivenStart) {
  Rng rng(16);
  const NoiseSchedule s = make_schedule(20, 1e-3, 0.2);
  const Tensor xT = random_tensor(rng, 3, 2);
  const StepEpsFn fn = [](const Tensor& x, std::size_t t) {
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * x[i] + 0.01 * double(t);
    return Tensor(x.shape(), std::move(v));
  };
  Rng a(1), b(2);
  const Tensor ya = ancestral_sample(xT, fn, s, a, {.stochastic = false});
  const Tensor yb = ancestral_sample(xT, fn, s, b, {.stochastic = false});
  EXPECT_TRUE(ya.bitwise_equal(yb));
  Rng c(1), d(1);
  EXPECT_TRUE(ancestral_sample(xT, fn, s, c).bitwise_equal(ancestral_sample(xT, fn, s, d)));
}

TEST(ReverseSample, DeterministicAndShaped) {
  Rng rng(17);
  const DdpmConfig c = toy_ddpm();
  const GlobalDenoiser g(c, 3, {1, 1, 1}, rng);
  const LocalDenoiser l(c, 3, 5, {1, 1, 1, 1, 1}, rng);
  const std::vector<double> zc{0.1, -0.3, 0.7};
  Rng a(4), b(4);
  const auto za = reverse_sample_global(zc, g, a);
  EXPECT_EQ(za, reverse_sample_global(zc, g, b));
  EXPECT_EQ(za.size(), 3u);
  const Tensor hc = random_tensor(rng, 9, 5);
  const Tensor ha = reverse_sample_local(hc, za, l, a);
  EXPECT_TRUE(ha.bitwise_equal(reverse_sample_local(hc, za, l, b)));
  EXPECT_EQ(ha.shape(), (Shape{9, 5}));
  EXPECT_THROW(reverse_sample_global(std::vector<double>{1, 2}, g, a), sr::Error);
}

TEST(ReverseSample, TrainedToyModelMatchesDataStatistics) {
  // Latents ~ N(m, s^2) with a fixed condition c offset from m. The skip
  // variance is E[(x - c)^2] as in training, so the skip alone samples
  // N(c, (m - c)^2 + s^2) and matching the data needs the trained network.
  DdpmConfig c = toy_ddpm();
  c.steps = 50;
  c.beta_start = 1e-3;
  c.beta_end = 0.2;
  c.global_hidden = 32;
  c.time_dim = 16;
  Rng rng(18);
  const double m[2] = {1.0, -2.0}, sd[2] = {0.3, 0.5}, cond[2] = {0.5, -1.5};
  auto v = [&](int d) { return (m[d] - cond[d]) * (m[d] - cond[d]) + sd[d] * sd[d]; };
  GlobalDenoiser model(c, 2, {v(0), v(1)}, rng);
  std::vector<double> zc;
  for (int k = 0; k < 64; ++k) zc.insert(zc.end(), cond, cond + 2);
  const Tensor z_c({64, 2}, zc);
  AdamState adam({.learning_rate = 1e-3}, model.params().values());
  for (int step = 0; step < 4000; ++step) {
    std::vector<double> zx;
    for (int k = 0; k < 64; ++k)
      for (int d = 0; d < 2; ++d) zx.push_back(m[d] + sd[d] * rng.normal());
    const GlobalBatch batch{Tensor({64, 2}, std::move(zx)), z_c};
    Tape tape;
    const BoundParams p(tape, model.params(), true);
    const GlobalEpsFn fn = [&](const Var& zt, const std::vector<std::size_t>& t, const Var& zc) {
      return model.predict(p, zt, t, zc);
    };
    const Var loss = global_loss(tape, batch, fn, model.schedule(), rng);
    model.params().assign(adam.update(model.params().values(), p.gradients(tape.backward(loss))));
  }
  const std::size_t samples = 300;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  for (std::size_t k = 0; k < samples; ++k) {
    const auto z = reverse_sample_global(std::vector<double>{cond[0], cond[1]}, model, rng);
    for (int d = 0; d < 2; ++d) {
      sum[d] += z[d];
      sq[d] += z[d] * z[d];
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double mean = sum[d] / samples, std = std::sqrt(sq[d] / samples - mean * mean);
    EXPECT_LT(std::abs(mean - m[d]), 3.0 * sd[d] / std::sqrt(double(samples))) << d;
    EXPECT_LT(std::abs(std - sd[d]), 3.0 * sd[d] / std::sqrt(2.0 * samples)) << d;
  }
}

TEST(SkipVariance, MatchesDefinition) {
  Rng rng(19);
  std::vector<LatentPair> pairs;
  for (int k = 0; k < 3; ++k) {
    LatentPair l;
    l.z_x_mu = rng.normal_vector(2);
    l.z_x_logvar = rng.normal_vector(2);
    l.z_c = rng.normal_vector(2);
    l.h_x_mu = random_tensor(rng, 4, 3);
    l.h_x_logvar = random_tensor(rng, 4, 3);
    l.h_c = random_tensor(rng, 4, 3);
    pairs.push_back(l);
  }
  const auto vz = global_skip_variance(pairs);
  const auto vh = local_skip_variance(pairs);
  for (std::size_t d = 0; d < 2; ++d) {
    double s = 0;
    for (const auto& l : pairs) s += std::pow(l.z_x_mu[d] - l.z_c[d], 2) + std::exp(l.z_x_logvar[d]);
    EXPECT_NEAR(vz[d], s / 3, 1e-12);
  }
  for (std::size_t d = 0; d < 3; ++d) {
    double s = 0;
    for (const auto& l : pairs)
      for (std::size_t r = 0; r < 4; ++r)
        s += std::pow(l.h_x_mu.at(r, d) - l.h_c.at(r, d), 2) + std::exp(l.h_x_logvar.at(r, d));
    EXPECT_NEAR(vh[d], s / 12, 1e-12);
  }
}

TEST(EncodePairs, ReferenceRowsFollowTheInput) {
  const auto pairs = toy_pairs(20, 2, 16, 0.0);
  const auto vae = toy_vae(pairs, 16, 2);
  const auto lat = encode_pairs(pairs, vae, 2.0);
  // Zero jitter: the matched reference is the input itself, row for row.
  for (const auto& l : lat) {
    for (std::size_t i = 0; i < l.h_c.size(); ++i) EXPECT_NEAR(l.h_x_mu[i], l.h_c[i], 1e-12);
    for (std::size_t d = 0; d < l.z_c.size(); ++d) EXPECT_NEAR(l.z_x_mu[d], l.z_c[d], 1e-12);
  }
}

TEST(TrainDdpms, DeterministicWithCheckpointRoundTrip) {
  const auto pairs = toy_pairs(21, 6, 12, 0.05);
  const auto vae = toy_vae(pairs, 12, 3);
  const DdpmConfig c = toy_ddpm();
  Rng a(3), b(3);
  const DdpmTraining ta = train_ddpms(pairs, vae, c, a);
  const DdpmTraining tb = train_ddpms(pairs, vae, c, b);
  EXPECT_EQ(write_checkpoint(make_global_checkpoint(ta)), write_checkpoint(make_global_checkpoint(tb)));
  EXPECT_EQ(write_checkpoint(make_local_checkpoint(ta)), write_checkpoint(make_local_checkpoint(tb)));
  EXPECT_EQ(ta.epochs, 3u);
  EXPECT_EQ(ta.global_history.size(), 3u);

  const Checkpoint gk = read_checkpoint(write_checkpoint(make_global_checkpoint(ta)));
  const Checkpoint lk = read_checkpoint(write_checkpoint(make_local_checkpoint(ta)));
  EXPECT_EQ(gk.kind, ModelKind::kGlobalDdpm);
  EXPECT_EQ(lk.kind, ModelKind::kLocalDdpm);
  EXPECT_EQ(gk.config.get_u64("ddpm.steps"), 10u);
  const GlobalDenoiser g = load_global(gk, 3);
  const LocalDenoiser l = load_local(lk, 3, 5);
  EXPECT_TRUE(g.params().bitwise_equal(ta.global.params()));
  EXPECT_TRUE(l.params().bitwise_equal(ta.local.params()));
  EXPECT_EQ(g.skip_variance(), ta.global.skip_variance());
  EXPECT_EQ(l.skip_variance(), ta.local.skip_variance());

  EXPECT_THROW(load_global(gk, 4), sr::Error);
  EXPECT_THROW(load_local(lk, 4, 5), sr::Error);
  EXPECT_THROW(load_global(lk, 3), sr::Error);
  EXPECT_THROW(load_local(gk, 3, 5), sr::Error);

  Rng r1(8), r2(8);
  const PointCloud o1 = refine(pairs[0].input, vae, g, l, r1);
  const PointCloud o2 = refine(pairs[0].input, vae, ta.global, ta.local, r2);
  ASSERT_EQ(o1.size(), 12u);
  EXPECT_EQ(o1.frame, Frame::kStandardized);
  for (std::size_t i = 0; i < o1.size(); ++i) EXPECT_EQ(o1.points[i], o2.points[i]);
}

TEST(TrainDdpms, LossDecreasesAndSamplingBeatsUntrained) {
  const std::size_t n = 24;
  const auto pairs = toy_pairs(22, 24, n, 0.08);
  const auto vae = toy_vae(pairs, n, 60);
  DdpmConfig c = toy_ddpm();
  c.steps = 30;
  c.beta_start = 1e-3;
  c.beta_end = 0.3;
  c.global_hidden = 16;
  c.local_hidden = 16;
  c.condition_knn = 4;
  c.epochs = 150;
  c.batch_size = 4;
  Rng rng(6);
  const DdpmTraining trained = train_ddpms(pairs, vae, c, rng);
  auto window = [](const std::vector<double>& h, std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 15; ++i) s += h[i];
    return s;
  };
  EXPECT_LT(window(trained.local_history, 135), window(trained.local_history, 0));
  EXPECT_LT(window(trained.global_history, 135), window(trained.global_history, 0));

  // Untrained networks with the same skip variances.
  Rng init(9);
  const GlobalDenoiser g0(c, 3, trained.global.skip_variance(), init);
  const LocalDenoiser l0(c, 3, 5, trained.local.skip_variance(), init);
  const auto eval_pairs = toy_pairs(23, 20, n, 0.08);
  int wins = 0;
  for (const auto& p : eval_pairs) {
    const PointCloud target = sr::vae::reconstruct(p.reference, vae);
    Rng a(1), b(1);
    const double cd_trained = sr::metrics::chamfer(refine(p.input, vae, trained.global, trained.local, a), target);
    const double cd_untrained = sr::metrics::chamfer(refine(p.input, vae, g0, l0, b), target);
    wins += cd_trained < cd_untrained;
  }
  EXPECT_GE(wins, 14);
}

TEST(Refine, StageTags) {
  Rng rng(24);
  const auto pairs = toy_pairs(25, 2, 8, 0.05);
  const auto vae = toy_vae(pairs, 8, 1);
  const DdpmConfig c = toy_ddpm();
  const GlobalDenoiser g(c, 3, {1, 1, 1}, rng);
  const LocalDenoiser l(c, 3, 5, {1, 1, 1, 1, 1}, rng);
  PointCloud small = pairs[0].input;
  small.points.pop_back();
  try {
    refine(small, vae, g, l, rng);
    FAIL() << "expected an error";
  } catch (const sr::Error& e) {
    EXPECT_EQ(e.stage(), "encode");
  }
  const GlobalDenoiser wrong(c, 4, {1, 1, 1, 1}, rng);
  EXPECT_THROW(refine(pairs[0].input, vae, wrong, l, rng), sr::Error);
}
