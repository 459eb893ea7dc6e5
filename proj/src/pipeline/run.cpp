#include "shaperefine/pipeline/run.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/io.hpp"
#include "shaperefine/geometry/standardize.hpp"
#include "shaperefine/numerics/rng.hpp"
#include "shaperefine/postprocess/postprocess.hpp"

namespace shaperefine::pipeline {

namespace fs = std::filesystem;
using geometry::PointCloud;
using numerics::Rng;

RunPaths::RunPaths(fs::path out, const RunConfig& config)
    : root(std::move(out)), dataset_override(config.dataset_dir) {}

fs::path RunPaths::dataset() const { return dataset_override.empty() ? root / "dataset" : dataset_override; }

fs::path RunPaths::decoded_cloud(const std::string& case_id) const { return refined() / (case_id + ".raw.pcld"); }

fs::path RunPaths::refined_cloud(const std::string& case_id) const { return refined() / (case_id + ".pcld"); }

std::uint64_t stream_seed(const RunConfig& config, Stream stream) {
  return numerics::derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

namespace {

void emit(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Runs f(i) for i in [0, n) on `threads` workers. The first failure by index
// is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < k; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<const synthdata::CaseRecord*> test_cases(const synthdata::Dataset& ds) {
  auto cases = synthdata::cases_in(ds, synthdata::Split::kTest);
  if (cases.empty()) throw Error("dataset has no test cases");
  return cases;
}

}  // namespace

synthdata::Dataset run_synth(const RunConfig& config, const RunPaths& paths) {
  fs::create_directories(paths.dataset());
  return synthdata::make_dataset(config.cases, dataset_options(config), config.seed, paths.dataset());
}

synthdata::Dataset open_dataset(const RunPaths& paths) {
  if (!fs::exists(paths.dataset() / "splits.csv"))
    throw Error("no dataset at " + paths.dataset().string() + "; run `synth` first");
  return synthdata::load_dataset(paths.dataset());
}

std::vector<PointCloud> vae_training_shapes(const synthdata::Dataset& ds) {
  std::vector<PointCloud> shapes;
  for (const auto* c : synthdata::cases_in(ds, synthdata::Split::kTrain)) {
    shapes.push_back(geometry::standardize(c->ref, ds.stats));
    shapes.push_back(geometry::standardize(c->sub, ds.stats));
  }
  return shapes;
}

std::vector<diffusion::ShapePair> ddpm_training_pairs(const synthdata::Dataset& ds) {
  std::vector<diffusion::ShapePair> pairs;
  for (const auto* c : synthdata::cases_in(ds, synthdata::Split::kTrain))
    pairs.push_back({geometry::standardize(c->ref, ds.stats), geometry::standardize(c->sub, ds.stats)});
  return pairs;
}

vae::VaeModel run_train_vae(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths,
                            const Log& log) {
  const auto shapes = vae_training_shapes(ds);
  Rng rng(stream_seed(config, Stream::kVae));
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = vae::train_vae(shapes, config.vae, rng, [&](std::size_t epoch, double total, double recon) {
    if ((epoch + 1) % 25 == 0 || epoch + 1 == config.vae.epochs)
      emit(log, "vae epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.vae.epochs) + " loss " +
                    fixed(total, 4) + " mse " + fixed(recon, 6) + " (" + fixed(seconds_since(t0), 0) + " s)");
  });
  fs::create_directories(paths.checkpoints());
  numerics::save_checkpoint(vae::make_checkpoint(trained), paths.vae_checkpoint());
  return std::move(trained.model);
}

vae::VaeModel load_run_vae(const RunConfig& config, const RunPaths& paths) {
  if (!fs::exists(paths.vae_checkpoint()))
    throw Error("no VAE checkpoint at " + paths.vae_checkpoint().string() + "; run `train-vae` first");
  vae::VaeModel model = vae::load_vae(numerics::load_checkpoint(paths.vae_checkpoint()));
  const auto& have = model.config();
  const auto& want = config.vae;
  auto check = [&](const char* name, std::size_t a, std::size_t b) {
    if (a != b)
      throw Error(std::string("VAE checkpoint has ") + name + " = " + std::to_string(a) + " but the configured " +
                  name + " is " + std::to_string(b));
  };
  check("D_z", have.latent_dim, want.latent_dim);
  check("D_h", have.local_features, want.local_features);
  check("N", have.n_points, want.n_points);
  check("hidden", have.hidden, want.hidden);
  return model;
}

Denoisers run_train_ddpm(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                         const RunPaths& paths, const Log& log) {
  const auto pairs = ddpm_training_pairs(ds);
  Rng rng(stream_seed(config, Stream::kDdpm));
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = diffusion::train_ddpms(pairs, vae, config.ddpm, rng, [&](std::size_t epoch, double g, double l) {
    if ((epoch + 1) % 25 == 0 || epoch + 1 == config.ddpm.epochs)
      emit(log, "ddpm epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.ddpm.epochs) + " global " +
                    fixed(g, 4) + " local " + fixed(l, 3) + " (" + fixed(seconds_since(t0), 0) + " s)");
  });
  fs::create_directories(paths.checkpoints());
  numerics::save_checkpoint(diffusion::make_global_checkpoint(trained), paths.global_checkpoint());
  numerics::save_checkpoint(diffusion::make_local_checkpoint(trained), paths.local_checkpoint());
  return {std::move(trained.global), std::move(trained.local)};
}

Denoisers load_run_ddpms(const RunConfig& config, const RunPaths& paths) {
  for (const auto& p : {paths.global_checkpoint(), paths.local_checkpoint()})
    if (!fs::exists(p)) throw Error("no DDPM checkpoint at " + p.string() + "; run `train-ddpm` first");
  const std::size_t dz = config.vae.latent_dim;
  return {diffusion::load_global(numerics::load_checkpoint(paths.global_checkpoint()), dz),
          diffusion::load_local(numerics::load_checkpoint(paths.local_checkpoint()), dz,
                                3 + config.vae.local_features)};
}

void run_refine(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                const Denoisers& ddpms, const RunPaths& paths, const Log& log) {
  const auto cases = test_cases(ds);
  fs::create_directories(paths.refined());
  const std::uint64_t base = stream_seed(config, Stream::kRefine);
  std::mutex log_mutex;
  std::atomic<std::size_t> done{0};
  parallel_for(cases.size(), config.threads, [&](std::size_t i) {
    const auto& c = *cases[i];
    Rng rng(numerics::derive_seed(base, i));
    PointCloud out;
    try {
      out = diffusion::refine(geometry::standardize(c.sub, ds.stats), vae, ddpms.global, ddpms.local, rng);
    } catch (const Error& e) {
      throw Error("case " + c.id + ": " + e.what());
    }
    geometry::save_cloud(paths.decoded_cloud(c.id), geometry::destandardize(out, ds.stats));
    const PointCloud post = postprocess::postprocess(out, ds.stats, config.post);
    if (post.empty()) throw Error("case " + c.id + ": outlier removal dropped every point", "postprocess");
    geometry::save_cloud(paths.refined_cloud(c.id), post);
    const std::size_t n = ++done;
    if (log && (n % 10 == 0 || n == cases.size())) {
      std::lock_guard lock(log_mutex);
      log("refined " + std::to_string(n) + "/" + std::to_string(cases.size()));
    }
  });
}

EvalResult run_eval(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths, bool svg) {
  const auto cases = test_cases(ds);
  EvalResult result;
  result.rows.resize(cases.size());
  parallel_for(cases.size(), config.threads, [&](std::size_t i) {
    const auto& c = *cases[i];
    const fs::path p = paths.refined_cloud(c.id);
    if (!fs::exists(p)) throw Error("no refined cloud for case " + c.id + "; run `refine` first");
    const PointCloud refined = geometry::load_cloud(p);
    metrics::CaseMetrics& m = result.rows[i];
    m.case_id = c.id;
    m.split = std::string(synthdata::split_name(c.split));
    m.init_cd = metrics::chamfer(c.sub, c.ref);
    m.init_hd = metrics::hausdorff(c.sub, c.ref);
    m.refined_cd = metrics::chamfer(refined, c.ref);
    m.refined_hd = metrics::hausdorff(refined, c.ref);
    m.stratum = stratify(m.init_cd, config.stratify_threshold_mm);
  });
  result.summary = summarize(result.rows);
  fs::create_directories(paths.root);
  metrics::write_case_report(paths.per_case(), result.rows);
  write_summary_csv(paths.summary(), result.summary);
  if (svg) write_cd_scatter_svg(paths.scatter_svg(), result.rows);
  return result;
}

std::vector<AblationRow> run_ablate_kl(const RunConfig& config, const synthdata::Dataset& ds, const RunPaths& paths,
                                       const Log& log) {
  const auto shapes = vae_training_shapes(ds);
  const auto cases = test_cases(ds);
  const std::uint64_t base = stream_seed(config, Stream::kAblate);
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < config.ablate_epochs.size(); ++k) {
    vae::VaeConfig vc = config.vae;
    vc.epochs = config.ablate_epochs[k];
    Rng rng(numerics::derive_seed(base, k));
    emit(log, "ablate-kl: training VAE for " + std::to_string(vc.epochs) + " epochs");
    const auto trained = vae::train_vae(shapes, vc, rng);
    std::vector<double> f1(cases.size()), cd(cases.size()), hd(cases.size());
    parallel_for(cases.size(), config.threads, [&](std::size_t i) {
      const auto& ref = cases[i]->ref;
      const PointCloud rec =
          geometry::destandardize(vae::reconstruct(geometry::standardize(ref, ds.stats), trained.model), ds.stats);
      f1[i] = metrics::f1_at_tau(rec, ref, metrics::default_f1_tau(ref)).f1;
      cd[i] = metrics::chamfer(rec, ref);
      hd[i] = metrics::hausdorff(rec, ref);
    });
    rows.push_back({vc.epochs, describe(f1), describe(cd), describe(hd)});
  }
  fs::create_directories(paths.root);
  std::ofstream out(paths.ablation(), std::ios::binary);
  if (!out) throw Error("cannot open " + paths.ablation().string() + " for writing");
  out << "vae_epochs,f1_mean,f1_std,cd_mean,cd_std,hd_mean,hd_std\n";
  for (const auto& r : rows)
    out << r.epochs << ',' << numerics::format_double(r.f1.mean) << ',' << numerics::format_double(r.f1.std) << ','
        << numerics::format_double(r.cd.mean) << ',' << numerics::format_double(r.cd.std) << ','
        << numerics::format_double(r.hd.mean) << ',' << numerics::format_double(r.hd.std) << '\n';
  if (!out) throw Error("write failed for " + paths.ablation().string());
  return rows;
}

std::vector<BenchRow> run_bench(const RunConfig& config, const synthdata::Dataset& ds, const vae::VaeModel& vae,
                                const Denoisers& ddpms, const RunPaths& paths) {
  const auto cases = test_cases(ds);
  const std::vector<std::string> stages{"encode", "global_reverse", "local_reverse", "decode", "postprocess", "total"};
  std::vector<std::vector<double>> times(stages.size(), std::vector<double>(cases.size()));
  const std::uint64_t base = stream_seed(config, Stream::kRefine);
  // Sequential, so the timings are not skewed by contention.
  for (std::size_t i = 0; i < cases.size(); ++i) {
    Rng rng(numerics::derive_seed(base, i));
    const PointCloud s = geometry::standardize(cases[i]->sub, ds.stats);
    const auto start = std::chrono::steady_clock::now();
    auto t = start;
    auto lap = [&](std::size_t stage) {
      const auto now = std::chrono::steady_clock::now();
      times[stage][i] = std::chrono::duration<double>(now - t).count();
      t = now;
    };
    Rng encode_rng(0);
    const auto g = vae::encode_global(s, vae, encode_rng);
    const auto l = vae::encode_local(s, g.mu, vae, encode_rng);
    lap(0);
    const auto z = diffusion::reverse_sample_global(g.mu, ddpms.global, rng);
    lap(1);
    const auto h = diffusion::reverse_sample_local(l.mu, z, ddpms.local, rng);
    lap(2);
    const PointCloud out = vae::decode(z, h, vae);
    lap(3);
    (void)postprocess::postprocess(out, ds.stats, config.post);
    lap(4);
    times[5][i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  std::vector<BenchRow> rows;
  for (std::size_t k = 0; k < stages.size(); ++k) rows.push_back({stages[k], describe(times[k])});
  fs::create_directories(paths.root);
  std::ofstream out(paths.bench(), std::ios::binary);
  if (!out) throw Error("cannot open " + paths.bench().string() + " for writing");
  out << "stage,cases,mean_s,std_s,median_s\n";
  for (const auto& r : rows)
    out << r.stage << ',' << cases.size() << ',' << numerics::format_double(r.seconds.mean) << ','
        << numerics::format_double(r.seconds.std) << ',' << numerics::format_double(r.seconds.median) << '\n';
  if (!out) throw Error("write failed for " + paths.bench().string());
  return rows;
}

}  // namespace shaperefine::pipeline
