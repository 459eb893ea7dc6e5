#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "shaperefine/error.hpp"
#include "shaperefine/pipeline/config.hpp"
#include "shaperefine/pipeline/run.hpp"

namespace fs = std::filesystem;
using namespace shaperefine;
using namespace shaperefine::pipeline;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> cases;
  std::optional<std::size_t> threads;
  bool svg = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "overrides run.seed");
  cmd->add_option("--out", f.out, "run directory")->capture_default_str();
  cmd->add_option("--cases", f.cases, "overrides data.cases");
  cmd->add_option("--device-threads", f.threads, "overrides run.threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--svg", f.svg, "also write cd_scatter.svg (eval)");
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.cases) c.cases = *f.cases;
  if (f.threads) c.threads = *f.threads;
  validate(c);
  return c;
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

void print_summary(const EvalSummary& s) {
  std::printf("%-6s %5s %12s %12s %12s %12s %8s %8s %10s %10s\n", "stratum", "n", "init CD", "refined CD",
              "init HD", "refined HD", "dCD %", "dHD %", "p CD", "p HD");
  auto p = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("degenerate"); };
  for (const auto& r : s.strata)
    std::printf("%-6s %5zu %12.3f %12.3f %12.3f %12.3f %8.1f %8.1f %10s %10s\n", r.stratum.c_str(), r.count,
                r.init_cd.mean, r.refined_cd.mean, r.init_hd.mean, r.refined_hd.mean, r.cd_improvement_pct,
                r.hd_improvement_pct, p(r.cd_p).c_str(), p(r.hd_p).c_str());
}

int run(const std::string& command, const Flags& flags) {
  const RunConfig config = resolve(flags);
  const RunPaths paths(flags.out, config);
  fs::create_directories(paths.root);
  save_run_config(paths.resolved_config(), config);
  std::cerr << "# " << command << " seed=" << config.seed << " out=" << paths.root.string() << "\n"
            << format_run_config(config) << std::flush;

  if (command == "synth") {
    const auto ds = run_synth(config, paths);
    std::printf("wrote %zu cases to %s\n", ds.cases.size(), paths.dataset().string().c_str());
    return 0;
  }
  const auto ds = open_dataset(paths);
  if (command == "train-vae") {
    run_train_vae(config, ds, paths, log_line);
    std::printf("wrote %s\n", paths.vae_checkpoint().string().c_str());
  } else if (command == "train-ddpm") {
    const auto vae = load_run_vae(config, paths);
    run_train_ddpm(config, ds, vae, paths, log_line);
    std::printf("wrote %s and %s\n", paths.global_checkpoint().string().c_str(),
                paths.local_checkpoint().string().c_str());
  } else if (command == "refine") {
    const auto vae = load_run_vae(config, paths);
    run_refine(config, ds, vae, load_run_ddpms(config, paths), paths, log_line);
    std::printf("wrote refined clouds to %s\n", paths.refined().string().c_str());
  } else if (command == "eval") {
    print_summary(run_eval(config, ds, paths, flags.svg).summary);
  } else if (command == "ablate-kl") {
    std::printf("%10s %16s %16s %16s\n", "vae epochs", "F1 %", "CD mm", "HD mm");
    for (const auto& r : run_ablate_kl(config, ds, paths, log_line))
      std::printf("%10zu %8.2f +- %5.2f %8.3f +- %5.3f %8.3f +- %5.3f\n", r.epochs, r.f1.mean, r.f1.std, r.cd.mean,
                  r.cd.std, r.hd.mean, r.hd.std);
  } else if (command == "bench") {
    const auto vae = load_run_vae(config, paths);
    std::printf("%-16s %12s %12s\n", "stage", "mean s", "std s");
    for (const auto& r : run_bench(config, ds, vae, load_run_ddpms(config, paths), paths))
      std::printf("%-16s %12.4f %12.4f\n", r.stage.c_str(), r.seconds.mean, r.seconds.std);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud shape refinement with latent diffusion"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate the synthetic dataset"},
      {"train-vae", "train the hierarchical VAE"},
      {"train-ddpm", "train the global and local denoisers"},
      {"refine", "refine every test case"},
      {"eval", "score refined cases, write per_case.csv and summary.csv"},
      {"ablate-kl", "compare VAE training lengths by reconstruction quality"},
      {"bench", "time each refinement stage"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);
  CLI11_PARSE(app, argc, argv);
  try {
    return run(app.get_subcommands().front()->get_name(), flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
