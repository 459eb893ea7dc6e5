#include "shaperefine/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "shaperefine/error.hpp"

namespace shaperefine::pipeline {

namespace {

using numerics::ConfigEcho;

// Calls f(key, field) for every field in file order. Fields are size_t,
// uint64, double, string or a list of size_t.
template <typename Config, typename F>
void visit(Config& c, F&& f) {
  f("run.seed", c.seed);
  f("run.threads", c.threads);

  f("data.cases", c.cases);
  f("data.val_cases", c.val_cases);
  f("data.test_cases", c.test_cases);
  f("data.dir", c.dataset_dir);
  f("data.points_per_cloud", c.data.points_per_cloud);
  f("data.closing_radius", c.data.closing_radius);
  f("data.val_fraction", c.data.val_fraction);
  f("data.test_fraction", c.data.test_fraction);

  auto& t = c.data.tube;
  f("synth.tube.min_points", t.min_points);
  f("synth.tube.max_points", t.max_points);
  f("synth.tube.box_mm", t.box_mm);
  f("synth.tube.min_radius_mm", t.min_radius_mm);
  f("synth.tube.max_radius_mm", t.max_radius_mm);
  f("synth.tube.min_step_mm", t.min_step_mm);
  f("synth.tube.max_step_mm", t.max_step_mm);
  f("synth.tube.spacing_mm", t.spacing_mm);
  f("synth.tube.max_attempts", t.max_attempts);
  for (auto& level : c.data.severities) {
    const std::string p = "synth." + level.name + ".";
    auto& s = level.spec;
    f(p + "weight", level.weight);
    f(p + "deleted_segments", s.n_deleted_segments);
    f(p + "min_deleted_fraction", s.min_deleted_fraction);
    f(p + "max_deleted_fraction", s.max_deleted_fraction);
    f(p + "spurious_blobs", s.n_spurious_blobs);
    f(p + "min_blob_radius_mm", s.min_blob_radius_mm);
    f(p + "max_blob_radius_mm", s.max_blob_radius_mm);
    f(p + "min_blob_offset_mm", s.min_blob_offset_mm);
    f(p + "max_blob_offset_mm", s.max_blob_offset_mm);
    f(p + "jitter_sigma_mm", s.jitter_sigma_mm);
  }

  auto& v = c.vae;
  f("vae.n_points", v.n_points);
  f("vae.latent_dim", v.latent_dim);
  f("vae.local_features", v.local_features);
  f("vae.hidden", v.hidden);
  f("vae.obs_sigma", v.obs_sigma);
  f("vae.max_lambda_z", v.max_lambda_z);
  f("vae.max_lambda_h", v.max_lambda_h);
  f("vae.epochs", v.epochs);
  f("vae.warmup_fraction", v.warmup_fraction);
  f("vae.batch_size", v.batch_size);
  f("vae.learning_rate", v.learning_rate);

  auto& d = c.ddpm;
  f("ddpm.steps", d.steps);
  f("ddpm.beta_start", d.beta_start);
  f("ddpm.beta_end", d.beta_end);
  f("ddpm.time_dim", d.time_dim);
  f("ddpm.global_hidden", d.global_hidden);
  f("ddpm.global_blocks", d.global_blocks);
  f("ddpm.local_hidden", d.local_hidden);
  f("ddpm.condition_knn", d.condition_knn);
  f("ddpm.matching_exponent", d.matching_exponent);
  f("ddpm.epochs", d.epochs);
  f("ddpm.batch_size", d.batch_size);
  f("ddpm.learning_rate", d.learning_rate);

  auto& p = c.post;
  f("postprocess.mls_radius_mm", p.mls_radius_mm);
  f("postprocess.densify_gap_mm", p.densify_gap_mm);
  f("postprocess.densify_neighborhood", p.densify_neighborhood);
  f("postprocess.outlier_min_neighbors", p.outlier_min_neighbors);
  f("postprocess.outlier_radius_mm", p.outlier_radius_mm);

  f("eval.stratify_threshold_mm", c.stratify_threshold_mm);
  f("ablate.vae_epochs", c.ablate_epochs);
}

std::string to_text(const std::string& s) { return s; }
std::string to_text(double v) { return numerics::format_double(v); }
std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(int v) { return std::to_string(v); }
std::string to_text(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error("config key '" + key + "': cannot parse '" + std::string(text) + "'");
  return v;
}

void from_text(const std::string& key, const std::string& text, std::string& out) {
  (void)key;
  out = text;
}
void from_text(const std::string& key, const std::string& text, double& out) { out = parse_number<double>(key, text); }
void from_text(const std::string& key, const std::string& text, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(key, text);
}
void from_text(const std::string& key, const std::string& text, int& out) { out = parse_number<int>(key, text); }
void from_text(const std::string& key, const std::string& text, std::vector<std::size_t>& out) {
  out.clear();
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<std::uint64_t>(key, item));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_key(const std::string& full) {
  const auto dot = full.find('.');
  return {full.substr(0, dot), full.substr(dot + 1)};
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.threads < 1) throw Error("run.threads must be >= 1");
  if (c.cases < 10) throw Error("data.cases must be >= 10");
  if (c.data.points_per_cloud != c.vae.n_points)
    throw Error("data.points_per_cloud (" + std::to_string(c.data.points_per_cloud) + ") must equal vae.n_points (" +
                std::to_string(c.vae.n_points) + ")");
  vae::validate(c.vae);
  diffusion::validate(c.ddpm);
  postprocess::validate(c.post);
  synthdata::split_sizes(c.cases, dataset_options(c));
  if (!(c.stratify_threshold_mm > 0.0)) throw Error("eval.stratify_threshold_mm must be positive");
  if (c.ablate_epochs.empty()) throw Error("ablate.vae_epochs needs at least one entry");
  for (std::size_t e : c.ablate_epochs)
    if (e < 1) throw Error("ablate.vae_epochs entries must be >= 1");
}

synthdata::DatasetOptions dataset_options(const RunConfig& c) {
  synthdata::DatasetOptions o = c.data;
  if (c.val_cases) o.val_cases = c.val_cases;
  if (c.test_cases) o.test_cases = c.test_cases;
  o.threads = c.threads;
  return o;
}

ConfigEcho to_echo(const RunConfig& config) {
  ConfigEcho e;
  visit(config, [&](const std::string& key, const auto& field) { e.set(key, to_text(field)); });
  return e;
}

RunConfig run_config_from_echo(const ConfigEcho& echo) {
  RunConfig c;
  std::set<std::string> known;
  visit(c, [&](const std::string& key, auto& field) {
    known.insert(key);
    from_text(key, echo.get(key), field);
  });
  for (const auto& [key, value] : echo.entries())
    if (!known.count(key)) throw Error("unknown config key '" + key + "'");
  validate(c);
  return c;
}

std::string format_run_config(const RunConfig& config) {
  std::string out, section;
  const ConfigEcho echo = to_echo(config);
  for (const auto& [full, value] : echo.entries()) {
    const auto [sec, key] = split_key(full);
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key + " = " + value + "\n";
  }
  return out;
}

RunConfig parse_run_config(std::string_view text, const RunConfig& base) {
  const ConfigEcho base_echo = to_echo(base);
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : base_echo.entries()) values[k] = v;
  std::set<std::string> seen;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(where + "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw Error(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + "expected 'key = value'");
    if (section.empty()) throw Error(where + "key outside any section");
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    if (!values.count(key)) throw Error(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(where + "duplicate key '" + key + "'");
    values[key] = trim(std::string_view(line).substr(eq + 1));
  }
  ConfigEcho echo;
  for (const auto& [k, v] : base_echo.entries()) echo.set(k, values[k]);
  return run_config_from_echo(echo);
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str(), base);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << format_run_config(config);
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace shaperefine::pipeline
