#include "shaperefine/numerics/checkpoint.hpp"

#include <charconv>
#include <cstdio>

#include "shaperefine/binary_io.hpp"
#include "shaperefine/error.hpp"

namespace shaperefine::numerics {
namespace {
constexpr std::uint16_t kVersion = 1;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kVae:
      return "VAE";
    case ModelKind::kGlobalDdpm:
      return "GLOBAL_DDPM";
    case ModelKind::kLocalDdpm:
      return "LOCAL_DDPM";
  }
  return "UNKNOWN";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ConfigEcho::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(key, std::move(value));
}

void ConfigEcho::set(const std::string& key, double value) { set(key, format_double(value)); }
void ConfigEcho::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool ConfigEcho::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return true;
  return false;
}

const std::string& ConfigEcho::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw Error("config echo has no key '" + key + "'");
}

double ConfigEcho::get_double(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("config key '" + key + "' is not a number: " + s);
  return v;
}

std::uint64_t ConfigEcho::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error("config key '" + key + "' is not an unsigned integer: " + s);
  return v;
}

std::vector<std::uint8_t> write_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.magic("CKPT");
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(c.kind));
  w.u32(static_cast<std::uint32_t>(c.config.entries().size()));
  for (const auto& [k, v] : c.config.entries()) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(c.params.size()));
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Tensor& t = c.params[i];
    w.str(c.params.name(i));
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double x : t.data()) w.f64(x);
  }
  w.u64(c.epochs);
  w.u32(static_cast<std::uint32_t>(c.final_losses.size()));
  for (const auto& [k, v] : c.final_losses) {
    w.str(k);
    w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(c.histories.size()));
  for (const auto& [k, v] : c.histories) {
    w.str(k);
    w.u64(v.size());
    for (double x : v) w.f64(x);
  }
  return w.buffer();
}

Checkpoint read_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("CKPT");
  const auto version = r.u16();
  if (version != kVersion) throw Error(source + ": unsupported CKPT version " + std::to_string(version));
  Checkpoint c;
  const auto kind = r.u8();
  if (kind < 1 || kind > 3) throw Error(source + ": unknown model kind " + std::to_string(kind));
  c.kind = static_cast<ModelKind>(kind);
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string k = r.str();
    c.config.set(k, r.str());
  }
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t count = shape_size(shape);
    if (count > r.remaining() / 8) throw Error(source + ": parameter block " + name + " overruns the file");
    std::vector<double> data(count);
    for (double& x : data) x = r.f64();
    c.params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  c.epochs = r.u64();
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string k = r.str();
    c.final_losses.emplace_back(std::move(k), r.f64());
  }
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string k = r.str();
    const std::uint64_t len = r.u64();
    if (len > r.remaining() / 8) throw Error(source + ": history " + k + " overruns the file");
    std::vector<double> v(len);
    for (double& x : v) x = r.f64();
    c.histories.emplace_back(std::move(k), std::move(v));
  }
  r.expect_end();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ByteWriter w;
  const auto bytes = write_checkpoint(ckpt);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ByteReader r = ByteReader::load(path);
  std::vector<std::uint8_t> bytes(r.remaining());
  r.bytes(bytes.data(), bytes.size());
  return read_checkpoint(std::move(bytes), path.string());
}

void expect_kind(const Checkpoint& ckpt, ModelKind kind) {
  if (ckpt.kind != kind) {
    throw Error("checkpoint holds a " + std::string(model_kind_name(ckpt.kind)) + " model, expected " +
                std::string(model_kind_name(kind)));
  }
}

void load_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  if (ckpt.params.size() != params.size()) {
    throw Error("checkpoint has " + std::to_string(ckpt.params.size()) + " parameter blocks, model expects " +
                std::to_string(params.size()));
  }
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < params.size(); ++i) values.push_back(ckpt.params[ckpt.params.index_of(params.name(i))]);
  params.assign(std::move(values));
}

}  // namespace shaperefine::numerics
