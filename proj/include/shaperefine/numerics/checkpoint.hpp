#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shaperefine/numerics/nn.hpp"

namespace shaperefine::numerics {

enum class ModelKind : std::uint8_t { kVae = 1, kGlobalDdpm = 2, kLocalDdpm = 3 };

std::string_view model_kind_name(ModelKind kind);

/// Ordered key/value echo of a configuration. Doubles are written with 17
/// significant digits so they round-trip exactly.
class ConfigEcho {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) = delete;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  bool operator==(const ConfigEcho&) const = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double v);

struct Checkpoint {
  ModelKind kind = ModelKind::kVae;
  ConfigEcho config;
  ParameterSet params;
  std::uint64_t epochs = 0;
  std::vector<std::pair<std::string, double>> final_losses;
  /// Per-epoch loss histories.
  std::vector<std::pair<std::string, std::vector<double>>> histories;
};

std::vector<std::uint8_t> write_checkpoint(const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source = "buffer");
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws unless the checkpoint holds the expected model kind.
void expect_kind(const Checkpoint& ckpt, ModelKind kind);

/// Copies values by name into `params`; every name must be present with a
/// matching shape, and the checkpoint must hold no extra blocks.
void load_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace shaperefine::numerics
