#pragma once

#include <stdexcept>
#include <string>

namespace shaperefine {

/// Contract violation or runtime failure. `stage` names the pipeline stage
/// that raised it (empty for low-level errors).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string stage = {})
      : std::runtime_error(stage.empty() ? what : "[" + stage + "] " + what),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Re-throws the in-flight exception with a stage tag prepended.
[[noreturn]] inline void rethrow_with_stage(const std::string& stage) {
  try {
    throw;
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e.what(), stage);
  } catch (const std::exception& e) {
    throw Error(e.what(), stage);
  }
}

}  // namespace shaperefine
