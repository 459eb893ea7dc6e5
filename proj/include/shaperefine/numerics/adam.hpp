#pragma once

#include <cstdint>
#include <vector>

#include "shaperefine/numerics/tensor.hpp"

namespace shaperefine::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for bias-corrected Adam.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<Tensor>& params);

  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step() const noexcept { return step_; }

  /// Advances the state one step and returns the updated parameters.
  std::vector<Tensor> update(const std::vector<Tensor>& params, const std::vector<Tensor>& grads);

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::vector<Shape> shapes_;
  std::uint64_t step_ = 0;
};

inline std::vector<Tensor> adam_step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                                     AdamState& state) {
  return state.update(params, grads);
}

}  // namespace shaperefine::numerics
