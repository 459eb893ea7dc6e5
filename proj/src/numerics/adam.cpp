#include "shaperefine/numerics/adam.hpp"

#include <cmath>

#include "shaperefine/error.hpp"

namespace shaperefine::numerics {

AdamState::AdamState(AdamConfig config, const std::vector<Tensor>& params) : config_(config) {
  if (!(config.learning_rate > 0) || !(config.beta1 >= 0 && config.beta1 < 1) ||
      !(config.beta2 >= 0 && config.beta2 < 1) || !(config.epsilon > 0)) {
    throw Error("invalid Adam hyperparameters");
  }
  for (const Tensor& p : params) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
    shapes_.push_back(p.shape());
  }
}

std::vector<Tensor> AdamState::update(const std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != shapes_.size() || grads.size() != shapes_.size()) {
    throw Error("adam: expected " + std::to_string(shapes_.size()) + " parameters and gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != shapes_[i] || grads[i].shape() != shapes_[i]) {
      throw Error("adam: shape mismatch for parameter " + std::to_string(i) + ": state " +
                  shape_string(shapes_[i]) + ", param " + shape_string(params[i].shape()) + ", grad " +
                  shape_string(grads[i].shape()));
    }
  }
  // Tensors are finite by construction; this guards gradients built elsewhere.
  for (const Tensor& g : grads)
    for (double v : g.data())
      if (!std::isfinite(v)) throw Error("adam: non-finite gradient");

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));

  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& m = first_[i];
    std::vector<double>& v = second_[i];
    std::vector<double> p = params[i].to_vector();
    const double* g = grads[i].raw();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    out.emplace_back(shapes_[i], std::move(p));
  }
  return out;
}

}  // namespace shaperefine::numerics
