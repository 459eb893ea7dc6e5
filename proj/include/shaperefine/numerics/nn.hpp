#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shaperefine/numerics/autodiff.hpp"
#include "shaperefine/numerics/rng.hpp"
#include "shaperefine/numerics/tensor.hpp"

namespace shaperefine::numerics {

/// Ordered, named collection of parameter tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return values_.size(); }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  std::size_t index_of(const std::string& name) const;
  std::size_t scalar_count() const;

  /// Replaces all values; shapes must match the current ones.
  void assign(std::vector<Tensor> values);

  bool bitwise_equal(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// A ParameterSet recorded onto a tape, either as gradient leaves or constants.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParameterSet& params, bool trainable);

  Var operator[](std::size_t i) const { return vars_[i]; }
  const std::vector<Var>& vars() const noexcept { return vars_; }

  /// Gradients for every parameter, in ParameterSet order.
  std::vector<Tensor> gradients(const Gradients& grads) const;

 private:
  std::vector<Var> vars_;
};

/// Affine layer y = x W + b, with W stored [in, out].
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) initialisation for weight and bias.
Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   double gain = 1.0);

Var apply(const BoundParams& p, const Linear& layer, const Var& x);

/// Sinusoidal embedding of integer timesteps, one row per entry of `steps`.
Tensor sinusoidal_embedding(const std::vector<std::size_t>& steps, std::size_t dim);

}  // namespace shaperefine::numerics
