#include "shaperefine/numerics/nn.hpp"

#include <cmath>
#include <cstring>

#include "shaperefine/error.hpp"

namespace shaperefine::numerics {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  for (const auto& n : names_)
    if (n == name) throw Error("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw Error("no parameter named " + name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void ParameterSet::assign(std::vector<Tensor> values) {
  if (values.size() != values_.size()) throw Error("parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != values_[i].shape()) {
      throw Error("shape mismatch for parameter " + names_[i] + ": expected " + shape_string(values_[i].shape()) +
                  ", got " + shape_string(values[i].shape()));
    }
  }
  values_ = std::move(values);
}

bool ParameterSet::bitwise_equal(const ParameterSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!values_[i].bitwise_equal(other.values_[i])) return false;
  return true;
}

BoundParams::BoundParams(Tape& tape, const ParameterSet& params, bool trainable) {
  vars_.reserve(params.size());
  for (const Tensor& t : params.values()) vars_.push_back(trainable ? tape.input(t) : tape.constant(t));
}

std::vector<Tensor> BoundParams::gradients(const Gradients& grads) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const Var& v : vars_) out.push_back(grads.of(v));
  return out;
}

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out), b(out);
  for (double& x : w) x = rng.uniform(-bound, bound);
  for (double& x : b) x = rng.uniform(-bound, bound);
  Linear layer;
  layer.in = in;
  layer.out = out;
  layer.weight = params.add(name + ".weight", Tensor({in, out}, std::move(w)));
  layer.bias = params.add(name + ".bias", Tensor({1, out}, std::move(b)));
  return layer;
}

Var apply(const BoundParams& p, const Linear& layer, const Var& x) {
  if (x.cols() != layer.in) {
    throw Error("linear layer expects " + std::to_string(layer.in) + " input features, got " +
                std::to_string(x.cols()));
  }
  return add(matmul(x, p[layer.weight]), p[layer.bias]);
}

Tensor sinusoidal_embedding(const std::vector<std::size_t>& steps, std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw Error("time embedding dimension must be even and >= 2");
  const std::size_t half = dim / 2;
  std::vector<double> out(steps.size() * dim);
  for (std::size_t r = 0; r < steps.size(); ++r) {
    const double t = static_cast<double>(steps[r]);
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      out[r * dim + k] = std::sin(t * freq);
      out[r * dim + half + k] = std::cos(t * freq);
    }
  }
  return Tensor({steps.size(), dim}, std::move(out));
}

}  // namespace shaperefine::numerics
