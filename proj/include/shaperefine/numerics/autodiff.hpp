#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "shaperefine/numerics/tensor.hpp"

namespace shaperefine::numerics {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using GradBuffer = std::vector<double>;

/// Local gradient rule of a primitive. Receives dLoss/dOutput and must
/// *accumulate* into the input buffers; a null entry marks an input that
/// needs no gradient.
using BackwardFn = std::function<void(const GradBuffer& grad_out, std::span<GradBuffer* const> grad_in)>;

/// Result of a backward pass: dLoss/dX for every node that required one.
class Gradients {
 public:
  /// Gradient with respect to `v`; zeros if `v` was not reachable from the loss.
  Tensor of(const Var& v) const;

 private:
  friend class Tape;
  std::vector<GradBuffer> grads_;
  std::vector<Shape> shapes_;
};

/// Ordered record of primitive operations. Nodes are appended in execution
/// order, so the node list is always a topological order of the graph.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var input(Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Appends the result of a primitive op.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Reverse sweep from a scalar loss. Consumes the tape.
  Gradients backward(const Var& loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(const Var& v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Free-function form of Tape::backward.
inline Gradients backward(Tape& tape, const Var& loss) { return tape.backward(loss); }

// Primitive operations. Binary elementwise ops broadcast a [1,C], [R,1] or
// single-element operand against the other.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var broadcast_to(const Var& a, const Shape& shape);
Var reshape(const Var& a, const Shape& shape);
Var transpose(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// [R,C] -> [1,C]
Var sum_rows(const Var& a);
/// [R,C] -> [R,1]
Var sum_cols(const Var& a);
Var mean_cols(const Var& a);
/// Max over consecutive row groups: [G*n, C] -> [G, C].
Var segment_max(const Var& a, std::size_t groups);
/// Mean over consecutive row groups: [G*n, C] -> [G, C].
Var segment_mean(const Var& a, std::size_t groups);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var softplus(const Var& a);

/// out[i] = a[index[i]] (rows).
Var gather_rows(const Var& a, std::vector<std::size_t> index);
/// out[index[i]] += a[i] (rows), output has `rows` rows.
Var scatter_add_rows(const Var& a, std::vector<std::size_t> index, std::size_t rows);
/// Repeats each row of a [G,C] tensor n times: [G*n, C].
Var repeat_rows(const Var& a, std::size_t n);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}
/// Columns [begin, end) of a rank-2 tensor.
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);

inline Var square(const Var& a) { return mul(a, a); }

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

}  // namespace shaperefine::numerics
