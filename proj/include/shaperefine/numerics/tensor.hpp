#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shaperefine::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Immutable dense row-major array of doubles.
///
/// Copies share storage, so passing tensors by value is cheap. Every tensor
/// is checked on construction: the element count must match the shape and
/// all values must be finite.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::size_t dim(std::size_t axis) const;

  /// First dimension of a rank-2 tensor.
  std::size_t rows() const;
  /// Second dimension of a rank-2 tensor.
  std::size_t cols() const;

  std::span<const double> data() const noexcept { return *data_; }
  const double* raw() const noexcept { return data_->data(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const;

  /// Value of a single-element tensor.
  double item() const;

  std::vector<double> to_vector() const { return *data_; }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool bitwise_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

}  // namespace shaperefine::numerics
