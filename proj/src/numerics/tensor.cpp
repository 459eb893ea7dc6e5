#include "shaperefine/numerics/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "shaperefine/error.hpp"

namespace shaperefine::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{0}, data_(std::make_shared<const std::vector<double>>()) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (shape_size(shape_) != data.size()) {
    throw Error("tensor shape " + shape_string(shape_) + " does not match " +
                std::to_string(data.size()) + " elements");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw Error("non-finite value in tensor of shape " + shape_string(shape_));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw Error("axis out of range for shape " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw Error("expected rank-2 tensor, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw Error("expected rank-2 tensor, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw Error("item() on tensor of shape " + shape_string(shape_));
  return (*data_)[0];
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(raw(), other.raw(), size() * sizeof(double)) == 0;
}

}  // namespace shaperefine::numerics
