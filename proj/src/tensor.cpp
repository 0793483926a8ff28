#include "ade/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ade {

namespace {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)),
      cols_(shape_.empty() ? 0 : shape_.back()),
      data_(shape_size(shape_), fill) {
  if (shape_.empty()) throw std::invalid_argument("tensor rank must be >= 1");
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape_));
  }
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (values.size() != t.size()) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(t.shape()));
  }
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(Shape{1});
  t.data_[0] = v;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("rows() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("cols() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::equals(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

}  // namespace ade
