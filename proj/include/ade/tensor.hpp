#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ade {

using Shape = std::vector<std::size_t>;

// Boolean mask; 1 = real position, 0 = padding/excluded.
using Mask = std::vector<std::uint8_t>;

inline std::size_t mask_count(const Mask& m) {
  std::size_t c = 0;
  for (auto b : m) c += (b != 0);
  return c;
}

// Dense row-major tensor of doubles. Rank 1 values are vectors, rank 2
// matrices; scalars are represented as shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double* begin() { return data_.data(); }
  double* end() { return data_.data() + data_.size(); }
  const double* begin() const { return data_.data(); }
  const double* end() const { return data_.data() + data_.size(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // Exact elementwise equality (shape and bit pattern of every value).
  bool equals(const Tensor& other) const;

 private:
  Shape shape_;
  std::size_t cols_ = 0;  // stride of the last axis for rank-2 indexing
  std::vector<double> data_;
};

std::string shape_str(const Shape& shape);

}  // namespace ade
