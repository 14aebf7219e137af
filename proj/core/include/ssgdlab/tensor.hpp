#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace ssgdlab {

/// Dense row-major array of 64-bit floats. The universal value carrier:
/// images, activations, parameters, and gradient matrices are all Tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors for the (rows, cols) matrices used throughout.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  void fill(double v);
  void scale(double c);
  /// this += c * other (shapes must match).
  void add_scaled(const Tensor& other, double c);

  double max_abs() const;
  double squared_l2() const;

  /// Throws NumericError naming `what` when any value is NaN or infinite.
  void check_finite(std::string_view what) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

}  // namespace ssgdlab
