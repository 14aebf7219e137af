#include "ssgdlab/tensor.hpp"

#include <cmath>
#include <string>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
  for (std::size_t d : shape_) {
    if (d == 0) {
      throw UsageError("tensor extents must be positive");
    }
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw UsageError("tensor data length does not match shape");
  }
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_size(shape) != data_.size()) {
    throw UsageError("reshape changes element count");
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) {
  for (double& x : data_) {
    x = v;
  }
}

void Tensor::scale(double c) {
  for (double& x : data_) {
    x *= c;
  }
}

void Tensor::add_scaled(const Tensor& other, double c) {
  if (!same_shape(other)) {
    throw UsageError("add_scaled shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += c * other.data_[i];
  }
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : data_) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

double Tensor::squared_l2() const {
  double s = 0.0;
  for (double x : data_) {
    s += x * x;
  }
  return s;
}

void Tensor::check_finite(std::string_view what) const {
  for (double x : data_) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite value in " + std::string(what));
    }
  }
}

}  // namespace ssgdlab
