#include "ssgdlab/gradient.hpp"

#include <cmath>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {

double LayerGrad::neuron_norm(std::size_t k) const {
  double s = 0.0;
  const std::size_t d = neuron_dim();
  for (std::size_t i = 0; i < d; ++i) {
    const double v = neuron_entry(k, i);
    s += v * v;
  }
  return std::sqrt(s);
}

bool GradientBundle::same_shape(const GradientBundle& other) const {
  if (layers.size() != other.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].mat.same_shape(other.layers[l].mat) ||
        layers[l].axis != other.layers[l].axis) {
      return false;
    }
  }
  return true;
}

void GradientBundle::scale(double c) {
  for (auto& layer : layers) {
    layer.mat.scale(c);
  }
}

void GradientBundle::add_scaled(const GradientBundle& other, double c) {
  if (!same_shape(other)) {
    throw UsageError("gradient bundle shape mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].mat.add_scaled(other.layers[l].mat, c);
  }
}

GradientBundle GradientBundle::scaled(double c) const {
  GradientBundle out = *this;
  out.scale(c);
  return out;
}

double GradientBundle::max_abs() const {
  double m = 0.0;
  for (const auto& layer : layers) {
    m = std::max(m, layer.mat.max_abs());
  }
  return m;
}

double GradientBundle::squared_l2() const {
  double s = 0.0;
  for (const auto& layer : layers) {
    s += layer.mat.squared_l2();
  }
  return s;
}

double GradientBundle::squared_distance(const GradientBundle& other) const {
  if (!same_shape(other)) {
    throw UsageError("gradient bundle shape mismatch");
  }
  double s = 0.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l].mat.values();
    const auto& b = other.layers[l].mat.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
  }
  return s;
}

double GradientBundle::dot(const GradientBundle& other) const {
  if (!same_shape(other)) {
    throw UsageError("gradient bundle shape mismatch");
  }
  double s = 0.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l].mat.values();
    const auto& b = other.layers[l].mat.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      s += a[i] * b[i];
    }
  }
  return s;
}

void GradientBundle::check_finite(std::string_view what) const {
  for (const auto& layer : layers) {
    layer.mat.check_finite(what);
  }
}

GradientBundle mean_of(std::span<const GradientBundle> bundles) {
  if (bundles.empty()) {
    throw UsageError("mean_of requires at least one bundle");
  }
  GradientBundle out = bundles[0];
  for (std::size_t j = 1; j < bundles.size(); ++j) {
    out.add_scaled(bundles[j], 1.0);
  }
  out.scale(1.0 / static_cast<double>(bundles.size()));
  return out;
}

}  // namespace ssgdlab
