#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssgdlab/tensor.hpp"

namespace ssgdlab {

/// Which axis of a layer's gradient matrix holds one neuron's gradient:
/// columns for fully-connected layers, rows for convolution kernels.
/// The axis is a property of the layer kind, never of the data.
enum class NeuronAxis { Column, Row };

struct LayerGrad {
  Tensor mat;       // (rows, cols); bias folded in as an extra row/column
  NeuronAxis axis;  // which axis indexes neurons

  std::size_t neuron_count() const {
    return axis == NeuronAxis::Column ? mat.cols() : mat.rows();
  }
  std::size_t neuron_dim() const {
    return axis == NeuronAxis::Column ? mat.rows() : mat.cols();
  }
  double neuron_entry(std::size_t k, std::size_t i) const {
    return axis == NeuronAxis::Column ? mat.at(i, k) : mat.at(k, i);
  }
  double& neuron_entry(std::size_t k, std::size_t i) {
    return axis == NeuronAxis::Column ? mat.at(i, k) : mat.at(k, i);
  }
  double neuron_norm(std::size_t k) const;
};

/// Per-layer gradient matrices with the neuron axis annotated. Shapes mirror
/// the ParameterSet exactly (weights plus folded bias).
struct GradientBundle {
  std::vector<LayerGrad> layers;

  bool same_shape(const GradientBundle& other) const;
  void scale(double c);
  void add_scaled(const GradientBundle& other, double c);
  GradientBundle scaled(double c) const;
  double max_abs() const;
  double squared_l2() const;
  /// Sum over all layers of squared entrywise differences.
  double squared_distance(const GradientBundle& other) const;
  double dot(const GradientBundle& other) const;
  void check_finite(std::string_view what) const;
};

/// Entrywise mean of m same-shaped bundles, summed in index order so the
/// result is bit-reproducible. Throws UsageError on shape mismatch or m = 0.
GradientBundle mean_of(std::span<const GradientBundle> bundles);

}  // namespace ssgdlab
