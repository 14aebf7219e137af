#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssgdlab/gradient.hpp"

namespace ssgdlab {

enum class LayerKind : std::uint8_t {
  FullyConnected,
  Conv2d,
  AvgPool,
  MaxPool,
  Relu,
  Sigmoid,
  Flatten,
};

enum class LossKind : std::uint8_t { Square, SoftmaxCrossEntropy };

/// Geometry of one layer. Pooling and activation layers carry no parameters.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  // fully-connected
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool has_bias = true;
  // conv2d (valid padding, stride 1) and pooling
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;

  static LayerSpec fully_connected(std::size_t in, std::size_t out,
                                   bool bias = true);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch,
                          std::size_t kernel);
  static LayerSpec avg_pool(std::size_t kernel, std::size_t stride);
  static LayerSpec max_pool(std::size_t kernel, std::size_t stride);
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec flatten();

  bool parameterized() const {
    return kind == LayerKind::FullyConnected || kind == LayerKind::Conv2d;
  }
  NeuronAxis neuron_axis() const {
    return kind == LayerKind::Conv2d ? NeuronAxis::Row : NeuronAxis::Column;
  }
};

/// Immutable network architecture: input shape, layer chain, loss kind.
/// The constructor validates that adjacent layers have compatible shapes.
class Network {
 public:
  Network(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers,
          LossKind loss);

  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  LossKind loss() const { return loss_; }

  /// Output shape of layer l (without the batch dimension).
  const std::vector<std::size_t>& output_shape(std::size_t l) const {
    return output_shapes_[l];
  }
  std::size_t input_size() const { return shape_size(input_shape_); }
  /// Network output dimension C (the final layer must produce a vector).
  std::size_t output_dim() const;

  /// Indices of parameterized layers, in definition order.
  const std::vector<std::size_t>& parameterized_layers() const {
    return param_layers_;
  }

  /// Dimensions of layer l's gradient/parameter matrix in bundle layout:
  /// fully-connected (fan_in [+1], fan_out) with columns as neurons,
  /// conv (out_channels, in_channels*k*k + 1) with rows as neurons.
  std::pair<std::size_t, std::size_t> grad_matrix_dims(std::size_t l) const;

  /// Plain MLP: dims = {784, 128, 10} gives fc+relu+fc...+fc. The final
  /// layer has no activation; hidden layers use relu.
  static Network mlp(const std::vector<std::size_t>& dims, LossKind loss,
                     bool bias = true);

  /// The LeNet-5 variant used by the experiments: two conv+relu+avgpool
  /// stages, then 256-120-84-10 fully-connected layers with relu.
  static Network lenet5();

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<LayerSpec> layers_;
  LossKind loss_;
  std::vector<std::vector<std::size_t>> output_shapes_;
  std::vector<std::size_t> param_layers_;
};

std::string to_string(LayerKind kind);

}  // namespace ssgdlab
