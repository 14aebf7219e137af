#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/rng.hpp"
#include "ssgdlab/tensor.hpp"

namespace ssgdlab {

struct Sample {
  Tensor input;   // pixel values in [0, 1]
  int label = 0;  // class index in [0, C)
};

/// A stacked mini-batch with targets resolved against a network's loss:
/// one-hot rows for classification, the raw label value for 1-d square loss.
struct Batch {
  Tensor inputs;   // (B, input shape...)
  Tensor targets;  // (B, C)
  std::vector<int> labels;
};

/// Layered parameters θ = {W^i, b^i} for the parameterized layers of a
/// network, in definition order. Mutation is tracked with a stamp so that a
/// ForwardTrace can detect that its parameters changed underneath it.
class ParameterSet {
 public:
  struct LayerParams {
    Tensor weights;
    Tensor bias;  // empty when the layer has no bias
  };

  ParameterSet() = default;
  explicit ParameterSet(std::vector<LayerParams> layers);

  std::size_t layer_count() const { return layers_.size(); }
  const LayerParams& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access; advances the stamp.
  LayerParams& mutable_layer(std::size_t i);

  std::uint64_t stamp() const { return stamp_; }

  bool bit_identical(const ParameterSet& other) const;

 private:
  std::vector<LayerParams> layers_;
  std::uint64_t stamp_ = 0;
};

/// Everything captured during a forward pass: per-layer activations, relu
/// activation patterns D^i, max-pool selections, the output logits, and the
/// loss vector ḡ = ∂(mean loss)/∂logits for the batch targets.
struct ForwardTrace {
  std::uint64_t params_stamp = 0;
  std::size_t batch = 0;
  Tensor input;                  // (B, input shape...)
  std::vector<Tensor> outputs;   // per layer: (B, output shape...)
  std::vector<Tensor> relu_mask; // per layer; nonempty only for relu layers
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // max-pool layers
  Tensor logits;    // (B, C)
  Tensor targets;   // (B, C)
  Tensor loss_grad; // ḡ: (B, C)
  double loss = 0.0;

  const Tensor& input_of(std::size_t layer) const {
    return layer == 0 ? input : outputs[layer - 1];
  }
};

Batch make_batch(const Network& net, std::span<const Sample> samples);

/// One-hot rows for classification; for a 1-d output with square loss the
/// target is the label value itself (the single-neuron regression setting).
Tensor make_targets(const Network& net, std::span<const int> labels);

ForwardTrace forward(const Network& net, const ParameterSet& params,
                     const Batch& batch);

/// Forward pass against explicit targets: soft label distributions for the
/// gradient-matching attack, or real-valued targets for the single-neuron
/// analysis. `targets` must be (B, C).
ForwardTrace forward_targets(const Network& net, const ParameterSet& params,
                             const Tensor& inputs, const Tensor& targets);

/// Mean loss of a prediction matrix (B, C) against class labels.
double loss_value(const Tensor& predictions, std::span<const int> labels,
                  LossKind kind);
double loss_value_targets(const Tensor& predictions, const Tensor& targets,
                          LossKind kind);

Tensor softmax_rows(const Tensor& logits);

/// The sigmoid used by sigmoid layers (shared so that closed-form gradient
/// formulas reproduce backward() bit for bit).
double sigmoid_value(double x);

/// Backpropagation through the traced forward pass. Returns the gradient of
/// the mean batch loss in bundle layout (bias folded per layer). When
/// `input_grad` is given it also receives ∂loss/∂input. Throws UsageError if
/// the parameters were mutated after the trace was captured.
GradientBundle backward(const Network& net, const ParameterSet& params,
                        const ForwardTrace& trace,
                        Tensor* input_grad = nullptr);

/// Central-difference gradient oracle: (ℓ(θ+h e_j) − ℓ(θ−h e_j)) / 2h for
/// every parameter. Independent of the backpropagation path.
GradientBundle finite_difference_gradient(const Network& net,
                                          const ParameterSet& params,
                                          const Batch& batch, double h);

/// Glorot-uniform weights, zero biases; deterministic under the seed.
ParameterSet init_parameters(const Network& net, Rng rng);

/// θ ← θ + c · delta, with delta in bundle layout.
void apply_delta(const Network& net, ParameterSet& params,
                 const GradientBundle& delta, double c);

GradientBundle zero_bundle(const Network& net);

/// Parameters in bundle layout (used to seed attack perturbations).
GradientBundle params_as_bundle(const Network& net, const ParameterSet& p);

}  // namespace ssgdlab
