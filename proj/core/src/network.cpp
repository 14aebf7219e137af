#include "ssgdlab/network.hpp"

#include "ssgdlab/errors.hpp"

namespace ssgdlab {

LayerSpec LayerSpec::fully_connected(std::size_t in, std::size_t out,
                                     bool bias) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.fan_in = in;
  s.fan_out = out;
  s.has_bias = bias;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch,
                            std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = 1;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::AvgPool;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::Relu;
  return s;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::Sigmoid;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FullyConnected: return "fully-connected";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::AvgPool: return "avg-pool";
    case LayerKind::MaxPool: return "max-pool";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

namespace {

std::vector<std::size_t> chain_shape(const LayerSpec& spec,
                                     const std::vector<std::size_t>& in,
                                     std::size_t layer_index) {
  const auto fail = [&](const std::string& why) -> std::vector<std::size_t> {
    throw ConfigError("layer " + std::to_string(layer_index) + " (" +
                      to_string(spec.kind) + "): " + why);
  };
  switch (spec.kind) {
    case LayerKind::FullyConnected:
      if (spec.fan_in == 0 || spec.fan_out == 0) {
        return fail("fan_in/fan_out must be positive");
      }
      if (in.size() != 1 || in[0] != spec.fan_in) {
        return fail("expects a vector of length " +
                    std::to_string(spec.fan_in));
      }
      return {spec.fan_out};
    case LayerKind::Conv2d: {
      if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0) {
        return fail("channel/kernel geometry must be positive");
      }
      if (in.size() != 3 || in[0] != spec.in_channels) {
        return fail("expects (channels, height, width) input with " +
                    std::to_string(spec.in_channels) + " channels");
      }
      if (in[1] < spec.kernel || in[2] < spec.kernel) {
        return fail("kernel larger than input");
      }
      return {spec.out_channels, in[1] - spec.kernel + 1,
              in[2] - spec.kernel + 1};
    }
    case LayerKind::AvgPool:
    case LayerKind::MaxPool: {
      if (spec.kernel == 0 || spec.stride == 0) {
        return fail("kernel/stride must be positive");
      }
      if (in.size() != 3) {
        return fail("expects (channels, height, width) input");
      }
      if (in[1] < spec.kernel || in[2] < spec.kernel) {
        return fail("window larger than input");
      }
      return {in[0], (in[1] - spec.kernel) / spec.stride + 1,
              (in[2] - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::Relu:
    case LayerKind::Sigmoid:
      return in;
    case LayerKind::Flatten:
      return {shape_size(in)};
  }
  return fail("unknown layer kind");
}

}  // namespace

Network::Network(std::vector<std::size_t> input_shape,
                 std::vector<LayerSpec> layers, LossKind loss)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      loss_(loss) {
  if (layers_.empty()) {
    throw ConfigError("network needs at least one layer");
  }
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw ConfigError("network input shape must be nonempty");
  }
  std::vector<std::size_t> cur = input_shape_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cur = chain_shape(layers_[l], cur, l);
    output_shapes_.push_back(cur);
    if (layers_[l].parameterized()) {
      param_layers_.push_back(l);
    }
  }
  if (cur.size() != 1) {
    throw ConfigError("network output must be a vector");
  }
}

std::size_t Network::output_dim() const { return output_shapes_.back()[0]; }

std::pair<std::size_t, std::size_t> Network::grad_matrix_dims(
    std::size_t l) const {
  const LayerSpec& spec = layers_.at(l);
  if (spec.kind == LayerKind::FullyConnected) {
    return {spec.fan_in + (spec.has_bias ? 1 : 0), spec.fan_out};
  }
  if (spec.kind == LayerKind::Conv2d) {
    return {spec.out_channels,
            spec.in_channels * spec.kernel * spec.kernel + 1};
  }
  throw UsageError("layer has no parameters");
}

Network Network::mlp(const std::vector<std::size_t>& dims, LossKind loss,
                     bool bias) {
  if (dims.size() < 2) {
    throw ConfigError("mlp needs at least input and output dims");
  }
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers.push_back(LayerSpec::fully_connected(dims[i], dims[i + 1], bias));
    if (i + 2 < dims.size()) {
      layers.push_back(LayerSpec::relu());
    }
  }
  return Network({dims[0]}, std::move(layers), loss);
}

Network Network::lenet5() {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(1, 6, 5),    LayerSpec::relu(),
      LayerSpec::avg_pool(2, 2),     LayerSpec::conv2d(6, 16, 5),
      LayerSpec::relu(),             LayerSpec::avg_pool(2, 2),
      LayerSpec::flatten(),          LayerSpec::fully_connected(256, 120),
      LayerSpec::relu(),             LayerSpec::fully_connected(120, 84),
      LayerSpec::relu(),             LayerSpec::fully_connected(84, 10),
  };
  return Network({1, 28, 28}, std::move(layers),
                 LossKind::SoftmaxCrossEntropy);
}

}  // namespace ssgdlab
