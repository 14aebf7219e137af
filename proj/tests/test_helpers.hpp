#pragma once

#include <cstring>
#include <vector>

#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/nn.hpp"
#include "ssgdlab/rng.hpp"

namespace ssgdlab::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform(lo, hi);
  }
  return t;
}

inline GradientBundle random_bundle(Rng& rng, std::size_t max_layers = 3) {
  GradientBundle bundle;
  const std::size_t layers = 1 + rng.below(max_layers);
  for (std::size_t l = 0; l < layers; ++l) {
    LayerGrad g;
    g.mat = random_tensor({2 + rng.below(6), 2 + rng.below(6)}, rng);
    g.axis = rng.below(2) == 0 ? NeuronAxis::Column : NeuronAxis::Row;
    bundle.layers.push_back(std::move(g));
  }
  return bundle;
}

inline std::vector<Sample> random_samples(const Network& net, std::size_t count,
                                          Rng& rng) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.input = random_tensor(net.input_shape(), rng, 0.0, 1.0);
    s.label = static_cast<int>(rng.below(net.output_dim()));
    out.push_back(std::move(s));
  }
  return out;
}

inline bool tensors_bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline bool bundles_bit_equal(const GradientBundle& a,
                              const GradientBundle& b) {
  if (a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].axis != b.layers[l].axis ||
        !tensors_bit_equal(a.layers[l].mat, b.layers[l].mat)) {
      return false;
    }
  }
  return true;
}

}  // namespace ssgdlab::testing
