#include "ssgdlab/nn.hpp"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "ssgdlab/checkpoint.hpp"
#include "ssgdlab/errors.hpp"
#include "test_helpers.hpp"

namespace ssgdlab {
namespace {

using testing::random_samples;
using testing::random_tensor;
using testing::tensors_bit_equal;

Network single_neuron(std::size_t d) {
  return Network({d}, {LayerSpec::fully_connected(d, 1), LayerSpec::sigmoid()},
                 LossKind::Square);
}

ParameterSet neuron_params(std::vector<double> w, double b) {
  ParameterSet::LayerParams p;
  const std::size_t d = w.size();
  p.weights = Tensor({d, 1}, std::move(w));
  p.bias = Tensor({1}, {b});
  std::vector<ParameterSet::LayerParams> layers;
  layers.push_back(std::move(p));
  return ParameterSet(std::move(layers));
}

TEST(Tensor, ShapeInvariants) {
  EXPECT_THROW(Tensor({2, 3}, {1.0, 2.0}), UsageError);
  EXPECT_THROW(Tensor({{2, 0}}), UsageError);
  Tensor t({2, 2}, {1, 2, 3, 4});
  EXPECT_THROW(t.reshaped({3}), UsageError);
  EXPECT_EQ(t.reshaped({4}).shape(), (std::vector<std::size_t>{4}));
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, {1.0, std::numeric_limits<double>::infinity()});
  EXPECT_THROW(t.check_finite("unit test"), NumericError);
}

TEST(Forward, SingleNeuronAtZeroInputIsHalf) {
  const Network net = single_neuron(2);
  const ParameterSet params = neuron_params({1.0, 1.0}, 0.0);
  const Tensor inputs({1, 2}, {0.0, 0.0});
  const Tensor targets({1, 1}, {0.0});
  const ForwardTrace trace = forward_targets(net, params, inputs, targets);
  EXPECT_DOUBLE_EQ(trace.logits[0], 0.5);
}

TEST(Forward, ReluMaskMatchesDefinition) {
  const Network net({2}, {LayerSpec::fully_connected(2, 2, false),
                          LayerSpec::relu()},
                    LossKind::Square);
  // Identity weights pass the input straight through to the relu.
  ParameterSet::LayerParams p;
  p.weights = Tensor({2, 2}, {1, 0, 0, 1});
  std::vector<ParameterSet::LayerParams> layers;
  layers.push_back(std::move(p));
  const ParameterSet params{std::move(layers)};
  const Tensor inputs({1, 2}, {-1.0, 2.0});
  const Tensor targets({1, 2}, {0.0, 0.0});
  const ForwardTrace trace = forward_targets(net, params, inputs, targets);
  EXPECT_EQ(trace.outputs[1][0], 0.0);
  EXPECT_EQ(trace.outputs[1][1], 2.0);
  EXPECT_EQ(trace.relu_mask[1][0], 0.0);
  EXPECT_EQ(trace.relu_mask[1][1], 1.0);
}

TEST(Forward, LenetPredictionsNormalizeUnderSoftmax) {
  const Network net = Network::lenet5();
  Rng rng(3);
  const ParameterSet params = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = random_samples(net, 2, rng);
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  ASSERT_EQ(trace.logits.shape(), (std::vector<std::size_t>{2, 10}));
  const Tensor probs = softmax_rows(trace.logits);
  for (std::size_t b = 0; b < 2; ++b) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 10; ++c) {
      sum += probs.at(b, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Forward, NonFiniteIntermediateNamesLayer) {
  const Network net = Network::mlp({2, 2}, LossKind::Square);
  ParameterSet params = neuron_params({1e308, 1e308}, 0.0);
  // Rebuild with matching geometry: 2x2 weights.
  ParameterSet::LayerParams p;
  p.weights = Tensor({2, 2}, {1e308, 1e308, 1e308, 1e308});
  p.bias = Tensor({2});
  std::vector<ParameterSet::LayerParams> layers;
  layers.push_back(std::move(p));
  params = ParameterSet(std::move(layers));
  const Tensor inputs({1, 2}, {10.0, 10.0});
  const Tensor targets({1, 2}, {0.0, 0.0});
  try {
    forward_targets(net, params, inputs, targets);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(Loss, SquareLossExample) {
  const Tensor predictions({1, 1}, {0.5});
  const std::vector<int> labels = {1};
  EXPECT_DOUBLE_EQ(loss_value(predictions, labels, LossKind::Square), 0.25);
}

TEST(Loss, CrossEntropyOneHotPredictionIsZero) {
  Tensor predictions({1, 10});
  predictions.at(0, 3) = 1.0;  // probability rows
  const std::vector<int> labels = {3};
  EXPECT_DOUBLE_EQ(
      loss_value(predictions, labels, LossKind::SoftmaxCrossEntropy), 0.0);
}

TEST(Loss, CrossEntropyUniformIsLogTen) {
  Tensor predictions({1, 10});
  for (std::size_t c = 0; c < 10; ++c) {
    predictions.at(0, c) = 0.1;
  }
  const std::vector<int> labels = {7};
  EXPECT_NEAR(loss_value(predictions, labels, LossKind::SoftmaxCrossEntropy),
              2.302585092994046, 1e-12);
}

TEST(Loss, MeanOverBatchAndNonNegative) {
  Rng rng(11);
  const Tensor predictions = random_tensor({4, 3}, rng);
  const std::vector<int> labels = {0, 1, 2, 1};
  EXPECT_GE(loss_value(predictions, labels, LossKind::Square), 0.0);
}

TEST(Backward, SingleNeuronGradientRelation) {
  // sigma_k = sigma * x_k for the single sigmoid neuron with square loss.
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t d = 2 + rng.below(8);
    const Network net = single_neuron(d);
    std::vector<double> w(d);
    for (auto& v : w) {
      v = rng.uniform(-1, 1);
    }
    const ParameterSet params = neuron_params(w, rng.uniform(-1, 1));
    Tensor x = random_tensor({1, d}, rng);
    const Tensor y({1, 1}, {rng.uniform(0, 1)});
    const ForwardTrace trace = forward_targets(net, params, x, y);
    const GradientBundle g = backward(net, params, trace);
    const double sigma = g.layers[0].mat.at(d, 0);
    for (std::size_t k = 0; k < d; ++k) {
      EXPECT_NEAR(g.layers[0].mat.at(k, 0), sigma * x[k], 1e-12);
    }
  }
}

TEST(Backward, ZeroInputZeroWeightGradients) {
  const Network net = single_neuron(3);
  const ParameterSet params = neuron_params({0.3, -0.2, 0.9}, 0.4);
  const Tensor x({1, 3}, {0.0, 0.0, 0.0});
  const Tensor y({1, 1}, {1.0});
  const ForwardTrace trace = forward_targets(net, params, x, y);
  const GradientBundle g = backward(net, params, trace);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(g.layers[0].mat.at(k, 0), 0.0);
  }
  EXPECT_NE(g.layers[0].mat.at(3, 0), 0.0);
}

TEST(Backward, MatchesFiniteDifferencesOnMlp) {
  Rng rng(23);
  const Network net = Network::mlp({12, 8, 5}, LossKind::SoftmaxCrossEntropy);
  const ParameterSet params = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = random_samples(net, 4, rng);
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  const GradientBundle g = backward(net, params, trace);
  const GradientBundle fd = finite_difference_gradient(net, params, batch, 1e-5);
  double max_rel = 0.0;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    for (std::size_t i = 0; i < g.layers[l].mat.size(); ++i) {
      const double a = g.layers[l].mat[i];
      const double b = fd.layers[l].mat[i];
      max_rel = std::max(max_rel,
                         std::abs(a - b) /
                             std::max({1.0, std::abs(a), std::abs(b)}));
    }
  }
  EXPECT_LT(max_rel, 1e-4);
}

TEST(Backward, StaleTraceDetected) {
  Rng rng(5);
  const Network net = Network::mlp({4, 3}, LossKind::SoftmaxCrossEntropy);
  ParameterSet params = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = random_samples(net, 2, rng);
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  params.mutable_layer(0).weights[0] += 0.5;
  EXPECT_THROW(backward(net, params, trace), UsageError);
}

TEST(Backward, DeterministicBitIdentical) {
  Rng rng(29);
  const Network net = Network::mlp({10, 6, 4}, LossKind::SoftmaxCrossEntropy);
  const ParameterSet params = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = random_samples(net, 3, rng);
  const Batch batch = make_batch(net, samples);
  const GradientBundle g1 = backward(net, params, forward(net, params, batch));
  const GradientBundle g2 = backward(net, params, forward(net, params, batch));
  EXPECT_TRUE(testing::bundles_bit_equal(g1, g2));
}

TEST(Backward, ReluMaskConsistency) {
  // D^i * pre-activation = post-activation, elementwise.
  Rng rng(31);
  const Network net = Network::mlp({6, 5, 3}, LossKind::SoftmaxCrossEntropy);
  const ParameterSet params = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = random_samples(net, 2, rng);
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (net.layers()[l].kind != LayerKind::Relu) {
      continue;
    }
    const Tensor& pre = trace.input_of(l);
    const Tensor& post = trace.outputs[l];
    const Tensor& mask = trace.relu_mask[l];
    for (std::size_t i = 0; i < pre.size(); ++i) {
      EXPECT_EQ(mask[i] * pre[i], post[i]);
    }
  }
}

TEST(FiniteDifference, ExactOnQuadratic) {
  // One bias-free weight, input 1, target 0: loss = theta^2, gradient 6 at 3.
  const Network net({1}, {LayerSpec::fully_connected(1, 1, false)},
                    LossKind::Square);
  ParameterSet::LayerParams p;
  p.weights = Tensor({1, 1}, {3.0});
  std::vector<ParameterSet::LayerParams> layers;
  layers.push_back(std::move(p));
  const ParameterSet params{std::move(layers)};
  Batch batch;
  batch.inputs = Tensor({1, 1}, {1.0});
  batch.targets = Tensor({1, 1}, {0.0});
  batch.labels = {0};
  for (const double h : {0.5, 1e-3, 1e-6}) {
    const GradientBundle fd = finite_difference_gradient(net, params, batch, h);
    EXPECT_NEAR(fd.layers[0].mat[0], 6.0, 1e-9) << "h=" << h;
  }
}

TEST(FiniteDifference, MatchesBackwardOnSingleNeuron) {
  Rng rng(37);
  const Network net = single_neuron(4);
  std::vector<double> w = {0.1, -0.4, 0.7, 0.2};
  const ParameterSet params = neuron_params(w, -0.3);
  Batch batch;
  batch.inputs = random_tensor({1, 4}, rng);
  batch.targets = Tensor({1, 1}, {0.8});
  batch.labels = {0};
  const ForwardTrace trace = forward(net, params, batch);
  const GradientBundle g = backward(net, params, trace);
  const GradientBundle fd = finite_difference_gradient(net, params, batch, 1e-5);
  for (std::size_t i = 0; i < g.layers[0].mat.size(); ++i) {
    EXPECT_NEAR(g.layers[0].mat[i], fd.layers[0].mat[i], 1e-8);
  }
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  const Network net = single_neuron(2);
  const ParameterSet params = neuron_params({1.0, 1.0}, 0.0);
  Batch batch;
  batch.inputs = Tensor({1, 2}, {0.1, 0.2});
  batch.targets = Tensor({1, 1}, {0.0});
  batch.labels = {0};
  EXPECT_THROW(finite_difference_gradient(net, params, batch, 0.0), UsageError);
}

TEST(Init, DeterministicUnderSeed) {
  const Network net = Network::lenet5();
  const ParameterSet a = init_parameters(net, Rng(99).substream("init"));
  const ParameterSet b = init_parameters(net, Rng(99).substream("init"));
  EXPECT_TRUE(a.bit_identical(b));
  const ParameterSet c = init_parameters(net, Rng(100).substream("init"));
  EXPECT_FALSE(a.bit_identical(c));
}

TEST(Init, GlorotBoundsAndZeroBiases) {
  const Network net = Network::mlp({3, 3, 3}, LossKind::SoftmaxCrossEntropy);
  const ParameterSet params = init_parameters(net, Rng(7));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    // fan_in = fan_out = 3 makes the Glorot bound exactly 1.
    for (std::size_t i = 0; i < params.layer(l).weights.size(); ++i) {
      EXPECT_LE(std::abs(params.layer(l).weights[i]), 1.0);
    }
    for (std::size_t i = 0; i < params.layer(l).bias.size(); ++i) {
      EXPECT_EQ(params.layer(l).bias[i], 0.0);
    }
  }
}

TEST(Batch, RejectsEmptyAndMismatched) {
  const Network net = Network::mlp({4, 2}, LossKind::SoftmaxCrossEntropy);
  EXPECT_THROW(make_batch(net, {}), UsageError);
  Sample s;
  s.input = Tensor({3}, {1, 2, 3});
  s.label = 0;
  const Sample samples[1] = {s};
  EXPECT_THROW(make_batch(net, samples), ConfigError);
  Sample bad_label;
  bad_label.input = Tensor({4}, {1, 2, 3, 4});
  bad_label.label = 2;
  const Sample samples2[1] = {bad_label};
  EXPECT_THROW(make_batch(net, samples2), UsageError);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  Rng rng(41);
  const Network net = Network::lenet5();
  const ParameterSet params = init_parameters(net, rng);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_parameters(buf, params);
  const ParameterSet loaded = load_parameters(buf, net);
  EXPECT_TRUE(params.bit_identical(loaded));
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  const Network net = Network::mlp({4, 2}, LossKind::SoftmaxCrossEntropy);
  {
    std::stringstream buf;
    buf << "NOTMAGIC";
    EXPECT_THROW(load_parameters(buf, net), DataError);
  }
  {
    const ParameterSet params = init_parameters(net, Rng(1));
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_parameters(buf, params);
    std::string bytes = buf.str();
    bytes.resize(bytes.size() / 2);
    std::stringstream cut(bytes, std::ios::in | std::ios::binary);
    EXPECT_THROW(load_parameters(cut, net), DataError);
  }
}

TEST(Checkpoint, BiasFreeLayersRoundTrip) {
  const Network net({3}, {LayerSpec::fully_connected(3, 2, false)},
                    LossKind::Square);
  Rng rng(43);
  const ParameterSet params = init_parameters(net, rng);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_parameters(buf, params);
  const ParameterSet loaded = load_parameters(buf, net);
  EXPECT_TRUE(params.bit_identical(loaded));
}

}  // namespace
}  // namespace ssgdlab
