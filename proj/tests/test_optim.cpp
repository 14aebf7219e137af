#include "ssgdlab/optim.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "ssgdlab/errors.hpp"
#include "test_helpers.hpp"

namespace ssgdlab::optim {
namespace {

using ssgdlab::testing::bundles_bit_equal;
using ssgdlab::testing::random_bundle;

GradientBundle column_bundle(std::vector<double> values) {
  GradientBundle bundle;
  LayerGrad g;
  g.mat = Tensor({values.size(), 1}, std::move(values));
  g.axis = NeuronAxis::Column;
  bundle.layers.push_back(std::move(g));
  return bundle;
}

TEST(NormalizePerNeuron, ThreeFourFive) {
  const GradientBundle unit = normalize_per_neuron(column_bundle({3, 4}), 1e-12);
  EXPECT_DOUBLE_EQ(unit.layers[0].mat[0], 0.6);
  EXPECT_DOUBLE_EQ(unit.layers[0].mat[1], 0.8);
}

TEST(NormalizePerNeuron, IdempotentOnUnitVectors) {
  const GradientBundle unit = normalize_per_neuron(column_bundle({0.6, 0.8}), 1e-12);
  const GradientBundle again = normalize_per_neuron(unit, 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(again.layers[0].mat[i], unit.layers[0].mat[i], 1e-15);
  }
}

TEST(NormalizePerNeuron, ZeroGuard) {
  const GradientBundle unit = normalize_per_neuron(column_bundle({0, 0}), 1e-12);
  EXPECT_EQ(unit.layers[0].mat[0], 0.0);
  EXPECT_EQ(unit.layers[0].mat[1], 0.0);
}

TEST(NormalizePerNeuron, ScaleInvariance) {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const GradientBundle g = random_bundle(rng);
    const double c = std::pow(10.0, rng.uniform(-6, 6));
    const GradientBundle a = normalize_per_neuron(g, 1e-12);
    const GradientBundle b = normalize_per_neuron(g.scaled(c), 1e-12);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      for (std::size_t i = 0; i < a.layers[l].mat.size(); ++i) {
        EXPECT_NEAR(a.layers[l].mat[i], b.layers[l].mat[i], 1e-12);
      }
    }
  }
}

TEST(NormalizePerNeuron, PreservesDirection) {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const GradientBundle g = random_bundle(rng);
    const GradientBundle unit = normalize_per_neuron(g, 1e-12);
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      const LayerGrad& raw = g.layers[l];
      const LayerGrad& nrm = unit.layers[l];
      for (std::size_t k = 0; k < raw.neuron_count(); ++k) {
        const double norm = raw.neuron_norm(k);
        if (norm < 1e-12) {
          continue;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < raw.neuron_dim(); ++i) {
          dot += raw.neuron_entry(k, i) * nrm.neuron_entry(k, i);
        }
        EXPECT_NEAR(dot / norm, 1.0, 1e-12);  // cosine similarity
      }
    }
  }
}

TEST(SsgdAggregate, SingleBundleEqualsNormalize) {
  Rng rng(11);
  const GradientBundle g = random_bundle(rng);
  const GradientBundle agg = ssgd_aggregate({&g, 1}, 1e-12);
  EXPECT_TRUE(bundles_bit_equal(agg, normalize_per_neuron(g, 1e-12)));
}

TEST(SsgdAggregate, OppositeUnitVectorsCancel) {
  const GradientBundle a = column_bundle({3, 4});
  const GradientBundle b = column_bundle({-3, -4});
  const GradientBundle bundles[2] = {a, b};
  const GradientBundle agg = ssgd_aggregate(bundles, 1e-12);
  EXPECT_EQ(agg.layers[0].mat[0], 0.0);
  EXPECT_EQ(agg.layers[0].mat[1], 0.0);
}

TEST(SsgdAggregate, NeuronNormsNeverExceedOne) {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    GradientBundle shape = random_bundle(rng);
    std::vector<GradientBundle> bundles;
    for (int j = 0; j < 4; ++j) {
      GradientBundle g = shape;
      for (auto& layer : g.layers) {
        for (std::size_t i = 0; i < layer.mat.size(); ++i) {
          layer.mat[i] = rng.uniform(-1, 1);
        }
      }
      bundles.push_back(std::move(g));
    }
    const GradientBundle agg = ssgd_aggregate(bundles, 1e-12);
    for (const auto& layer : agg.layers) {
      for (std::size_t k = 0; k < layer.neuron_count(); ++k) {
        EXPECT_LE(layer.neuron_norm(k), 1.0 + 1e-12);
      }
    }
  }
}

TEST(SsgdAggregate, ShapeMismatchRejected) {
  Rng rng(15);
  GradientBundle a = column_bundle({1, 2});
  GradientBundle b = column_bundle({1, 2, 3});
  const GradientBundle bundles[2] = {a, b};
  EXPECT_THROW(ssgd_aggregate(bundles, 1e-12), UsageError);
  EXPECT_THROW(ssgd_aggregate({}, 1e-12), UsageError);
}

TEST(LearningRate, PaperSchedule) {
  OptimizerSpec spec;
  spec.lr = LrSchedule::exp_decay(10.0, 1.0002);
  EXPECT_DOUBLE_EQ(learning_rate(spec, 0), 10.0);
  for (const std::uint64_t t : {0ull, 5ull, 100ull}) {
    EXPECT_NEAR(learning_rate(spec, t + 1), learning_rate(spec, t) / 1.0002,
                1e-12 * learning_rate(spec, t));
  }
}

TEST(LearningRate, ConstantSchedule) {
  OptimizerSpec spec;
  spec.lr = LrSchedule::constant(0.1);
  EXPECT_DOUBLE_EQ(learning_rate(spec, 0), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate(spec, 12345), 0.1);
}

// A one-parameter network: theta in a single bias-free weight.
struct ScalarRig {
  Network net{{1},
              {LayerSpec::fully_connected(1, 1, false)},
              LossKind::Square};
  ParameterSet params;

  explicit ScalarRig(double theta) {
    ParameterSet::LayerParams p;
    p.weights = Tensor({1, 1}, {theta});
    std::vector<ParameterSet::LayerParams> layers;
    layers.push_back(std::move(p));
    params = ParameterSet(std::move(layers));
  }

  double theta() const { return params.layer(0).weights[0]; }
};

GradientBundle scalar_grad(double g) {
  GradientBundle bundle;
  LayerGrad layer;
  layer.mat = Tensor({1, 1}, {g});
  layer.axis = NeuronAxis::Column;
  bundle.layers.push_back(std::move(layer));
  return bundle;
}

TEST(Step, SgdArithmetic) {
  ScalarRig rig(1.0);
  OptimizerSpec spec;
  spec.algorithm = Algorithm::Sgd;
  spec.lr = LrSchedule::constant(0.1);
  OptimizerState state;
  const GradientBundle g = scalar_grad(2.0);
  step(spec, state, rig.net, rig.params, {&g, 1});
  EXPECT_DOUBLE_EQ(rig.theta(), 0.8);
  EXPECT_EQ(state.t, 1u);
}

TEST(Step, AdamFirstStepIsSignedLearningRate) {
  for (const double g0 : {3.0, -0.02, 1e-6}) {
    ScalarRig rig(0.0);
    OptimizerSpec spec;
    spec.algorithm = Algorithm::Adam;
    spec.lr = LrSchedule::constant(0.1);
    OptimizerState state;
    const GradientBundle g = scalar_grad(g0);
    step(spec, state, rig.net, rig.params, {&g, 1});
    const double expected = -0.1 * g0 / (std::abs(g0) + 1e-8);
    EXPECT_NEAR(rig.theta(), expected, 1e-15);
    EXPECT_NEAR(std::abs(rig.theta()), 0.1,
                0.1 * 1e-8 / std::abs(g0) + 1e-12);
  }
}

TEST(Step, SsgdSingleBundleIsNormalizedStep) {
  Rng rng(21);
  const Network net = Network::mlp({5, 4, 3}, LossKind::SoftmaxCrossEntropy);
  ParameterSet params = init_parameters(net, rng.substream("init"));
  const ParameterSet before = params;
  const std::vector<Sample> samples = ssgdlab::testing::random_samples(net, 6, rng);
  const Batch batch = make_batch(net, samples);
  const GradientBundle g = backward(net, params, forward(net, params, batch));

  OptimizerSpec spec;
  spec.algorithm = Algorithm::Ssgd;
  spec.lr = LrSchedule::constant(0.1);
  spec.m = 1;
  OptimizerState state;
  step(spec, state, net, params, {&g, 1});

  ParameterSet expected = before;
  apply_delta(net, expected, normalize_per_neuron(g, spec.tau), -0.1);
  EXPECT_TRUE(params.bit_identical(expected));
}

TEST(Step, SgdmAndAdamMatchScalarOracle) {
  // Straight-line scalar re-implementations of the recurrences.
  Rng rng(33);
  {
    ScalarRig rig(0.5);
    OptimizerSpec spec;
    spec.algorithm = Algorithm::Sgdm;
    spec.lr = LrSchedule::constant(0.05);
    spec.momentum = 0.9;
    OptimizerState state;
    double theta = 0.5, v = 0.0;
    for (int t = 0; t < 100; ++t) {
      const double gt = rng.uniform(-1, 1);
      const GradientBundle g = scalar_grad(gt);
      step(spec, state, rig.net, rig.params, {&g, 1});
      v = 0.9 * v + gt;
      theta -= 0.05 * v;
      ASSERT_NEAR(rig.theta(), theta, 1e-12);
    }
  }
  {
    ScalarRig rig(-0.2);
    OptimizerSpec spec;
    spec.algorithm = Algorithm::Adam;
    spec.lr = LrSchedule::constant(0.01);
    OptimizerState state;
    double theta = -0.2, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const double gt = rng.uniform(-2, 2);
      const GradientBundle g = scalar_grad(gt);
      step(spec, state, rig.net, rig.params, {&g, 1});
      m = 0.9 * m + 0.1 * gt;
      v = 0.999 * v + 0.001 * gt * gt;
      const double mhat = m / (1.0 - std::pow(0.9, t));
      const double vhat = v / (1.0 - std::pow(0.999, t));
      theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
      ASSERT_NEAR(rig.theta(), theta, 1e-12);
    }
  }
}

TEST(Step, SsgdmMatchesScalarOracle) {
  // Running-mean velocity on the aggregated unit gradient.
  ScalarRig rig(1.0);
  OptimizerSpec spec;
  spec.algorithm = Algorithm::Ssgdm;
  spec.lr = LrSchedule::exp_decay(10.0, 1.0002);
  spec.momentum = 0.99;
  spec.m = 1;
  OptimizerState state;
  Rng rng(35);
  double theta = 1.0, v = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double gt = rng.uniform(-1, 1);
    const GradientBundle g = scalar_grad(gt);
    step(spec, state, rig.net, rig.params, {&g, 1});
    const double unit = gt > 0 ? 1.0 : (gt < 0 ? -1.0 : 0.0);
    v = 0.99 * v + 0.01 * unit;
    theta -= (10.0 / std::pow(1.0002, t)) * v;
    ASSERT_NEAR(rig.theta(), theta, 1e-10);
  }
}

TEST(Step, ZeroGradientsProduceNoNanAnywhere) {
  for (const Algorithm algo :
       {Algorithm::Sgd, Algorithm::Sgdm, Algorithm::Adam, Algorithm::Ssgd,
        Algorithm::Ssgdm}) {
    ScalarRig rig(0.7);
    OptimizerSpec spec;
    spec.algorithm = algo;
    spec.lr = LrSchedule::constant(0.1);
    spec.momentum = 0.5;
    OptimizerState state;
    const GradientBundle g = scalar_grad(0.0);
    for (int t = 0; t < 3; ++t) {
      step(spec, state, rig.net, rig.params, {&g, 1});
    }
    EXPECT_TRUE(std::isfinite(rig.theta()));
    EXPECT_EQ(rig.theta(), 0.7);  // zero gradient moves nothing
  }
}

TEST(Step, BundleCountValidation) {
  ScalarRig rig(0.0);
  OptimizerSpec spec;
  spec.algorithm = Algorithm::Ssgd;
  spec.m = 2;
  OptimizerState state;
  const GradientBundle g = scalar_grad(1.0);
  EXPECT_THROW(step(spec, state, rig.net, rig.params, {&g, 1}), UsageError);

  spec.algorithm = Algorithm::Sgd;
  const GradientBundle two[2] = {g, g};
  EXPECT_THROW(step(spec, state, rig.net, rig.params, two), UsageError);
}

TEST(Step, DeterministicBitIdentical) {
  Rng rng(39);
  const Network net = Network::mlp({6, 4, 3}, LossKind::SoftmaxCrossEntropy);
  const ParameterSet init = init_parameters(net, rng.substream("init"));
  const std::vector<Sample> samples = ssgdlab::testing::random_samples(net, 4, rng);
  const Batch batch = make_batch(net, samples);

  auto run = [&]() {
    ParameterSet params = init;
    OptimizerSpec spec;
    spec.algorithm = Algorithm::Ssgdm;
    spec.lr = LrSchedule::constant(0.1);
    spec.momentum = 0.9;
    spec.m = 2;
    OptimizerState state;
    for (int t = 0; t < 5; ++t) {
      const GradientBundle g =
          backward(net, params, forward(net, params, batch));
      const GradientBundle bundles[2] = {g, g};
      step(spec, state, net, params, bundles);
    }
    return params;
  };
  EXPECT_TRUE(run().bit_identical(run()));
}

TEST(Spec, Validation) {
  OptimizerSpec spec;
  spec.n = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.lr = LrSchedule::constant(-1.0);
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.momentum = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.beta1 = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.tau = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  EXPECT_NO_THROW(spec.validate());
}

}  // namespace
}  // namespace ssgdlab::optim
