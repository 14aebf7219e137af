#include "ssgdlab/privacy.hpp"

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"
#include "ssgdlab/errors.hpp"
#include "test_helpers.hpp"

namespace ssgdlab::privacy {
namespace {

using ssgdlab::testing::random_bundle;

GradientBundle one_layer(std::vector<double> values) {
  GradientBundle bundle;
  LayerGrad g;
  g.mat = Tensor({values.size(), 1}, std::move(values));
  g.axis = NeuronAxis::Column;
  bundle.layers.push_back(std::move(g));
  return bundle;
}

TEST(Sensitivity, MaxMinusMin) {
  EXPECT_DOUBLE_EQ(sensitivity(one_layer({-1, 0, 3}))[0], 4.0);
  EXPECT_DOUBLE_EQ(sensitivity(one_layer({0.7, 0.7, 0.7}))[0], 0.0);
}

TEST(Sensitivity, MatchesBruteForceScan) {
  Rng rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const GradientBundle g = random_bundle(rng);
    const std::vector<double> sens = sensitivity(g);
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      double lo = g.layers[l].mat[0], hi = lo;
      for (std::size_t i = 0; i < g.layers[l].mat.size(); ++i) {
        lo = std::min(lo, g.layers[l].mat[i]);
        hi = std::max(hi, g.layers[l].mat[i]);
      }
      EXPECT_DOUBLE_EQ(sens[l], hi - lo);
    }
  }
}

TEST(Sensitivity, EmptyBundleRejected) {
  EXPECT_THROW(sensitivity(GradientBundle{}), UsageError);
}

TEST(Laplace, ZeroScaleIsZero) {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(laplace(rng, 0.0), 0.0);
  }
  EXPECT_THROW(laplace(rng, -1.0), UsageError);
}

TEST(Laplace, MedianIsZero) {
  Rng rng(2);
  std::vector<double> draws(10001);
  for (double& d : draws) {
    d = laplace(rng, 1.0);
  }
  std::nth_element(draws.begin(), draws.begin() + 5000, draws.end());
  EXPECT_NEAR(draws[5000], 0.0, 0.05);
}

TEST(Laplace, MeanAbsoluteDeviationTracksScale) {
  Rng rng(3);
  for (const double b : {0.5, 2.0}) {
    double sum_abs = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      sum_abs += std::abs(laplace(rng, b));
    }
    EXPECT_NEAR(sum_abs / n, b, 0.05 * b);
  }
}

TEST(Perturb, HugeEpsilonIsNearIdentity) {
  Rng rng(4);
  const GradientBundle g = random_bundle(rng);
  Rng noise(5);
  const GradientBundle out = perturb(g, 1e12, noise);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    for (std::size_t i = 0; i < g.layers[l].mat.size(); ++i) {
      EXPECT_NEAR(out.layers[l].mat[i], g.layers[l].mat[i], 1e-6);
    }
  }
}

TEST(Perturb, ZeroSensitivityIsIdentity) {
  const GradientBundle g = one_layer({0.3, 0.3, 0.3});
  Rng noise(6);
  const GradientBundle out = perturb(g, 1.0, noise);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.layers[0].mat[i], 0.3);
  }
}

TEST(Perturb, SeedReplayIsBitExact) {
  Rng rng(7);
  const GradientBundle g = random_bundle(rng);
  Rng n1 = Rng(123).substream("noise", 4, 2);
  Rng n2 = Rng(123).substream("noise", 4, 2);
  const GradientBundle a = perturb(g, 2.0, n1);
  const GradientBundle b = perturb(g, 2.0, n2);
  EXPECT_TRUE(ssgdlab::testing::bundles_bit_equal(a, b));
}

TEST(Perturb, PreservesShapesAndValidatesEpsilon) {
  Rng rng(8);
  const GradientBundle g = random_bundle(rng);
  Rng noise(9);
  const GradientBundle out = perturb(g, 4.0, noise);
  EXPECT_TRUE(out.same_shape(g));
  Rng noise2(10);
  EXPECT_THROW(perturb(g, 0.0, noise2), ConfigError);
}

TEST(Perturb, NoiseMagnitudeDecreasesWithEpsilon) {
  // Same bundle, same noise stream: the realized |noise| ordering follows
  // the scale b = sensitivity/epsilon.
  Rng rng(11);
  const GradientBundle g = random_bundle(rng);
  auto mean_abs_noise = [&](double eps) {
    Rng noise(77);
    const GradientBundle out = perturb(g, eps, noise);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      for (std::size_t i = 0; i < g.layers[l].mat.size(); ++i) {
        total += std::abs(out.layers[l].mat[i] - g.layers[l].mat[i]);
        ++count;
      }
    }
    return total / static_cast<double>(count);
  };
  const double at02 = mean_abs_noise(0.2);
  const double at1 = mean_abs_noise(1.0);
  const double at4 = mean_abs_noise(4.0);
  EXPECT_GT(at02, at1);
  EXPECT_GT(at1, at4);
}

}  // namespace
}  // namespace ssgdlab::privacy
