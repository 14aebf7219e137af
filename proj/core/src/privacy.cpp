#include "ssgdlab/privacy.hpp"

#include <cmath>

#include "ssgdlab/errors.hpp"

namespace ssgdlab::privacy {

std::vector<double> sensitivity(const GradientBundle& bundle) {
  if (bundle.layers.empty()) {
    throw UsageError("sensitivity of an empty bundle");
  }
  std::vector<double> out;
  out.reserve(bundle.layers.size());
  for (const auto& layer : bundle.layers) {
    const auto& v = layer.mat.values();
    double lo = v[0], hi = v[0];
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    out.push_back(hi - lo);
  }
  return out;
}

double laplace(Rng& rng, double scale_b) {
  if (scale_b < 0.0) {
    throw UsageError("laplace scale must be nonnegative");
  }
  double u = rng.uniform01() - 0.5;  // [-0.5, 0.5)
  while (u == -0.5) {
    u = rng.uniform01() - 0.5;
  }
  if (scale_b == 0.0) {
    return 0.0;
  }
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return -scale_b * sign * std::log1p(-2.0 * std::abs(u));
}

GradientBundle perturb(const GradientBundle& bundle, double epsilon,
                       Rng& rng) {
  if (!(epsilon > 0.0)) {
    throw ConfigError("privacy budget epsilon must be positive");
  }
  const std::vector<double> sens = sensitivity(bundle);
  GradientBundle out = bundle;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    const double b = sens[l] / epsilon;
    auto& v = out.layers[l].mat.values();
    for (double& x : v) {
      x += laplace(rng, b);
    }
  }
  return out;
}

}  // namespace ssgdlab::privacy
