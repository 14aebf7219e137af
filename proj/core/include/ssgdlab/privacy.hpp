#pragma once

#include <vector>

#include "ssgdlab/gradient.hpp"
#include "ssgdlab/rng.hpp"

namespace ssgdlab::privacy {

/// Per-layer sensitivity: max entry minus min entry of the layer's gradient
/// matrix (bias included). This is the scale rule used by the noise
/// baselines, not a clipping bound.
std::vector<double> sensitivity(const GradientBundle& bundle);

/// One Laplace draw with density (1/2b)exp(-|z|/b), sampled by inverse CDF
/// from uniform(-0.5, 0.5): z = -b * sign(u) * ln(1 - 2|u|). Always consumes
/// one uniform; b = 0 yields exactly 0.
double laplace(Rng& rng, double scale_b);

/// Adds i.i.d. Laplace noise per layer with b = sensitivity(layer)/epsilon.
/// The caller passes the summed batch gradient (noise is inserted after the
/// n per-sample gradients are added, before any averaging).
GradientBundle perturb(const GradientBundle& bundle, double epsilon, Rng& rng);

}  // namespace ssgdlab::privacy
