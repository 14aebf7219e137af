#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/nn.hpp"

namespace ssgdlab::optim {

enum class Algorithm : std::uint8_t { Bgd, Sgd, Mbgd, Sgdm, Adam, Ssgd, Ssgdm };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);

struct LrSchedule {
  enum class Kind : std::uint8_t { Constant, ExpDecay } kind = Kind::Constant;
  double eta = 0.1;  // constant rate
  double a = 10.0;   // exp decay: a / r^t
  double r = 1.0002;

  static LrSchedule constant(double eta);
  static LrSchedule exp_decay(double a, double r);
};

struct OptimizerSpec {
  Algorithm algorithm = Algorithm::Sgd;
  LrSchedule lr;
  std::size_t n = 1;  // samples per basic gradient
  std::size_t m = 1;  // basic gradients per step
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double tau = 1e-12;  // zero-norm guard for per-neuron normalization

  bool uses_unit_gradients() const {
    return algorithm == Algorithm::Ssgd || algorithm == Algorithm::Ssgdm;
  }
  /// Throws ConfigError on invalid hyperparameters.
  void validate() const;
};

struct OptimizerState {
  std::uint64_t t = 0;  // completed steps
  std::vector<Tensor> first_moment;   // sgdm/ssgdm velocity, adam m
  std::vector<Tensor> second_moment;  // adam v
};

/// Divides every neuron gradient vector (column or row per the bundle's
/// axis tag, bias included) by its Euclidean modulus length, hiding the
/// length and keeping only the direction. Vectors with norm < tau come back
/// as exact zeros. Equivalent to right-multiplying each layer by the
/// diagonal matrix of reciprocal modulus lengths.
GradientBundle normalize_per_neuron(const GradientBundle& bundle, double tau);

/// Mean of the per-neuron-normalized inputs: the shared descent direction
/// built from m unit basic gradients. Every output neuron norm is <= 1.
GradientBundle ssgd_aggregate(std::span<const GradientBundle> bundles,
                              double tau);

double learning_rate(const OptimizerSpec& spec, std::uint64_t t);

/// One parameter update: theta <- theta - eta_t * d. For ssgd/ssgdm the
/// bundle span must hold the m basic gradients; all other algorithms take
/// exactly one (pre-combined) gradient.
void step(const OptimizerSpec& spec, OptimizerState& state, const Network& net,
          ParameterSet& params, std::span<const GradientBundle> bundles);

/// The update recurrences applied to an already-aggregated direction. The
/// federated server uses this with the mean of worker payloads; `step` is
/// aggregation plus this.
void apply_direction(const OptimizerSpec& spec, OptimizerState& state,
                     const Network& net, ParameterSet& params,
                     const GradientBundle& aggregated);

}  // namespace ssgdlab::optim
