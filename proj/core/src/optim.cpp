#include "ssgdlab/optim.hpp"

#include <cmath>

#include "ssgdlab/errors.hpp"

namespace ssgdlab::optim {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "bgd") return Algorithm::Bgd;
  if (name == "sgd") return Algorithm::Sgd;
  if (name == "mbgd") return Algorithm::Mbgd;
  if (name == "sgdm") return Algorithm::Sgdm;
  if (name == "adam") return Algorithm::Adam;
  if (name == "ssgd") return Algorithm::Ssgd;
  if (name == "ssgdm") return Algorithm::Ssgdm;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Bgd: return "bgd";
    case Algorithm::Sgd: return "sgd";
    case Algorithm::Mbgd: return "mbgd";
    case Algorithm::Sgdm: return "sgdm";
    case Algorithm::Adam: return "adam";
    case Algorithm::Ssgd: return "ssgd";
    case Algorithm::Ssgdm: return "ssgdm";
  }
  return "?";
}

LrSchedule LrSchedule::constant(double eta) {
  LrSchedule s;
  s.kind = Kind::Constant;
  s.eta = eta;
  return s;
}

LrSchedule LrSchedule::exp_decay(double a, double r) {
  LrSchedule s;
  s.kind = Kind::ExpDecay;
  s.a = a;
  s.r = r;
  return s;
}

void OptimizerSpec::validate() const {
  if (n < 1 || m < 1) {
    throw ConfigError("n and m must be at least 1");
  }
  if (lr.kind == LrSchedule::Kind::Constant) {
    if (!(lr.eta > 0.0)) {
      throw ConfigError("learning rate must be positive");
    }
  } else if (!(lr.a > 0.0) || !(lr.r > 0.0)) {
    throw ConfigError("decay schedule requires a > 0 and r > 0");
  }
  if (!(momentum >= 0.0) || momentum >= 1.0) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (!(beta1 > 0.0) || beta1 >= 1.0 || !(beta2 > 0.0) || beta2 >= 1.0) {
    throw ConfigError("beta1/beta2 must be in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) {
    throw ConfigError("adam epsilon must be positive");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("zero-norm guard tau must be positive");
  }
}

double learning_rate(const OptimizerSpec& spec, std::uint64_t t) {
  if (spec.lr.kind == LrSchedule::Kind::Constant) {
    return spec.lr.eta;
  }
  return spec.lr.a / std::pow(spec.lr.r, static_cast<double>(t));
}

GradientBundle normalize_per_neuron(const GradientBundle& bundle, double tau) {
  GradientBundle out = bundle;
  for (auto& layer : out.layers) {
    const std::size_t neurons = layer.neuron_count();
    const std::size_t dim = layer.neuron_dim();
    for (std::size_t k = 0; k < neurons; ++k) {
      const double norm = layer.neuron_norm(k);
      if (norm < tau) {
        for (std::size_t i = 0; i < dim; ++i) {
          layer.neuron_entry(k, i) = 0.0;
        }
      } else {
        for (std::size_t i = 0; i < dim; ++i) {
          layer.neuron_entry(k, i) /= norm;
        }
      }
    }
  }
  return out;
}

GradientBundle ssgd_aggregate(std::span<const GradientBundle> bundles,
                              double tau) {
  if (bundles.empty()) {
    throw UsageError("ssgd_aggregate requires at least one bundle");
  }
  std::vector<GradientBundle> units;
  units.reserve(bundles.size());
  for (const auto& b : bundles) {
    units.push_back(normalize_per_neuron(b, tau));
  }
  return mean_of(units);
}

namespace {

void ensure_buffers(std::vector<Tensor>& buffers,
                    const GradientBundle& shape_like) {
  if (buffers.empty()) {
    for (const auto& layer : shape_like.layers) {
      buffers.emplace_back(layer.mat.shape());
    }
    return;
  }
  if (buffers.size() != shape_like.layers.size()) {
    throw UsageError("optimizer state does not match gradient shape");
  }
  for (std::size_t l = 0; l < buffers.size(); ++l) {
    if (!buffers[l].same_shape(shape_like.layers[l].mat)) {
      throw UsageError("optimizer state does not match gradient shape");
    }
  }
}

}  // namespace

void apply_direction(const OptimizerSpec& spec, OptimizerState& state,
                     const Network& net, ParameterSet& params,
                     const GradientBundle& aggregated) {
  const double eta = learning_rate(spec, state.t);
  switch (spec.algorithm) {
    case Algorithm::Bgd:
    case Algorithm::Sgd:
    case Algorithm::Mbgd:
    case Algorithm::Ssgd: {
      apply_delta(net, params, aggregated, -eta);
      break;
    }
    case Algorithm::Sgdm:
    case Algorithm::Ssgdm: {
      ensure_buffers(state.first_moment, aggregated);
      // sgdm is heavy-ball (v <- mu*v + g); ssgdm keeps a running mean of
      // the unit directions (v <- mu*v + (1-mu)*g), which the decaying-rate
      // schedule requires to stay bounded.
      const bool average = spec.algorithm == Algorithm::Ssgdm;
      const double gain = average ? (1.0 - spec.momentum) : 1.0;
      GradientBundle direction = aggregated;
      for (std::size_t l = 0; l < direction.layers.size(); ++l) {
        Tensor& v = state.first_moment[l];
        Tensor& d = direction.layers[l].mat;
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = spec.momentum * v[i] + gain * d[i];
          d[i] = v[i];
        }
      }
      apply_delta(net, params, direction, -eta);
      break;
    }
    case Algorithm::Adam: {
      ensure_buffers(state.first_moment, aggregated);
      ensure_buffers(state.second_moment, aggregated);
      const double t1 = static_cast<double>(state.t + 1);
      const double bc1 = 1.0 - std::pow(spec.beta1, t1);
      const double bc2 = 1.0 - std::pow(spec.beta2, t1);
      GradientBundle direction = aggregated;
      for (std::size_t l = 0; l < direction.layers.size(); ++l) {
        Tensor& m = state.first_moment[l];
        Tensor& v = state.second_moment[l];
        Tensor& d = direction.layers[l].mat;
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double g = d[i];
          m[i] = spec.beta1 * m[i] + (1.0 - spec.beta1) * g;
          v[i] = spec.beta2 * v[i] + (1.0 - spec.beta2) * g * g;
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          d[i] = mhat / (std::sqrt(vhat) + spec.adam_epsilon);
        }
      }
      apply_delta(net, params, direction, -eta);
      break;
    }
  }
  state.t += 1;
}

void step(const OptimizerSpec& spec, OptimizerState& state, const Network& net,
          ParameterSet& params, std::span<const GradientBundle> bundles) {
  if (spec.uses_unit_gradients()) {
    if (bundles.size() != spec.m) {
      throw UsageError("ssgd step expects m = " + std::to_string(spec.m) +
                       " basic gradients, got " +
                       std::to_string(bundles.size()));
    }
    apply_direction(spec, state, net, params,
                    ssgd_aggregate(bundles, spec.tau));
    return;
  }
  if (bundles.size() != 1) {
    throw UsageError("algorithm " + to_string(spec.algorithm) +
                     " expects exactly one combined gradient");
  }
  apply_direction(spec, state, net, params, bundles[0]);
}

}  // namespace ssgdlab::optim
