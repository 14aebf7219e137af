#include "ssgdlab/nn.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {
namespace {

std::atomic<std::uint64_t> g_param_stamp{1};

std::uint64_t next_stamp() {
  return g_param_stamp.fetch_add(1, std::memory_order_relaxed);
}

std::vector<std::size_t> with_batch(std::size_t batch,
                                    const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> out;
  out.reserve(shape.size() + 1);
  out.push_back(batch);
  out.insert(out.end(), shape.begin(), shape.end());
  return out;
}

// out(BxN) = in(BxK) * W(KxN), rows initialized from bias (or zero).
void fc_forward(const Tensor& in, const Tensor& w, const Tensor& bias,
                Tensor& out, std::size_t batch, std::size_t k_dim,
                std::size_t n_dim) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* out_row = out.data() + b * n_dim;
    if (bias.empty()) {
      std::memset(out_row, 0, n_dim * sizeof(double));
    } else {
      std::memcpy(out_row, bias.data(), n_dim * sizeof(double));
    }
    const double* in_row = in.data() + b * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double a = in_row[k];
      const double* w_row = w.data() + k * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) {
        out_row[n] += a * w_row[n];
      }
    }
  }
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ParameterSet::ParameterSet(std::vector<LayerParams> layers)
    : layers_(std::move(layers)), stamp_(next_stamp()) {}

ParameterSet::LayerParams& ParameterSet::mutable_layer(std::size_t i) {
  stamp_ = next_stamp();
  return layers_.at(i);
}

bool ParameterSet::bit_identical(const ParameterSet& other) const {
  if (layers_.size() != other.layers_.size()) {
    return false;
  }
  auto tensors_equal = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!tensors_equal(layers_[i].weights, other.layers_[i].weights) ||
        !tensors_equal(layers_[i].bias, other.layers_[i].bias)) {
      return false;
    }
  }
  return true;
}

Tensor make_targets(const Network& net, std::span<const int> labels) {
  const std::size_t c_dim = net.output_dim();
  Tensor targets({labels.size(), c_dim});
  const bool numeric = net.loss() == LossKind::Square && c_dim == 1;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (numeric) {
      targets.at(b, 0) = static_cast<double>(labels[b]);
      continue;
    }
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= c_dim) {
      throw UsageError("label " + std::to_string(labels[b]) +
                       " out of range for " + std::to_string(c_dim) +
                       " classes");
    }
    targets.at(b, static_cast<std::size_t>(labels[b])) = 1.0;
  }
  return targets;
}

Batch make_batch(const Network& net, std::span<const Sample> samples) {
  if (samples.empty()) {
    throw UsageError("batch must be nonempty");
  }
  const std::size_t in_size = net.input_size();
  Tensor inputs(with_batch(samples.size(), net.input_shape()));
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b].input.size() != in_size) {
      throw ConfigError("sample input has " +
                        std::to_string(samples[b].input.size()) +
                        " values, network expects " + std::to_string(in_size));
    }
    std::memcpy(inputs.data() + b * in_size, samples[b].input.data(),
                in_size * sizeof(double));
  }
  Batch batch;
  batch.inputs = std::move(inputs);
  batch.labels.reserve(samples.size());
  for (const Sample& s : samples) {
    batch.labels.push_back(s.label);
  }
  batch.targets = make_targets(net, batch.labels);
  return batch;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  for (std::size_t b = 0; b < rows; ++b) {
    double* row = out.data() + b * cols;
    double m = row[0];
    for (std::size_t c = 1; c < cols; ++c) {
      m = std::max(m, row[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - m);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] /= sum;
    }
  }
  return out;
}

namespace {

// Mean loss and ḡ = ∂(mean loss)/∂logits for explicit targets.
// Cross-entropy goes through log-sum-exp so saturated logits stay finite.
void loss_and_grad(LossKind kind, const Tensor& logits, const Tensor& targets,
                   double& loss_out, Tensor& grad_out) {
  const std::size_t batch = logits.rows();
  const std::size_t c_dim = logits.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  grad_out = Tensor({batch, c_dim});
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = logits.data() + b * c_dim;
    const double* t = targets.data() + b * c_dim;
    double* g = grad_out.data() + b * c_dim;
    if (kind == LossKind::Square) {
      for (std::size_t c = 0; c < c_dim; ++c) {
        const double d = z[c] - t[c];
        total += d * d;
        g[c] = 2.0 * d * inv_b;
      }
    } else {
      double m = z[0];
      for (std::size_t c = 1; c < c_dim; ++c) {
        m = std::max(m, z[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < c_dim; ++c) {
        sum += std::exp(z[c] - m);
      }
      const double lse = m + std::log(sum);
      double dot = 0.0;
      for (std::size_t c = 0; c < c_dim; ++c) {
        dot += t[c] * z[c];
        g[c] = (std::exp(z[c] - lse) - t[c]) * inv_b;
      }
      total += lse - dot;
    }
  }
  loss_out = total * inv_b;
}

}  // namespace

double loss_value_targets(const Tensor& predictions, const Tensor& targets,
                          LossKind kind) {
  if (!predictions.same_shape(targets)) {
    throw UsageError("predictions/targets shape mismatch");
  }
  const std::size_t batch = predictions.rows();
  const std::size_t c_dim = predictions.cols();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* p = predictions.data() + b * c_dim;
    const double* t = targets.data() + b * c_dim;
    for (std::size_t c = 0; c < c_dim; ++c) {
      if (kind == LossKind::Square) {
        const double d = p[c] - t[c];
        total += d * d;
      } else if (t[c] != 0.0) {
        // Predictions are probability rows here (post-softmax).
        total -= t[c] * std::log(std::max(p[c], 1e-300));
      }
    }
  }
  return total / static_cast<double>(batch);
}

double loss_value(const Tensor& predictions, std::span<const int> labels,
                  LossKind kind) {
  if (predictions.rank() != 2 || predictions.rows() != labels.size()) {
    throw UsageError("predictions must be (batch, C) matching labels");
  }
  const std::size_t c_dim = predictions.cols();
  Tensor targets({labels.size(), c_dim});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (kind == LossKind::Square && c_dim == 1) {
      targets.at(b, 0) = static_cast<double>(labels[b]);
    } else if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= c_dim) {
      throw UsageError("label out of range");
    } else {
      targets.at(b, static_cast<std::size_t>(labels[b])) = 1.0;
    }
  }
  return loss_value_targets(predictions, targets, kind);
}

ForwardTrace forward_targets(const Network& net, const ParameterSet& params,
                             const Tensor& inputs, const Tensor& targets) {
  const auto& layers = net.layers();
  if (params.layer_count() != net.parameterized_layers().size()) {
    throw ConfigError("parameter set does not match network");
  }
  if (inputs.rank() < 1 || inputs.shape()[0] == 0) {
    throw UsageError("batch must be nonempty");
  }
  const std::size_t batch = inputs.shape()[0];
  if (inputs.size() != batch * net.input_size()) {
    throw ConfigError("input shape does not match network input");
  }
  inputs.check_finite("network input");

  ForwardTrace trace;
  trace.params_stamp = params.stamp();
  trace.batch = batch;
  trace.input = inputs.reshaped(with_batch(batch, net.input_shape()));
  trace.outputs.resize(layers.size());
  trace.relu_mask.resize(layers.size());
  trace.pool_argmax.resize(layers.size());

  std::size_t param_idx = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    const Tensor& in = trace.input_of(l);
    Tensor out(with_batch(batch, net.output_shape(l)));
    switch (spec.kind) {
      case LayerKind::FullyConnected: {
        const auto& p = params.layer(param_idx++);
        fc_forward(in, p.weights, p.bias, out, batch, spec.fan_in,
                   spec.fan_out);
        break;
      }
      case LayerKind::Conv2d: {
        const auto& p = params.layer(param_idx++);
        const std::size_t ci = spec.in_channels, co = spec.out_channels;
        const std::size_t k = spec.kernel;
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t ho = h - k + 1, wo = w - k + 1;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < co; ++o) {
            double* plane = out.data() + (b * co + o) * ho * wo;
            const double bias = p.bias[o];
            for (std::size_t i = 0; i < ho * wo; ++i) {
              plane[i] = bias;
            }
            for (std::size_t i = 0; i < ci; ++i) {
              const double* in_plane = in.data() + (b * ci + i) * h * w;
              const double* ker =
                  p.weights.data() + (o * ci + i) * k * k;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  const double kw = ker[u * k + v];
                  for (std::size_t y = 0; y < ho; ++y) {
                    const double* in_row = in_plane + (y + u) * w + v;
                    double* out_row = plane + y * wo;
                    for (std::size_t x = 0; x < wo; ++x) {
                      out_row[x] += kw * in_row[x];
                    }
                  }
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::AvgPool: {
        const std::size_t c = in.shape()[1];
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t k = spec.kernel, s = spec.stride;
        const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
        const double inv = 1.0 / static_cast<double>(k * k);
        for (std::size_t bc = 0; bc < batch * c; ++bc) {
          const double* in_plane = in.data() + bc * h * w;
          double* out_plane = out.data() + bc * ho * wo;
          for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
              double sum = 0.0;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  sum += in_plane[(y * s + u) * w + x * s + v];
                }
              }
              out_plane[y * wo + x] = sum * inv;
            }
          }
        }
        break;
      }
      case LayerKind::MaxPool: {
        const std::size_t c = in.shape()[1];
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t k = spec.kernel, s = spec.stride;
        const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
        auto& argmax = trace.pool_argmax[l];
        argmax.assign(batch * c * ho * wo, 0);
        for (std::size_t bc = 0; bc < batch * c; ++bc) {
          const double* in_plane = in.data() + bc * h * w;
          double* out_plane = out.data() + bc * ho * wo;
          for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
              double best = -std::numeric_limits<double>::infinity();
              std::size_t best_idx = 0;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  const std::size_t idx = (y * s + u) * w + x * s + v;
                  if (in_plane[idx] > best) {
                    best = in_plane[idx];
                    best_idx = idx;
                  }
                }
              }
              out_plane[y * wo + x] = best;
              argmax[bc * ho * wo + y * wo + x] =
                  static_cast<std::uint32_t>(best_idx);
            }
          }
        }
        break;
      }
      case LayerKind::Relu: {
        Tensor mask(out.shape());
        for (std::size_t i = 0; i < in.size(); ++i) {
          const bool fired = in[i] > 0.0;
          mask[i] = fired ? 1.0 : 0.0;
          out[i] = fired ? in[i] : 0.0;
        }
        trace.relu_mask[l] = std::move(mask);
        break;
      }
      case LayerKind::Sigmoid: {
        for (std::size_t i = 0; i < in.size(); ++i) {
          out[i] = sigmoid_value(in[i]);
        }
        break;
      }
      case LayerKind::Flatten: {
        out = in.reshaped(with_batch(batch, net.output_shape(l)));
        break;
      }
    }
    out.check_finite("output of layer " + std::to_string(l) + " (" +
                     to_string(spec.kind) + ")");
    trace.outputs[l] = std::move(out);
  }

  trace.logits = trace.outputs.back();
  if (targets.rank() != 2 || targets.rows() != batch ||
      targets.cols() != net.output_dim()) {
    throw UsageError("targets must be (batch, C)");
  }
  trace.targets = targets;
  loss_and_grad(net.loss(), trace.logits, trace.targets, trace.loss,
                trace.loss_grad);
  return trace;
}

ForwardTrace forward(const Network& net, const ParameterSet& params,
                     const Batch& batch) {
  return forward_targets(net, params, batch.inputs, batch.targets);
}

GradientBundle zero_bundle(const Network& net) {
  GradientBundle bundle;
  for (std::size_t l : net.parameterized_layers()) {
    const auto [rows, cols] = net.grad_matrix_dims(l);
    bundle.layers.push_back(
        {Tensor({rows, cols}), net.layers()[l].neuron_axis()});
  }
  return bundle;
}

GradientBundle backward(const Network& net, const ParameterSet& params,
                        const ForwardTrace& trace, Tensor* input_grad) {
  if (trace.params_stamp != params.stamp()) {
    throw UsageError("stale forward trace: parameters changed since forward");
  }
  const auto& layers = net.layers();
  const std::size_t batch = trace.batch;
  GradientBundle bundle = zero_bundle(net);

  Tensor delta = trace.loss_grad;  // (B, C) = ∂(mean loss)/∂logits
  std::size_t param_idx = net.parameterized_layers().size();
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerSpec& spec = layers[li];
    const Tensor& in = trace.input_of(li);
    const bool need_input_delta = li > 0 || input_grad != nullptr;
    switch (spec.kind) {
      case LayerKind::FullyConnected: {
        const auto& p = params.layer(--param_idx);
        Tensor& mat = bundle.layers[param_idx].mat;
        const std::size_t k_dim = spec.fan_in, n_dim = spec.fan_out;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* in_row = in.data() + b * k_dim;
          const double* d_row = delta.data() + b * n_dim;
          for (std::size_t k = 0; k < k_dim; ++k) {
            double* g_row = mat.data() + k * n_dim;
            const double a = in_row[k];
            for (std::size_t n = 0; n < n_dim; ++n) {
              g_row[n] += a * d_row[n];
            }
          }
          if (spec.has_bias) {
            double* b_row = mat.data() + k_dim * n_dim;
            for (std::size_t n = 0; n < n_dim; ++n) {
              b_row[n] += d_row[n];
            }
          }
        }
        if (need_input_delta) {
          Tensor prev({batch, k_dim});
          for (std::size_t b = 0; b < batch; ++b) {
            const double* d_row = delta.data() + b * n_dim;
            double* p_row = prev.data() + b * k_dim;
            for (std::size_t k = 0; k < k_dim; ++k) {
              const double* w_row = p.weights.data() + k * n_dim;
              double s = 0.0;
              for (std::size_t n = 0; n < n_dim; ++n) {
                s += d_row[n] * w_row[n];
              }
              p_row[k] = s;
            }
          }
          delta = std::move(prev);
        }
        break;
      }
      case LayerKind::Conv2d: {
        const auto& p = params.layer(--param_idx);
        Tensor& mat = bundle.layers[param_idx].mat;
        const std::size_t ci = spec.in_channels, co = spec.out_channels;
        const std::size_t k = spec.kernel;
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t ho = h - k + 1, wo = w - k + 1;
        const std::size_t krn = ci * k * k;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < co; ++o) {
            const double* d_plane = delta.data() + (b * co + o) * ho * wo;
            double* g_row = mat.data() + o * (krn + 1);
            for (std::size_t i = 0; i < ci; ++i) {
              const double* in_plane = in.data() + (b * ci + i) * h * w;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  double s = 0.0;
                  for (std::size_t y = 0; y < ho; ++y) {
                    const double* in_row = in_plane + (y + u) * w + v;
                    const double* d_row = d_plane + y * wo;
                    for (std::size_t x = 0; x < wo; ++x) {
                      s += d_row[x] * in_row[x];
                    }
                  }
                  g_row[i * k * k + u * k + v] += s;
                }
              }
            }
            double bias_sum = 0.0;
            for (std::size_t i = 0; i < ho * wo; ++i) {
              bias_sum += d_plane[i];
            }
            g_row[krn] += bias_sum;
          }
        }
        if (need_input_delta) {
          Tensor prev(in.shape());
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < co; ++o) {
              const double* d_plane = delta.data() + (b * co + o) * ho * wo;
              for (std::size_t i = 0; i < ci; ++i) {
                double* p_plane = prev.data() + (b * ci + i) * h * w;
                const double* ker = p.weights.data() + (o * ci + i) * k * k;
                for (std::size_t u = 0; u < k; ++u) {
                  for (std::size_t v = 0; v < k; ++v) {
                    const double kw = ker[u * k + v];
                    for (std::size_t y = 0; y < ho; ++y) {
                      const double* d_row = d_plane + y * wo;
                      double* p_row = p_plane + (y + u) * w + v;
                      for (std::size_t x = 0; x < wo; ++x) {
                        p_row[x] += kw * d_row[x];
                      }
                    }
                  }
                }
              }
            }
          }
          delta = std::move(prev);
        }
        break;
      }
      case LayerKind::AvgPool: {
        const std::size_t c = in.shape()[1];
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t k = spec.kernel, s = spec.stride;
        const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
        const double inv = 1.0 / static_cast<double>(k * k);
        Tensor prev(in.shape());
        for (std::size_t bc = 0; bc < batch * c; ++bc) {
          const double* d_plane = delta.data() + bc * ho * wo;
          double* p_plane = prev.data() + bc * h * w;
          for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
              const double d = d_plane[y * wo + x] * inv;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  p_plane[(y * s + u) * w + x * s + v] += d;
                }
              }
            }
          }
        }
        delta = std::move(prev);
        break;
      }
      case LayerKind::MaxPool: {
        const std::size_t c = in.shape()[1];
        const std::size_t h = in.shape()[2], w = in.shape()[3];
        const std::size_t k = spec.kernel, s = spec.stride;
        const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
        const auto& argmax = trace.pool_argmax[li];
        Tensor prev(in.shape());
        for (std::size_t bc = 0; bc < batch * c; ++bc) {
          const double* d_plane = delta.data() + bc * ho * wo;
          double* p_plane = prev.data() + bc * h * w;
          for (std::size_t i = 0; i < ho * wo; ++i) {
            p_plane[argmax[bc * ho * wo + i]] += d_plane[i];
          }
        }
        delta = std::move(prev);
        break;
      }
      case LayerKind::Relu: {
        const Tensor& mask = trace.relu_mask[li];
        for (std::size_t i = 0; i < delta.size(); ++i) {
          delta[i] *= mask[i];
        }
        break;
      }
      case LayerKind::Sigmoid: {
        const Tensor& out = trace.outputs[li];
        for (std::size_t i = 0; i < delta.size(); ++i) {
          delta[i] *= out[i] * (1.0 - out[i]);
        }
        break;
      }
      case LayerKind::Flatten: {
        delta = delta.reshaped(in.shape());
        break;
      }
    }
  }
  if (input_grad != nullptr) {
    *input_grad = std::move(delta);
  }
  bundle.check_finite("gradient bundle");
  return bundle;
}

GradientBundle finite_difference_gradient(const Network& net,
                                          const ParameterSet& params,
                                          const Batch& batch, double h) {
  if (!(h > 0.0)) {
    throw UsageError("finite difference step must be positive");
  }
  ParameterSet probe = params;
  GradientBundle bundle = zero_bundle(net);
  const auto& param_layers = net.parameterized_layers();
  const auto loss_at = [&]() {
    return forward(net, probe, batch).loss;
  };
  for (std::size_t j = 0; j < param_layers.size(); ++j) {
    const LayerSpec& spec = net.layers()[param_layers[j]];
    Tensor& mat = bundle.layers[j].mat;
    auto probe_entry = [&](Tensor& t, std::size_t idx, double& slot) {
      const double saved = t[idx];
      t[idx] = saved + h;
      const double up = loss_at();
      t[idx] = saved - h;
      const double down = loss_at();
      t[idx] = saved;
      slot = (up - down) / (2.0 * h);
    };
    if (spec.kind == LayerKind::FullyConnected) {
      const std::size_t k_dim = spec.fan_in, n_dim = spec.fan_out;
      for (std::size_t k = 0; k < k_dim; ++k) {
        for (std::size_t n = 0; n < n_dim; ++n) {
          probe_entry(probe.mutable_layer(j).weights, k * n_dim + n,
                      mat.at(k, n));
        }
      }
      if (spec.has_bias) {
        for (std::size_t n = 0; n < n_dim; ++n) {
          probe_entry(probe.mutable_layer(j).bias, n, mat.at(k_dim, n));
        }
      }
    } else {
      const std::size_t krn = spec.in_channels * spec.kernel * spec.kernel;
      for (std::size_t o = 0; o < spec.out_channels; ++o) {
        for (std::size_t i = 0; i < krn; ++i) {
          probe_entry(probe.mutable_layer(j).weights, o * krn + i,
                      mat.at(o, i));
        }
        probe_entry(probe.mutable_layer(j).bias, o, mat.at(o, krn));
      }
    }
  }
  return bundle;
}

ParameterSet init_parameters(const Network& net, Rng rng) {
  std::vector<ParameterSet::LayerParams> layers;
  for (std::size_t l : net.parameterized_layers()) {
    const LayerSpec& spec = net.layers()[l];
    ParameterSet::LayerParams p;
    if (spec.kind == LayerKind::FullyConnected) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
      p.weights = Tensor({spec.fan_in, spec.fan_out});
      for (std::size_t i = 0; i < p.weights.size(); ++i) {
        p.weights[i] = rng.uniform(-limit, limit);
      }
      if (spec.has_bias) {
        p.bias = Tensor({spec.fan_out});
      }
    } else {
      const std::size_t k2 = spec.kernel * spec.kernel;
      const double limit = std::sqrt(
          6.0 / static_cast<double>((spec.in_channels + spec.out_channels) *
                                    k2));
      p.weights = Tensor(
          {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
      for (std::size_t i = 0; i < p.weights.size(); ++i) {
        p.weights[i] = rng.uniform(-limit, limit);
      }
      p.bias = Tensor({spec.out_channels});
    }
    layers.push_back(std::move(p));
  }
  return ParameterSet(std::move(layers));
}

void apply_delta(const Network& net, ParameterSet& params,
                 const GradientBundle& delta, double c) {
  const auto& param_layers = net.parameterized_layers();
  if (delta.layers.size() != param_layers.size()) {
    throw UsageError("bundle does not match network");
  }
  for (std::size_t j = 0; j < param_layers.size(); ++j) {
    const LayerSpec& spec = net.layers()[param_layers[j]];
    const Tensor& mat = delta.layers[j].mat;
    auto& p = params.mutable_layer(j);
    if (spec.kind == LayerKind::FullyConnected) {
      const std::size_t k_dim = spec.fan_in, n_dim = spec.fan_out;
      for (std::size_t i = 0; i < k_dim * n_dim; ++i) {
        p.weights[i] += c * mat[i];
      }
      if (spec.has_bias) {
        for (std::size_t n = 0; n < n_dim; ++n) {
          p.bias[n] += c * mat[k_dim * n_dim + n];
        }
      }
    } else {
      const std::size_t krn = spec.in_channels * spec.kernel * spec.kernel;
      for (std::size_t o = 0; o < spec.out_channels; ++o) {
        for (std::size_t i = 0; i < krn; ++i) {
          p.weights[o * krn + i] += c * mat.at(o, i);
        }
        p.bias[o] += c * mat.at(o, krn);
      }
    }
  }
}

GradientBundle params_as_bundle(const Network& net, const ParameterSet& p) {
  GradientBundle bundle = zero_bundle(net);
  const auto& param_layers = net.parameterized_layers();
  for (std::size_t j = 0; j < param_layers.size(); ++j) {
    const LayerSpec& spec = net.layers()[param_layers[j]];
    Tensor& mat = bundle.layers[j].mat;
    const auto& lp = p.layer(j);
    if (spec.kind == LayerKind::FullyConnected) {
      const std::size_t k_dim = spec.fan_in, n_dim = spec.fan_out;
      for (std::size_t i = 0; i < k_dim * n_dim; ++i) {
        mat[i] = lp.weights[i];
      }
      if (spec.has_bias) {
        for (std::size_t n = 0; n < n_dim; ++n) {
          mat[k_dim * n_dim + n] = lp.bias[n];
        }
      }
    } else {
      const std::size_t krn = spec.in_channels * spec.kernel * spec.kernel;
      for (std::size_t o = 0; o < spec.out_channels; ++o) {
        for (std::size_t i = 0; i < krn; ++i) {
          mat.at(o, i) = lp.weights[o * krn + i];
        }
        mat.at(o, krn) = lp.bias[o];
      }
    }
  }
  return bundle;
}

}  // namespace ssgdlab
