#include "ssgdlab/attacks.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ssgdlab/errors.hpp"
#include "ssgdlab/optim.hpp"

namespace ssgdlab::attacks {

namespace {

// Entrywise relative error with a floor against cancellation-degenerate
// entries: |a-b| / max(|a|, |b|, 1e-6 * scale).
double rel_err(double a, double b, double scale) {
  const double denom =
      std::max({std::abs(a), std::abs(b), 1e-6 * scale, DBL_MIN});
  return std::abs(a - b) / denom;
}

}  // namespace

SingleNeuronInversion analytic_invert_single_neuron(
    const CapturedPayload& payload) {
  const Network& net = payload.network;
  const auto& layers = net.layers();
  const bool is_single_neuron =
      layers.size() == 2 && layers[0].kind == LayerKind::FullyConnected &&
      layers[0].fan_out == 1 && layers[0].has_bias &&
      layers[1].kind == LayerKind::Sigmoid &&
      net.loss() == LossKind::Square;
  if (!is_single_neuron) {
    throw UsageError(
        "analytic inversion requires a single sigmoid neuron with square "
        "loss");
  }
  if (payload.normalized) {
    throw UsageError("analytic inversion requires the raw gradient");
  }
  const Tensor& mat = payload.bundle.layers.at(0).mat;  // (d+1, 1)
  const std::size_t d = layers[0].fan_in;
  const double sigma = mat.at(d, 0);
  if (std::abs(sigma) <= 1e-12) {
    throw InversionError(
        "inversion undefined: bias gradient sigma vanishes");
  }
  Tensor x({d});
  for (std::size_t k = 0; k < d; ++k) {
    x[k] = mat.at(k, 0) / sigma;
  }
  // With x known, sigma = 2(h - y) f'(z) pins down y.
  const auto& p = payload.params.layer(0);
  double z = p.bias[0];
  for (std::size_t k = 0; k < d; ++k) {
    z += x[k] * p.weights[k];
  }
  const double h = sigmoid_value(z);
  const double fprime = h * (1.0 - h);
  const double y = h - sigma / (2.0 * fprime);
  return {std::move(x), y};
}

std::pair<std::vector<double>, double> multi_sample_neuron_gradient(
    std::span<const Tensor> inputs, std::span<const double> targets,
    const Tensor& weights, double bias) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw UsageError("need one target per input sample");
  }
  const std::size_t d = weights.size();
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  std::vector<double> sigma_k(d, 0.0);
  double sigma = 0.0;
  // Mirrors the op order of forward/backward exactly so that n = 1
  // reproduces backward() bit for bit.
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const Tensor& x = inputs[j];
    if (x.size() != d) {
      throw UsageError("sample dimension does not match neuron");
    }
    double z = bias;
    for (std::size_t k = 0; k < d; ++k) {
      z += x[k] * weights[k];
    }
    const double h = sigmoid_value(z);
    const double gbar = 2.0 * (h - targets[j]) * inv_n;
    const double delta = gbar * (h * (1.0 - h));
    for (std::size_t k = 0; k < d; ++k) {
      sigma_k[k] += x[k] * delta;
    }
    sigma += delta;
  }
  return {std::move(sigma_k), sigma};
}

FactorizationCheck verify_factorization(const Network& net,
                                        const ParameterSet& params,
                                        const Sample& sample,
                                        std::size_t layer, double tau) {
  for (const LayerSpec& spec : net.layers()) {
    const bool ok =
        (spec.kind == LayerKind::FullyConnected && !spec.has_bias) ||
        spec.kind == LayerKind::Relu;
    if (!ok) {
      throw UsageError(
          "factorization check requires a bias-free relu MLP (offending "
          "layer: " +
          to_string(spec.kind) + ")");
    }
  }
  const auto& param_layers = net.parameterized_layers();
  if (layer >= param_layers.size()) {
    throw UsageError("layer index out of range");
  }
  const Sample samples[1] = {sample};
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  const GradientBundle bundle = backward(net, params, trace);

  const std::size_t li = param_layers[layer];
  const LayerSpec& spec = net.layers()[li];
  const Tensor& a_in = trace.input_of(li);  // (1, d_in)
  const std::size_t d_in = spec.fan_in;
  const std::size_t d_out = spec.fan_out;
  const std::size_t c_dim = net.output_dim();
  const auto param_ordinal = [&](std::size_t layer_index) {
    return static_cast<std::size_t>(
        std::lower_bound(param_layers.begin(), param_layers.end(),
                         layer_index) -
        param_layers.begin());
  };

  // Right-hand side of the factorization: sum over classes c of
  // gbar_c * a^i * (chain of W^T and activation patterns back to layer i).
  Tensor chain_mat({d_in, d_out});
  for (std::size_t c = 0; c < c_dim; ++c) {
    std::vector<double> v(c_dim, 0.0);
    v[c] = 1.0;
    for (std::size_t l = net.layers().size(); l-- > li + 1;) {
      const LayerSpec& cur = net.layers()[l];
      if (cur.kind == LayerKind::Relu) {
        const Tensor& mask = trace.relu_mask[l];
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] *= mask[k];
        }
      } else {
        const Tensor& w = params.layer(param_ordinal(l)).weights;
        std::vector<double> prev(cur.fan_in, 0.0);
        for (std::size_t k = 0; k < cur.fan_in; ++k) {
          double s = 0.0;
          for (std::size_t n = 0; n < cur.fan_out; ++n) {
            s += w[k * cur.fan_out + n] * v[n];
          }
          prev[k] = s;
        }
        v = std::move(prev);
      }
    }
    const double gc = trace.loss_grad.at(0, c);
    for (std::size_t ki = 0; ki < d_in; ++ki) {
      const double a = a_in[ki];
      for (std::size_t ko = 0; ko < d_out; ++ko) {
        chain_mat.at(ki, ko) += gc * a * v[ko];
      }
    }
  }

  FactorizationCheck check;
  const Tensor& grad_mat = bundle.layers[layer].mat;
  const double scale = grad_mat.max_abs();
  for (std::size_t i = 0; i < grad_mat.size(); ++i) {
    check.chain_max_rel =
        std::max(check.chain_max_rel, rel_err(chain_mat[i], grad_mat[i], scale));
  }

  // Per-neuron normalization is exactly a right-multiplication by the
  // diagonal of reciprocal modulus lengths; invert it where the modulus
  // exceeds the guard.
  const GradientBundle unit = optim::normalize_per_neuron(bundle, tau);
  const LayerGrad& raw = bundle.layers[layer];
  const LayerGrad& nrm = unit.layers[layer];
  for (std::size_t k = 0; k < raw.neuron_count(); ++k) {
    const double mu = raw.neuron_norm(k);
    if (mu < tau) {
      continue;
    }
    check.unit_norm_max_err = std::max(check.unit_norm_max_err,
                                       std::abs(nrm.neuron_norm(k) - 1.0));
    for (std::size_t i = 0; i < raw.neuron_dim(); ++i) {
      check.recovery_max_rel =
          std::max(check.recovery_max_rel,
                   rel_err(nrm.neuron_entry(k, i) * mu,
                           raw.neuron_entry(k, i), scale));
    }
  }
  return check;
}

int recover_label(const CapturedPayload& payload) {
  if (payload.network.loss() != LossKind::SoftmaxCrossEntropy) {
    throw UsageError("label recovery requires a cross-entropy model");
  }
  const LayerGrad& last = payload.bundle.layers.back();
  if (last.axis != NeuronAxis::Column) {
    throw UsageError("label recovery requires a fully-connected output layer");
  }
  const std::size_t c_dim = last.neuron_count();
  int negative = -1;
  int negative_count = 0;
  for (std::size_t c = 0; c < c_dim; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < last.neuron_dim(); ++i) {
      s += last.neuron_entry(c, i);
    }
    if (s < 0.0) {
      negative = static_cast<int>(c);
      ++negative_count;
    }
  }
  if (negative_count != 1) {
    throw InversionError("label unrecoverable: " +
                         std::to_string(negative_count) +
                         " classes with negative gradient sign");
  }
  return negative;
}

namespace {

// d/dg of the matching distance, with the per-neuron normalization chain
// rule applied when the payload is normalized. Returns the distance too.
double distance_and_grad(const GradientBundle& g,
                         const CapturedPayload& payload, MatchDistance dist,
                         double tau, GradientBundle& grad_out) {
  const GradientBundle* candidate = &g;
  GradientBundle unit;
  if (payload.normalized) {
    unit = optim::normalize_per_neuron(g, tau);
    candidate = &unit;
  }
  double distance;
  GradientBundle dcand = *candidate;  // gradient w.r.t. the candidate
  if (dist == MatchDistance::SquaredL2) {
    distance = candidate->squared_distance(payload.bundle);
    for (std::size_t l = 0; l < dcand.layers.size(); ++l) {
      auto& d = dcand.layers[l].mat.values();
      const auto& c = candidate->layers[l].mat.values();
      const auto& t = payload.bundle.layers[l].mat.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = 2.0 * (c[i] - t[i]);
      }
    }
  } else {
    const double gg = candidate->squared_l2();
    const double tt = payload.bundle.squared_l2();
    if (gg <= 0.0 || tt <= 0.0) {
      distance = 1.0;
      for (auto& layer : dcand.layers) {
        layer.mat.fill(0.0);
      }
    } else {
      const double gt = candidate->dot(payload.bundle);
      const double ng = std::sqrt(gg), nt = std::sqrt(tt);
      distance = 1.0 - gt / (ng * nt);
      for (std::size_t l = 0; l < dcand.layers.size(); ++l) {
        auto& d = dcand.layers[l].mat.values();
        const auto& c = candidate->layers[l].mat.values();
        const auto& t = payload.bundle.layers[l].mat.values();
        for (std::size_t i = 0; i < d.size(); ++i) {
          d[i] = -(t[i] / (ng * nt) - gt * c[i] / (gg * ng * nt));
        }
      }
    }
  }
  if (!payload.normalized) {
    grad_out = std::move(dcand);
    return distance;
  }
  // Pull back through v -> v/|v|: J^T u = (u - (v_hat . u) v_hat) / |v|.
  grad_out = g;
  for (std::size_t l = 0; l < grad_out.layers.size(); ++l) {
    LayerGrad& out = grad_out.layers[l];
    const LayerGrad& raw = g.layers[l];
    const LayerGrad& u = dcand.layers[l];
    const LayerGrad& hat = unit.layers[l];
    for (std::size_t k = 0; k < out.neuron_count(); ++k) {
      const double mu = raw.neuron_norm(k);
      if (mu < tau) {
        for (std::size_t i = 0; i < out.neuron_dim(); ++i) {
          out.neuron_entry(k, i) = 0.0;
        }
        continue;
      }
      double dot = 0.0;
      for (std::size_t i = 0; i < out.neuron_dim(); ++i) {
        dot += hat.neuron_entry(k, i) * u.neuron_entry(k, i);
      }
      for (std::size_t i = 0; i < out.neuron_dim(); ++i) {
        out.neuron_entry(k, i) =
            (u.neuron_entry(k, i) - dot * hat.neuron_entry(k, i)) / mu;
      }
    }
  }
  return distance;
}

struct AdamBuf {
  std::vector<double> m, v;
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamBuf(std::size_t n, double rate)
      : m(n, 0.0), v(n, 0.0), lr(rate) {}

  void update(std::span<double> x, std::span<const double> g,
              std::size_t t1) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t1));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t1));
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

Tensor row_softmax(const std::vector<double>& logits) {
  Tensor t({1, logits.size()});
  double m = logits[0];
  for (double z : logits) {
    m = std::max(m, z);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    t[c] = std::exp(logits[c] - m);
    sum += t[c];
  }
  for (std::size_t c = 0; c < logits.size(); ++c) {
    t[c] /= sum;
  }
  return t;
}

}  // namespace

double matching_distance(const GradientBundle& candidate,
                         const CapturedPayload& payload, MatchDistance dist,
                         double tau) {
  GradientBundle unused;
  return distance_and_grad(candidate, payload, dist, tau, unused);
}

AttackReport gradient_matching_attack(const CapturedPayload& payload,
                                      const Sample& truth,
                                      const MatchConfig& config, Rng rng) {
  if (config.iterations == 0) {
    throw UsageError("attack iteration budget must be positive");
  }
  const Network& net = payload.network;
  if (net.loss() != LossKind::SoftmaxCrossEntropy) {
    throw UsageError("gradient matching expects a cross-entropy model");
  }
  const std::size_t c_dim = net.output_dim();
  const std::size_t in_size = net.input_size();
  const double tau = 1e-12;

  AttackReport report;
  report.mode = config.mode == MatchMode::Idlg ? "idlg" : "dlg";
  report.seed = rng.seed();
  report.label_true = truth.label;

  // Dummy input, i.i.d. uniform [0,1).
  Tensor x({1, in_size});
  for (std::size_t i = 0; i < in_size; ++i) {
    x[i] = rng.uniform01();
  }

  // iDLG pins the label analytically when the sign pattern allows it;
  // otherwise fall back to joint soft-label optimization.
  bool label_fixed = false;
  int fixed_label = -1;
  if (config.mode == MatchMode::Idlg) {
    try {
      fixed_label = recover_label(payload);
      label_fixed = true;
    } catch (const InversionError&) {
      label_fixed = false;
    }
  }
  std::vector<double> label_logits(c_dim, 0.0);
  if (!label_fixed) {
    for (double& v : label_logits) {
      v = rng.uniform01();
    }
  }

  Tensor targets;
  if (label_fixed) {
    targets = Tensor({1, c_dim});
    targets[static_cast<std::size_t>(fixed_label)] = 1.0;
  }

  AdamBuf x_opt(in_size, config.lr);
  AdamBuf label_opt(c_dim, config.lr);
  const double theta_scale = 1.0 + params_as_bundle(net, payload.params)
                                       .max_abs();

  double initial_distance = -1.0;
  double distance = -1.0;
  bool aborted = false;
  std::size_t steps = 0;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    try {
      if (!label_fixed) {
        targets = row_softmax(label_logits);
      }
      const ForwardTrace trace =
          forward_targets(net, payload.params, x, targets);
      const GradientBundle g = backward(net, payload.params, trace);
      GradientBundle dg;  // d(distance)/d(raw gradient)
      distance = distance_and_grad(g, payload, config.distance, tau, dg);
      if (it == 0) {
        initial_distance = distance;
      }
      if (!std::isfinite(distance)) {
        aborted = true;
        break;
      }
      const double rmax = dg.max_abs();
      if (rmax > 0.0) {
        // d(distance)/dx = d2L/(dx dtheta) . dg, by central difference
        // along the parameter direction dg.
        const double eps = 1e-6 * theta_scale / rmax;
        ParameterSet plus = payload.params;
        apply_delta(net, plus, dg, eps);
        ParameterSet minus = payload.params;
        apply_delta(net, minus, dg, -eps);

        Tensor gx_plus, gx_minus;
        const ForwardTrace tp = forward_targets(net, plus, x, targets);
        backward(net, plus, tp, &gx_plus);
        const ForwardTrace tm = forward_targets(net, minus, x, targets);
        backward(net, minus, tm, &gx_minus);

        std::vector<double> dx(in_size);
        for (std::size_t i = 0; i < in_size; ++i) {
          dx[i] = (gx_plus[i] - gx_minus[i]) / (2.0 * eps);
        }
        x_opt.update(std::span<double>(x.values()), dx, it + 1);

        if (!label_fixed) {
          // dL/dtarget_c = -z_c up to a constant the softmax Jacobian
          // kills; pull through t_a(w_a - <t, w>).
          std::vector<double> dlabel(c_dim);
          auto label_grad = [&](const ForwardTrace& tr, double sgn) {
            double tw = 0.0;
            for (std::size_t c = 0; c < c_dim; ++c) {
              tw += targets[c] * -tr.logits[c];
            }
            for (std::size_t c = 0; c < c_dim; ++c) {
              dlabel[c] += sgn * targets[c] * (-tr.logits[c] - tw);
            }
          };
          std::fill(dlabel.begin(), dlabel.end(), 0.0);
          label_grad(tp, 1.0 / (2.0 * eps));
          label_grad(tm, -1.0 / (2.0 * eps));
          label_opt.update(std::span<double>(label_logits), dlabel, it + 1);
        }
      }
      steps = it + 1;
    } catch (const NumericError&) {
      aborted = true;
      break;
    }
  }

  // Score the final dummy.
  try {
    if (!label_fixed) {
      targets = row_softmax(label_logits);
    }
    const ForwardTrace trace =
        forward_targets(net, payload.params, x, targets);
    const GradientBundle g = backward(net, payload.params, trace);
    distance = matching_distance(g, payload, config.distance, tau);
  } catch (const NumericError&) {
    aborted = true;
  }

  double mse = 0.0;
  for (std::size_t i = 0; i < in_size; ++i) {
    const double d = x[i] - truth.input[i];
    mse += d * d;
  }
  mse /= static_cast<double>(in_size);

  report.reconstructed = x.reshaped({in_size});
  report.mse = mse;
  report.iterations = steps;
  report.converged = !aborted && std::isfinite(distance) &&
                     (initial_distance <= 0.0 || distance <= initial_distance);
  if (label_fixed) {
    report.label_recovered = fixed_label;
  } else {
    std::size_t best = 0;
    for (std::size_t c = 1; c < c_dim; ++c) {
      if (label_logits[c] > label_logits[best]) {
        best = c;
      }
    }
    report.label_recovered = static_cast<int>(best);
  }
  return report;
}

CollusionFamily::CollusionFamily(Tensor unit, Tensor partial)
    : unit_(std::move(unit)), partial_(std::move(partial)) {}

Tensor CollusionFamily::member(double s) const {
  if (!(s > 0.0)) {
    throw UsageError("collusion family is parameterized over s > 0");
  }
  Tensor g = unit_;
  g.scale(s);
  g.add_scaled(partial_, -1.0);
  return g;
}

double CollusionFamily::payload_deviation(double s) const {
  Tensor sum = member(s);
  sum.add_scaled(partial_, 1.0);
  const double norm = std::sqrt(sum.squared_l2());
  if (norm == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  double dev = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    dev = std::max(dev, std::abs(sum[i] / norm - unit_[i]));
  }
  return dev;
}

CollusionFamily collusion_consistency(const Tensor& unit,
                                      const Tensor& partial_sum) {
  if (!unit.same_shape(partial_sum)) {
    throw UsageError("unit payload and partial sum must have the same shape");
  }
  const double norm = std::sqrt(unit.squared_l2());
  if (std::abs(norm - 1.0) > 1e-9) {
    throw UsageError("payload direction must be a unit vector");
  }
  return CollusionFamily(unit, partial_sum);
}

void write_pgm(const std::filesystem::path& path, const Tensor& image,
               std::size_t rows, std::size_t cols) {
  if (image.size() != rows * cols) {
    throw UsageError("image size does not match PGM dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, image[i]));
    out.put(static_cast<char>(std::lround(v * 255.0)));
  }
  if (!out) {
    throw DataError("write failed for " + path.string());
  }
}

std::string attack_report_csv_header() {
  return "mode,seed,iterations,mse,label_true,label_recovered,converged";
}

std::string attack_report_csv_row(const AttackReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%llu,%zu,%.6g,%d,%d,%d",
                r.mode.c_str(), static_cast<unsigned long long>(r.seed),
                r.iterations, r.mse, r.label_true, r.label_recovered,
                r.converged ? 1 : 0);
  return buf;
}

}  // namespace ssgdlab::attacks
