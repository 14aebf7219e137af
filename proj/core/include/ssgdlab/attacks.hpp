#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "ssgdlab/errors.hpp"
#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/nn.hpp"
#include "ssgdlab/rng.hpp"

namespace ssgdlab::attacks {

/// A gradient as observed on the wire, together with everything the
/// honest-but-curious adversary knows: the architecture, the parameter
/// snapshot at capture time, and whether the payload was per-neuron
/// normalized.
struct CapturedPayload {
  Network network;
  ParameterSet params;
  GradientBundle bundle;
  bool normalized = false;
};

struct AttackReport {
  std::string mode;
  std::uint64_t seed = 0;
  Tensor reconstructed;
  int label_true = -1;
  int label_recovered = -1;
  double mse = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Raised when a payload admits no inversion (vanishing bias gradient,
/// ambiguous label sign pattern).
class InversionError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct SingleNeuronInversion {
  Tensor x;
  double y = 0.0;
};

/// Closed-form recovery of (x, y) from the raw gradient of a single sigmoid
/// neuron trained with square loss on one sample: x_k = sigma_k / sigma,
/// and y from the bias-gradient equation. Exact up to rounding.
SingleNeuronInversion analytic_invert_single_neuron(
    const CapturedPayload& payload);

/// The summed per-sample gradient of one sigmoid neuron over n samples,
/// under the same mean-loss convention as backward(): returns
/// (sigma_1..sigma_d, sigma). For n = 1 this equals the backward gradient
/// bit for bit; for n >= 2 the ratios sigma_k/sigma are sample mixtures
/// that no longer identify any x^j.
std::pair<std::vector<double>, double> multi_sample_neuron_gradient(
    std::span<const Tensor> inputs, std::span<const double> targets,
    const Tensor& weights, double bias);

struct FactorizationCheck {
  double chain_max_rel = 0.0;      // product-chain identity vs backprop
  double unit_norm_max_err = 0.0;  // normalized columns vs norm 1
  double recovery_max_rel = 0.0;   // normalized * modulus vs raw
  double max_discrepancy() const {
    return std::max(chain_max_rel,
                    std::max(unit_norm_max_err, recovery_max_rel));
  }
};

/// Verifies, for a bias-free relu MLP and a single sample, that the
/// backprop gradient of layer `layer` equals the product-chain expansion
/// built from the forward trace (activation patterns, weights, and the
/// output-loss vector), and that the per-neuron-normalized bundle is the
/// raw bundle right-multiplied by the diagonal of reciprocal modulus
/// lengths. Throws UsageError for models with biases or non-relu
/// activations.
FactorizationCheck verify_factorization(const Network& net,
                                        const ParameterSet& params,
                                        const Sample& sample,
                                        std::size_t layer, double tau = 1e-12);

/// iDLG label recovery: the unique class whose last-layer gradient column
/// sums negative. Works on raw or per-neuron-normalized single-sample
/// cross-entropy payloads (positive rescaling preserves the signs); throws
/// InversionError when no unique negative class exists (multi-sample mixed
/// labels, dead network).
int recover_label(const CapturedPayload& payload);

enum class MatchMode : std::uint8_t { Dlg, Idlg };
enum class MatchDistance : std::uint8_t { SquaredL2, Cosine };

struct MatchConfig {
  std::size_t iterations = 300;
  double lr = 0.1;
  MatchMode mode = MatchMode::Dlg;
  MatchDistance distance = MatchDistance::SquaredL2;
};

/// Distance between a candidate raw gradient and the payload, applying the
/// payload's protocol (per-neuron normalization) to the candidate first.
/// This is the objective the gradient-matching attack minimizes.
double matching_distance(const GradientBundle& candidate,
                         const CapturedPayload& payload,
                         MatchDistance distance = MatchDistance::SquaredL2,
                         double tau = 1e-12);

/// DLG/iDLG reconstruction: optimizes a dummy input (and, for dlg, a soft
/// label) to match the captured gradient. `truth` is used only to score the
/// reconstruction. Divergence is reported as non-converged, not thrown.
AttackReport gradient_matching_attack(const CapturedPayload& payload,
                                      const Sample& truth,
                                      const MatchConfig& config, Rng rng);

/// The one-parameter family of colluding completions: given a unit payload
/// direction and the known partial sum of n-1 gradients, every
/// member(s) = s * unit - partial, s > 0, reproduces the observed payload.
class CollusionFamily {
 public:
  CollusionFamily(Tensor unit, Tensor partial);
  Tensor member(double s) const;
  /// Max abs deviation between normalize(partial + member(s)) and the unit
  /// payload; ~0 for every s > 0.
  double payload_deviation(double s) const;

 private:
  Tensor unit_;
  Tensor partial_;
};

/// Validates that `unit` has norm 1 (within 1e-9) and returns the family.
CollusionFamily collusion_consistency(const Tensor& unit,
                                      const Tensor& partial_sum);

/// Binary 8-bit PGM (P5); values clamped to [0,1] and scaled by 255 with
/// round-to-nearest.
void write_pgm(const std::filesystem::path& path, const Tensor& image,
               std::size_t rows, std::size_t cols);

std::string attack_report_csv_header();
std::string attack_report_csv_row(const AttackReport& report);

}  // namespace ssgdlab::attacks
