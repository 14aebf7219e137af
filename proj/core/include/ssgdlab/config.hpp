#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ssgdlab/network.hpp"
#include "ssgdlab/optim.hpp"

namespace ssgdlab {

enum class EvalProtocol : std::uint8_t { FullTest, PaperSampling };

/// One training run, fully specified. Parsed from a flat key=value file
/// with '#' comments; every key is validated before any work starts.
struct ExperimentConfig {
  std::filesystem::path dataset = "data/mnist";
  std::string model = "mlp";  // mlp | mlp:784-128-10 | lenet5
  std::string loss = "cross-entropy";  // cross-entropy | square
  optim::OptimizerSpec optimizer;
  std::size_t iterations = 2000;
  std::size_t eval_every = 500;
  EvalProtocol eval_protocol = EvalProtocol::FullTest;
  std::optional<double> epsilon;  // Laplace noise per basic gradient
  std::uint64_t seed = 1;
  std::filesystem::path out;  // metrics CSV; empty = stdout only

  /// Builds the configured network architecture.
  Network make_network() const;

  void validate() const;
};

ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Resolution order for the dataset directory: explicit flag, then the
/// SSGDLAB_DATA environment variable, then the config value.
std::filesystem::path resolve_dataset_dir(const ExperimentConfig& config,
                                          const std::string& flag_value);

}  // namespace ssgdlab
