#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssgdlab/config.hpp"
#include "ssgdlab/mnist.hpp"
#include "ssgdlab/nn.hpp"

namespace ssgdlab {

struct MetricsRow {
  std::size_t iteration = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double mean_loss = 0.0;
  double wall_ms = 0.0;  // diagnostic only; not part of the CSV (see README)
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  ParameterSet params;
};

/// Argmax accuracy. The paper protocol averages ten draws of 1000 random
/// samples; full-test scans every sample.
double evaluate(const Network& net, const ParameterSet& params,
                std::span<const Sample> samples, EvalProtocol protocol,
                Rng rng);

/// Fraction of predictions equal to the label over all `samples`.
double accuracy_full(const Network& net, const ParameterSet& params,
                     std::span<const Sample> samples);

/// Runs one configured experiment on preloaded data. Deterministic under
/// (config, seed): the emitted CSV bytes are identical across runs.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::vector<Sample>& train,
                                const std::vector<Sample>& test,
                                std::ostream* csv_out,
                                std::ostream* log_out = nullptr);

/// Loads the dataset from `data_dir` and runs, writing the CSV to
/// config.out (or stdout when empty).
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& data_dir);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

/// Six-significant-digit formatting used by every CSV emitter.
std::string format_g6(double v);

}  // namespace ssgdlab
