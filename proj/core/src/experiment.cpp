#include "ssgdlab/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "ssgdlab/batching.hpp"
#include "ssgdlab/errors.hpp"
#include "ssgdlab/privacy.hpp"

namespace ssgdlab {
namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t c_dim = logits.cols();
  const double* z = logits.data() + row * c_dim;
  std::size_t best = 0;
  for (std::size_t c = 1; c < c_dim; ++c) {
    if (z[c] > z[best]) {
      best = c;
    }
  }
  return best;
}

double accuracy_of_indices(const Network& net, const ParameterSet& params,
                           std::span<const Sample> samples,
                           std::span<const std::uint32_t> indices) {
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  std::vector<Sample> chunk;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, indices.size() - start);
    chunk.clear();
    for (std::size_t i = 0; i < count; ++i) {
      chunk.push_back(samples[indices[start + i]]);
    }
    const Batch batch = make_batch(net, chunk);
    const ForwardTrace trace = forward(net, params, batch);
    for (std::size_t i = 0; i < count; ++i) {
      if (argmax_row(trace.logits, i) ==
          static_cast<std::size_t>(chunk[i].label)) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace

double accuracy_full(const Network& net, const ParameterSet& params,
                     std::span<const Sample> samples) {
  if (samples.empty()) {
    throw UsageError("evaluate on an empty sample set");
  }
  std::vector<std::uint32_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i] = static_cast<std::uint32_t>(i);
  }
  return accuracy_of_indices(net, params, samples, all);
}

double evaluate(const Network& net, const ParameterSet& params,
                std::span<const Sample> samples, EvalProtocol protocol,
                Rng rng) {
  if (samples.empty()) {
    throw UsageError("evaluate on an empty sample set");
  }
  if (protocol == EvalProtocol::FullTest) {
    return accuracy_full(net, params, samples);
  }
  // Paper protocol: ten experiments, 1000 random samples each (without
  // replacement within a draw), averaged.
  constexpr std::size_t kDraws = 10;
  const std::size_t per_draw = std::min<std::size_t>(1000, samples.size());
  std::vector<std::uint32_t> pool(samples.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pool[i] = static_cast<std::uint32_t>(i);
  }
  double total = 0.0;
  for (std::size_t d = 0; d < kDraws; ++d) {
    // Partial Fisher-Yates: the first per_draw entries become the draw.
    for (std::size_t i = 0; i < per_draw; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    total += accuracy_of_indices(
        net, params, samples,
        std::span<const std::uint32_t>(pool.data(), per_draw));
  }
  return total / static_cast<double>(kDraws);
}

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string metrics_csv_header() {
  return "iteration,train_accuracy,test_accuracy,mean_loss";
}

std::string metrics_csv_row(const MetricsRow& row) {
  return std::to_string(row.iteration) + "," + format_g6(row.train_accuracy) +
         "," + format_g6(row.test_accuracy) + "," + format_g6(row.mean_loss);
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::vector<Sample>& train,
                                const std::vector<Sample>& test,
                                std::ostream* csv_out, std::ostream* log_out) {
  config.validate();
  const Network net = config.make_network();
  const optim::OptimizerSpec& spec = config.optimizer;
  if (spec.n * spec.m > train.size()) {
    throw ConfigError("n*m exceeds the training set size");
  }

  const Rng root(config.seed);
  ParameterSet params = init_parameters(net, root.substream("init"));
  optim::OptimizerState state;
  EpochStream stream(train.size(), root.substream("batch"));
  Rng eval_rng = root.substream("eval");

  if (csv_out != nullptr) {
    *csv_out << metrics_csv_header() << "\n";
  }

  ExperimentResult result;
  std::vector<Sample> chunk(spec.n);
  std::vector<GradientBundle> bundles;
  double loss_accum = 0.0;
  std::size_t loss_count = 0;
  auto window_start = std::chrono::steady_clock::now();

  for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
    bundles.clear();
    for (std::size_t j = 0; j < spec.m; ++j) {
      const std::vector<std::uint32_t> idx = stream.next(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) {
        chunk[i] = train[idx[i]];
      }
      const Batch batch = make_batch(net, chunk);
      const ForwardTrace trace = forward(net, params, batch);
      loss_accum += trace.loss;
      ++loss_count;
      GradientBundle bundle = backward(net, params, trace);
      if (config.epsilon) {
        // Noise on the summed batch gradient, then back to the mean.
        const double n = static_cast<double>(spec.n);
        Rng noise = root.substream("noise", iter, j);
        bundle = privacy::perturb(bundle.scaled(n), *config.epsilon, noise)
                     .scaled(1.0 / n);
      }
      bundles.push_back(std::move(bundle));
    }
    if (spec.uses_unit_gradients()) {
      optim::step(spec, state, net, params, bundles);
    } else {
      const GradientBundle combined = mean_of(bundles);
      optim::step(spec, state, net, params, {&combined, 1});
    }

    if (iter % config.eval_every == 0 || iter == config.iterations) {
      MetricsRow row;
      row.iteration = iter;
      row.train_accuracy =
          evaluate(net, params, train, config.eval_protocol, eval_rng);
      row.test_accuracy =
          evaluate(net, params, test, config.eval_protocol, eval_rng);
      row.mean_loss = loss_count > 0
                          ? loss_accum / static_cast<double>(loss_count)
                          : 0.0;
      const auto now = std::chrono::steady_clock::now();
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        now - window_start)
                        .count();
      window_start = now;
      loss_accum = 0.0;
      loss_count = 0;
      if (csv_out != nullptr) {
        *csv_out << metrics_csv_row(row) << "\n";
      }
      if (log_out != nullptr) {
        *log_out << "iter " << row.iteration << "  train "
                 << format_g6(row.train_accuracy) << "  test "
                 << format_g6(row.test_accuracy) << "  loss "
                 << format_g6(row.mean_loss) << "  (" << format_g6(row.wall_ms)
                 << " ms)\n";
      }
      if (result.rows.empty() || row.iteration != result.rows.back().iteration) {
        result.rows.push_back(row);
      }
    }
  }

  result.final_train_accuracy = result.rows.back().train_accuracy;
  result.final_test_accuracy = result.rows.back().test_accuracy;
  result.params = std::move(params);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& data_dir) {
  const MnistData data = load_mnist(data_dir);
  std::ofstream file;
  std::ostream* csv = &std::cout;
  if (!config.out.empty()) {
    if (config.out.has_parent_path()) {
      std::filesystem::create_directories(config.out.parent_path());
    }
    file.open(config.out);
    if (!file) {
      throw DataError("cannot open " + config.out.string() + " for writing");
    }
    csv = &file;
  }
  return run_experiment(config, data.train, data.test, csv, &std::cerr);
}

}  // namespace ssgdlab
