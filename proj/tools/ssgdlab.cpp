// ssgdlab command line: train experiments, reproduce the paper-style
// tables, run gradient-leakage attacks, and drive the federated simulator.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ssgdlab/capture.hpp"
#include "ssgdlab/config.hpp"
#include "ssgdlab/errors.hpp"
#include "ssgdlab/experiment.hpp"
#include "ssgdlab/fedsim.hpp"
#include "ssgdlab/tables.hpp"

namespace {

using namespace ssgdlab;

std::filesystem::path dataset_dir_or_default(const std::string& flag) {
  ExperimentConfig defaults;
  return resolve_dataset_dir(defaults, flag);
}

int cmd_train(const std::string& config_path, const std::string& data_flag) {
  ExperimentConfig config = parse_config_file(config_path);
  const std::filesystem::path dir = resolve_dataset_dir(config, data_flag);
  const ExperimentResult result = run_experiment(config, dir);
  std::cerr << "final train accuracy " << format_g6(result.final_train_accuracy)
            << ", test accuracy " << format_g6(result.final_test_accuracy)
            << "\n";
  return 0;
}

int cmd_table(const std::string& preset, const std::string& scale_name,
              const std::string& out_dir, const std::string& data_flag,
              std::size_t jobs, bool list) {
  if (list) {
    for (const std::string& name : tables::preset_names()) {
      std::cout << name << "\n";
    }
    return 0;
  }
  const tables::Scale scale =
      scale_name == "full" ? tables::Scale::Full : tables::Scale::Desk;
  const MnistData data = load_mnist(dataset_dir_or_default(data_flag));
  if (tables::is_attack_preset(preset)) {
    tables::run_attack_preset(preset, scale, data, out_dir, &std::cerr);
    return 0;
  }
  const tables::TablePlan plan = tables::table_plan(preset, scale);
  std::cerr << plan.title << " (" << plan.cells.size() << " cells)\n";
  const auto values = tables::run_table(plan, data, out_dir, jobs, &std::cerr);
  std::cout << tables::matrix_csv(plan, values);
  return 0;
}

int cmd_attack(const std::string& mode, const std::string& payload_path,
               const std::string& out_dir, std::size_t iterations, double lr,
               const std::string& distance) {
  const Capture capture = load_capture(payload_path);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);

  attacks::AttackReport report;
  if (mode == "analytic") {
    const attacks::SingleNeuronInversion inv =
        attacks::analytic_invert_single_neuron(capture.payload);
    report.mode = "analytic";
    report.label_true = capture.truth.label;
    report.label_recovered = static_cast<int>(std::lround(inv.y));
    report.iterations = 0;
    report.converged = true;
    report.reconstructed = inv.x;
    double mse = 0.0;
    for (std::size_t i = 0; i < inv.x.size(); ++i) {
      const double d = inv.x[i] - capture.truth.input[i];
      mse += d * d;
    }
    report.mse = mse / static_cast<double>(inv.x.size());
    std::cerr << "recovered y = " << format_g6(inv.y) << ", input mse = "
              << format_g6(report.mse) << "\n";
  } else {
    attacks::MatchConfig config;
    config.mode =
        mode == "idlg" ? attacks::MatchMode::Idlg : attacks::MatchMode::Dlg;
    config.iterations = iterations;
    config.lr = lr;
    config.distance = distance == "cosine" ? attacks::MatchDistance::Cosine
                                           : attacks::MatchDistance::SquaredL2;
    report = attacks::gradient_matching_attack(capture.payload, capture.truth,
                                               config, Rng(capture.round * 131 +
                                                           capture.worker));
    std::cerr << "mse " << format_g6(report.mse) << ", label "
              << report.label_recovered << " (true " << report.label_true
              << ")\n";
  }

  if (report.reconstructed.size() == 784) {
    attacks::write_pgm(out / (mode + "_reconstruction.pgm"),
                       report.reconstructed, 28, 28);
    attacks::write_pgm(out / "truth.pgm",
                       capture.truth.input.reshaped({784}), 28, 28);
  }
  std::ofstream csv(out / "report.csv");
  csv << attacks::attack_report_csv_header() << "\n"
      << attacks::attack_report_csv_row(report) << "\n";
  std::cout << attacks::attack_report_csv_row(report) << "\n";
  return 0;
}

int cmd_fedsim(std::size_t workers, const std::string& mode_name,
               double epsilon, std::size_t rounds, std::size_t n,
               std::uint64_t seed, const std::string& data_flag,
               const std::string& model, double lr,
               const std::string& algorithm, const std::string& out_log,
               const std::string& capture_spec,
               const std::string& capture_out) {
  const MnistData data = load_mnist(dataset_dir_or_default(data_flag));

  fedsim::SimConfig config;
  config.workers = workers;
  config.rounds = rounds;
  config.n = n;
  config.mode = fedsim::protection_from_string(mode_name);
  config.epsilon = epsilon;
  config.seed = seed;
  config.server.algorithm = config.mode == fedsim::Protection::Unit
                                ? optim::Algorithm::Ssgd
                                : optim::Algorithm::Mbgd;
  if (!algorithm.empty()) {
    config.server.algorithm = optim::algorithm_from_string(algorithm);
  }
  config.server.lr = optim::LrSchedule::constant(lr);
  config.server.n = n;
  config.server.m = workers;

  ExperimentConfig model_config;
  model_config.model = model;
  if (model.rfind("neuron:", 0) == 0) {
    model_config.loss = "square";
  }
  Network net = model_config.make_network();

  fedsim::Simulation sim(net, data.train, config);
  sim.run(rounds);
  std::cerr << "ran " << rounds << " rounds, " << workers << " workers, mode "
            << fedsim::to_string(config.mode) << "\n";
  if (model.rfind("neuron:", 0) != 0) {
    std::cerr << "test accuracy " << format_g6(accuracy_full(
                   sim.network(), sim.params(), data.test)) << "\n";
  }

  if (!out_log.empty()) {
    fedsim::save_payload_log(out_log, sim.log());
    std::cerr << "payload log written to " << out_log << "\n";
  }

  if (!capture_spec.empty()) {
    const auto colon = capture_spec.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("--capture wants ROUND:WORKER");
    }
    const std::size_t round = std::stoul(capture_spec.substr(0, colon));
    const std::size_t worker = std::stoul(capture_spec.substr(colon + 1));
    const Capture capture{model,
                          model_config.loss,
                          static_cast<std::uint32_t>(round),
                          static_cast<std::uint32_t>(worker),
                          sim.eavesdrop(round, worker),
                          sim.round_samples(round, worker).at(0)};
    save_capture(capture_out.empty() ? "capture.bin" : capture_out, capture);
    std::cerr << "capture written to "
              << (capture_out.empty() ? "capture.bin" : capture_out) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-privacy laboratory"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_data;
  CLI::App* train = app.add_subcommand("train", "run one configured experiment");
  train->add_option("--config", train_config, "key=value config file")
      ->required();
  train->add_option("--data", train_data, "dataset directory override");

  // table
  std::string preset, scale = "desk", table_out = "runs", table_data;
  std::size_t jobs = 1;
  bool list = false;
  CLI::App* table = app.add_subcommand("table", "reproduce a result table");
  table->add_option("--preset", preset, "table1..table12, appendix-dlg/idlg");
  table->add_option("--scale", scale, "desk|full")
      ->check(CLI::IsMember({"desk", "full"}));
  table->add_option("--out", table_out, "output directory");
  table->add_option("--data", table_data, "dataset directory override");
  table->add_option("--jobs", jobs, "concurrent cells");
  table->add_flag("--list", list, "list presets");

  // attack
  std::string attack_mode, payload_path, attack_out = "runs/attack";
  std::string distance = "l2";
  std::size_t attack_iters = 300;
  double attack_lr = 0.1;
  CLI::App* attack = app.add_subcommand("attack", "invert a captured payload");
  attack->add_option("--mode", attack_mode, "dlg|idlg|analytic")
      ->required()
      ->check(CLI::IsMember({"dlg", "idlg", "analytic"}));
  attack->add_option("--payload", payload_path, "capture file")->required();
  attack->add_option("--out", attack_out, "output directory");
  attack->add_option("--iterations", attack_iters, "matching iterations");
  attack->add_option("--lr", attack_lr, "matching step size");
  attack->add_option("--distance", distance, "l2|cosine")
      ->check(CLI::IsMember({"l2", "cosine"}));

  // fedsim
  std::size_t workers = 4, rounds = 10, fed_n = 16;
  double fed_eps = 4.0, fed_lr = 0.1;
  std::uint64_t fed_seed = 1;
  std::string fed_mode = "unit", fed_data, fed_model = "mlp:784-32-10";
  std::string fed_algo, out_log, capture_spec, capture_out;
  CLI::App* fed = app.add_subcommand("fedsim", "multi-worker gradient sharing");
  fed->add_option("--workers", workers, "worker count");
  fed->add_option("--mode", fed_mode, "raw|dp|unit")
      ->check(CLI::IsMember({"raw", "dp", "unit"}));
  fed->add_option("--epsilon", fed_eps, "dp noise budget");
  fed->add_option("--rounds", rounds, "rounds to run");
  fed->add_option("--n", fed_n, "samples per worker basic gradient");
  fed->add_option("--seed", fed_seed, "rng seed");
  fed->add_option("--data", fed_data, "dataset directory override");
  fed->add_option("--model", fed_model, "mlp[:dims] | lenet5 | neuron:D");
  fed->add_option("--lr", fed_lr, "server learning rate");
  fed->add_option("--algorithm", fed_algo, "server update rule override");
  fed->add_option("--out-log", out_log, "payload log file");
  fed->add_option("--capture", capture_spec, "ROUND:WORKER to capture");
  fed->add_option("--capture-out", capture_out, "capture file path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return cmd_train(train_config, train_data);
    }
    if (*table) {
      if (!list && preset.empty()) {
        throw ssgdlab::ConfigError("--preset is required (or use --list)");
      }
      return cmd_table(preset, scale, table_out, table_data, jobs, list);
    }
    if (*attack) {
      return cmd_attack(attack_mode, payload_path, attack_out, attack_iters,
                        attack_lr, distance);
    }
    if (*fed) {
      return cmd_fedsim(workers, fed_mode, fed_eps, rounds, fed_n, fed_seed,
                        fed_data, fed_model, fed_lr, fed_algo, out_log,
                        capture_spec, capture_out);
    }
  } catch (const ssgdlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
