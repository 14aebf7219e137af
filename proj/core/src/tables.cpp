#include "ssgdlab/tables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <sstream>

#include "ssgdlab/errors.hpp"

namespace ssgdlab::tables {
namespace {

// Desk scale keeps every cell near a fixed work budget (N * iterations)
// so the full grids finish in minutes; full scale reproduces the paper's
// 10,000 iterations per cell.
std::size_t desk_iterations(std::size_t batch_n) {
  constexpr std::size_t kBudget = 128000;
  return std::clamp<std::size_t>(kBudget / batch_n, 50, 2000);
}

ExperimentConfig base_config(Scale scale) {
  ExperimentConfig c;
  c.model = scale == Scale::Desk ? "mlp" : "lenet5";
  c.eval_protocol =
      scale == Scale::Desk ? EvalProtocol::FullTest : EvalProtocol::PaperSampling;
  c.eval_every = 100000000;  // final row only; run_experiment always adds it
  return c;
}

void finish_cell(ExperimentConfig& c, Scale scale, std::size_t cell_index) {
  c.iterations = scale == Scale::Desk
                     ? desk_iterations(c.optimizer.n * c.optimizer.m)
                     : 10000;
  c.seed = 1000 + cell_index;
}

// Bracketed per-cell learning rates of the accuracy comparison.
double sgd_lr_for(std::size_t batch) {
  static const std::map<std::size_t, double> rates = {
      {16, 0.0005},  {32, 0.0005},  {64, 0.0005},   {128, 0.0005},
      {256, 0.0001}, {512, 0.0001}, {1024, 0.00001}, {2048, 0.00001},
      {4096, 0.00001}, {8192, 0.000002}};
  const auto it = rates.find(batch);
  return it == rates.end() ? 0.0005 : it->second;
}

double sgdm_lr_for(std::size_t batch) {
  return batch <= 512 ? 0.0005 : 0.0001;
}

// SSGD (n, m) splits used for the batch-size comparison columns.
std::pair<std::size_t, std::size_t> ssgd_split_for(std::size_t batch) {
  static const std::map<std::size_t, std::pair<std::size_t, std::size_t>>
      splits = {{16, {4, 4}},    {32, {8, 4}},    {64, {16, 4}},
                {128, {32, 4}},  {256, {64, 4}},  {512, {128, 4}},
                {1024, {64, 16}}, {2048, {32, 64}}, {4096, {64, 64}},
                {8192, {128, 64}}};
  const auto it = splits.find(batch);
  if (it != splits.end()) {
    return it->second;
  }
  return {std::max<std::size_t>(batch / 4, 1), 4};
}

void apply_noisy_sgdm(ExperimentConfig& c) {
  c.optimizer.algorithm = optim::Algorithm::Sgdm;
  c.optimizer.lr = optim::LrSchedule::constant(0.01);
  c.optimizer.momentum = 0.99;
}

void apply_noisy_adam(ExperimentConfig& c) {
  c.optimizer.algorithm = optim::Algorithm::Adam;
  c.optimizer.lr = optim::LrSchedule::constant(0.001);
  c.optimizer.beta1 = 0.9;
  c.optimizer.beta2 = 0.999;
}

void apply_ssgdm(ExperimentConfig& c) {
  c.optimizer.algorithm = optim::Algorithm::Ssgdm;
  c.optimizer.lr = optim::LrSchedule::exp_decay(10.0, 1.0002);
  c.optimizer.momentum = 0.99;
}

TablePlan comparison_plan(const std::string& name, Scale scale, bool test) {
  TablePlan plan;
  plan.name = name;
  plan.title = std::string(test ? "Test" : "Training") +
               " accuracy of compared algorithms";
  plan.report_test = test;
  plan.row_labels = {"SGD", "SGDm", "Adam", "SSGD"};
  const std::vector<std::size_t> batches =
      scale == Scale::Desk
          ? std::vector<std::size_t>{16, 64, 256}
          : std::vector<std::size_t>{16,  32,   64,   128,  256,
                                     512, 1024, 2048, 4096, 8192};
  for (std::size_t b : batches) {
    plan.col_labels.push_back("N=" + std::to_string(b));
  }
  std::size_t cell_index = 0;
  for (std::size_t r = 0; r < plan.row_labels.size(); ++r) {
    for (std::size_t cidx = 0; cidx < batches.size(); ++cidx) {
      const std::size_t batch = batches[cidx];
      ExperimentConfig c = base_config(scale);
      switch (r) {
        case 0:
          c.optimizer.algorithm = optim::Algorithm::Mbgd;
          c.optimizer.lr = optim::LrSchedule::constant(sgd_lr_for(batch));
          c.optimizer.n = batch;
          c.optimizer.m = 1;
          break;
        case 1:
          c.optimizer.algorithm = optim::Algorithm::Sgdm;
          c.optimizer.lr = optim::LrSchedule::constant(sgdm_lr_for(batch));
          c.optimizer.momentum = 0.999;
          c.optimizer.n = batch;
          c.optimizer.m = 1;
          break;
        case 2:
          c.optimizer.algorithm = optim::Algorithm::Adam;
          c.optimizer.lr = optim::LrSchedule::constant(0.005);
          c.optimizer.n = batch;
          c.optimizer.m = 1;
          break;
        default: {
          c.optimizer.algorithm = optim::Algorithm::Ssgd;
          c.optimizer.lr = optim::LrSchedule::constant(0.1);
          const auto [n, m] = ssgd_split_for(batch);
          c.optimizer.n = n;
          c.optimizer.m = m;
          break;
        }
      }
      finish_cell(c, scale, cell_index++);
      plan.cells.push_back({r, cidx, std::move(c)});
    }
  }
  plan.notes = "rows: optimizer; columns: total batch N per step";
  return plan;
}

TablePlan grid_plan(const std::string& name, Scale scale, bool test,
                    const std::string& algo_label,
                    const std::function<void(ExperimentConfig&)>& apply_algo,
                    bool noisy, const std::vector<std::size_t>& n_values) {
  TablePlan plan;
  plan.name = name;
  plan.title = std::string(test ? "Test" : "Training") + " accuracy of " +
               algo_label + (noisy ? " with differential privacy" : "");
  plan.report_test = test;
  const std::vector<std::size_t> m_values = {4, 8, 16, 32, 64};
  for (std::size_t m : m_values) {
    plan.row_labels.push_back("m=" + std::to_string(m));
  }
  for (std::size_t n : n_values) {
    plan.col_labels.push_back("n=" + std::to_string(n));
  }
  std::size_t cell_index = 0;
  for (std::size_t r = 0; r < m_values.size(); ++r) {
    for (std::size_t cidx = 0; cidx < n_values.size(); ++cidx) {
      ExperimentConfig c = base_config(scale);
      apply_algo(c);
      c.optimizer.n = n_values[cidx];
      c.optimizer.m = m_values[r];
      if (noisy) {
        c.epsilon = 4.0;
      }
      finish_cell(c, scale, cell_index++);
      plan.cells.push_back({r, cidx, std::move(c)});
    }
  }
  plan.notes = "rows: m basic gradients per step; columns: n samples each";
  return plan;
}

TablePlan epsilon_plan(const std::string& name, Scale scale, bool test) {
  TablePlan plan;
  plan.name = name;
  plan.title = std::string(test ? "Test" : "Training") +
               " accuracies by varying epsilon";
  plan.report_test = test;
  plan.row_labels = {"SGDm", "Adam", "SSGDm"};
  const std::vector<double> epsilons = {0.2, 0.5, 1.0, 2.0, 4.0};
  for (double e : epsilons) {
    plan.col_labels.push_back("eps=" + format_g6(e));
  }
  std::size_t cell_index = 0;
  for (std::size_t r = 0; r < plan.row_labels.size(); ++r) {
    for (std::size_t cidx = 0; cidx < epsilons.size(); ++cidx) {
      ExperimentConfig c = base_config(scale);
      if (r == 0) {
        apply_noisy_sgdm(c);
      } else if (r == 1) {
        apply_noisy_adam(c);
      } else {
        apply_ssgdm(c);
      }
      c.optimizer.n = 16;
      c.optimizer.m = 16;
      c.epsilon = epsilons[cidx];
      finish_cell(c, scale, cell_index++);
      plan.cells.push_back({r, cidx, std::move(c)});
    }
  }
  plan.notes = "n=16, m=16; Laplace noise per basic gradient";
  return plan;
}

const std::vector<std::size_t> kWideN = {1, 4, 8, 16, 32, 64, 128};
const std::vector<std::size_t> kNoisyN = {1, 4, 8, 16, 32, 64};

}  // namespace

std::vector<std::string> preset_names() {
  return {"table1", "table2",  "table3",  "table4",       "table5",
          "table6", "table7",  "table8",  "table9",       "table10",
          "table11", "table12", "appendix-dlg", "appendix-idlg"};
}

bool is_attack_preset(const std::string& preset) {
  return preset == "appendix-dlg" || preset == "appendix-idlg";
}

TablePlan table_plan(const std::string& preset, Scale scale) {
  const auto ssgd = [](ExperimentConfig& c) {
    c.optimizer.algorithm = optim::Algorithm::Ssgd;
    c.optimizer.lr = optim::LrSchedule::constant(0.1);
  };
  if (preset == "table1") return comparison_plan(preset, scale, false);
  if (preset == "table2") return comparison_plan(preset, scale, true);
  if (preset == "table3")
    return grid_plan(preset, scale, false, "SSGD", ssgd, false, kWideN);
  if (preset == "table4")
    return grid_plan(preset, scale, true, "SSGD", ssgd, false, kWideN);
  if (preset == "table5")
    return grid_plan(preset, scale, false, "SGDm", apply_noisy_sgdm, true,
                     kNoisyN);
  if (preset == "table6")
    return grid_plan(preset, scale, true, "SGDm", apply_noisy_sgdm, true,
                     kNoisyN);
  if (preset == "table7")
    return grid_plan(preset, scale, false, "Adam", apply_noisy_adam, true,
                     kNoisyN);
  if (preset == "table8")
    return grid_plan(preset, scale, true, "Adam", apply_noisy_adam, true,
                     kNoisyN);
  if (preset == "table9")
    return grid_plan(preset, scale, false, "SSGDm", apply_ssgdm, true,
                     kNoisyN);
  if (preset == "table10")
    return grid_plan(preset, scale, true, "SSGDm", apply_ssgdm, true, kNoisyN);
  if (preset == "table11") return epsilon_plan(preset, scale, false);
  if (preset == "table12") return epsilon_plan(preset, scale, true);
  std::string known;
  for (const std::string& name : preset_names()) {
    known += (known.empty() ? "" : ", ") + name;
  }
  throw ConfigError("unknown preset '" + preset + "' (known: " + known + ")");
}

std::string matrix_csv(const TablePlan& plan,
                       const std::vector<std::vector<double>>& values) {
  std::ostringstream out;
  out << plan.name;
  for (const std::string& col : plan.col_labels) {
    out << "," << col;
  }
  out << "\n";
  for (std::size_t r = 0; r < plan.row_labels.size(); ++r) {
    out << plan.row_labels[r];
    for (std::size_t c = 0; c < plan.col_labels.size(); ++c) {
      out << ",";
      if (!std::isnan(values[r][c])) {
        out << format_g6(values[r][c]);
      }
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::vector<double>> run_table(const TablePlan& plan,
                                           const MnistData& data,
                                           const std::filesystem::path& out_dir,
                                           std::size_t jobs,
                                           std::ostream* log) {
  std::vector<std::vector<double>> values(
      plan.row_labels.size(),
      std::vector<double>(plan.col_labels.size(),
                          std::numeric_limits<double>::quiet_NaN()));
  const std::size_t workers = std::max<std::size_t>(1, jobs);
  std::vector<std::future<void>> inflight;
  std::size_t next = 0;
  const auto launch = [&](std::size_t idx) {
    inflight.push_back(std::async(std::launch::async, [&, idx]() {
      const TableCell& c = plan.cells[idx];
      try {
        const ExperimentResult r =
            run_experiment(c.config, data.train, data.test, nullptr, nullptr);
        values[c.row][c.col] = plan.report_test ? r.final_test_accuracy
                                                : r.final_train_accuracy;
      } catch (const ConfigError&) {
        // Cell not runnable on this dataset (n*m beyond the training set);
        // leave it blank like the unrunnable cells in the original tables.
      }
    }));
  };
  while (next < plan.cells.size() || !inflight.empty()) {
    while (next < plan.cells.size() && inflight.size() < workers) {
      launch(next++);
    }
    inflight.front().get();
    inflight.erase(inflight.begin());
    if (log != nullptr) {
      *log << "." << std::flush;
    }
  }
  if (log != nullptr) {
    *log << "\n";
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path csv_path = out_dir / (plan.name + ".csv");
  std::ofstream out(csv_path);
  if (!out) {
    throw DataError("cannot open " + csv_path.string() + " for writing");
  }
  out << matrix_csv(plan, values);
  return values;
}

std::vector<attacks::AttackReport> run_attack_preset(
    const std::string& preset, Scale scale, const MnistData& data,
    const std::filesystem::path& out_dir, std::ostream* log) {
  if (!is_attack_preset(preset)) {
    throw ConfigError("not an attack preset: " + preset);
  }
  const attacks::MatchMode mode = preset == "appendix-idlg"
                                      ? attacks::MatchMode::Idlg
                                      : attacks::MatchMode::Dlg;
  std::filesystem::create_directories(out_dir);

  // Small victim model; payloads are single-sample gradients of a fresh
  // initialization, the appendix setting.
  const Network net =
      Network::mlp({784, 32, 10}, LossKind::SoftmaxCrossEntropy);
  const Rng root(7);
  const ParameterSet params = init_parameters(net, root.substream("init"));
  const Sample& truth = data.test.at(root.substream("pick").below(
      data.test.size()));

  const Sample samples[1] = {truth};
  const Batch batch = make_batch(net, samples);
  const ForwardTrace trace = forward(net, params, batch);
  const GradientBundle raw = backward(net, params, trace);

  attacks::MatchConfig config;
  config.mode = mode;
  config.iterations = scale == Scale::Desk ? 300 : 1000;

  std::vector<attacks::AttackReport> reports;
  const char* tags[2] = {"raw", "unit"};
  for (int variant = 0; variant < 2; ++variant) {
    attacks::CapturedPayload payload{net, params, raw, variant == 1};
    if (variant == 1) {
      payload.bundle = optim::normalize_per_neuron(raw, 1e-12);
    }
    attacks::AttackReport report = attacks::gradient_matching_attack(
        payload, truth, config, root.substream("attack", variant));
    attacks::write_pgm(out_dir / (preset + "_" + tags[variant] + ".pgm"),
                       report.reconstructed, 28, 28);
    if (log != nullptr) {
      *log << preset << " " << tags[variant] << ": mse "
           << format_g6(report.mse) << "\n";
    }
    reports.push_back(std::move(report));
  }
  attacks::write_pgm(out_dir / (preset + "_truth.pgm"),
                     truth.input.reshaped({784}), 28, 28);

  std::ofstream csv(out_dir / (preset + "_reports.csv"));
  csv << attacks::attack_report_csv_header() << "\n";
  for (const auto& r : reports) {
    csv << attacks::attack_report_csv_row(r) << "\n";
  }
  return reports;
}

}  // namespace ssgdlab::tables
