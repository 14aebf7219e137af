#include "ssgdlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("trailing");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + value +
                      "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("trailing");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse integer '" + value +
                      "'");
  }
}

}  // namespace

Network ExperimentConfig::make_network() const {
  LossKind kind;
  if (loss == "cross-entropy") {
    kind = LossKind::SoftmaxCrossEntropy;
  } else if (loss == "square") {
    kind = LossKind::Square;
  } else {
    throw ConfigError("unknown loss '" + loss + "'");
  }
  if (model == "lenet5") {
    if (kind != LossKind::SoftmaxCrossEntropy) {
      throw ConfigError("lenet5 is wired for cross-entropy");
    }
    return Network::lenet5();
  }
  if (model.rfind("neuron:", 0) == 0) {
    // The single sigmoid neuron of the leakage analysis; regression on the
    // label value.
    if (kind != LossKind::Square) {
      throw ConfigError("the neuron model uses loss = square");
    }
    const std::size_t d = parse_u64("model", model.substr(7));
    return Network({d},
                   {LayerSpec::fully_connected(d, 1), LayerSpec::sigmoid()},
                   LossKind::Square);
  }
  std::string dims_text = "784-128-10";
  if (model.rfind("mlp:", 0) == 0) {
    dims_text = model.substr(4);
  } else if (model != "mlp") {
    throw ConfigError("unknown model '" + model + "' (mlp, mlp:D-D-..., lenet5)");
  }
  std::vector<std::size_t> dims;
  std::stringstream ss(dims_text);
  std::string part;
  while (std::getline(ss, part, '-')) {
    if (part.empty()) {
      throw ConfigError("bad mlp dims '" + dims_text + "'");
    }
    dims.push_back(parse_u64("model", part));
  }
  if (dims.size() < 2) {
    throw ConfigError("mlp needs at least two dims");
  }
  return Network::mlp(dims, kind);
}

void ExperimentConfig::validate() const {
  if (iterations == 0) {
    throw ConfigError("iterations must be positive");
  }
  if (eval_every == 0) {
    throw ConfigError("eval_every must be positive");
  }
  if (epsilon && !(*epsilon > 0.0)) {
    throw ConfigError("epsilon must be positive");
  }
  optimizer.validate();
  make_network();  // validates model/loss strings
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  bool lr_set = false, decay_set = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": empty key or value");
    }

    if (key == "dataset") {
      config.dataset = value;
    } else if (key == "model") {
      config.model = value;
    } else if (key == "loss") {
      config.loss = value;
    } else if (key == "algorithm") {
      config.optimizer.algorithm = optim::algorithm_from_string(value);
    } else if (key == "lr") {
      config.optimizer.lr = optim::LrSchedule::constant(parse_double(key, value));
      lr_set = true;
    } else if (key == "lr_decay_a") {
      config.optimizer.lr.a = parse_double(key, value);
      decay_set = true;
    } else if (key == "lr_decay_r") {
      config.optimizer.lr.r = parse_double(key, value);
      decay_set = true;
    } else if (key == "n") {
      config.optimizer.n = parse_u64(key, value);
    } else if (key == "m") {
      config.optimizer.m = parse_u64(key, value);
    } else if (key == "momentum") {
      config.optimizer.momentum = parse_double(key, value);
    } else if (key == "beta1") {
      config.optimizer.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      config.optimizer.beta2 = parse_double(key, value);
    } else if (key == "adam_epsilon") {
      config.optimizer.adam_epsilon = parse_double(key, value);
    } else if (key == "tau") {
      config.optimizer.tau = parse_double(key, value);
    } else if (key == "iterations") {
      config.iterations = parse_u64(key, value);
    } else if (key == "eval_every") {
      config.eval_every = parse_u64(key, value);
    } else if (key == "eval_protocol") {
      if (value == "full-test") {
        config.eval_protocol = EvalProtocol::FullTest;
      } else if (value == "paper-sampling") {
        config.eval_protocol = EvalProtocol::PaperSampling;
      } else {
        throw ConfigError("unknown eval_protocol '" + value + "'");
      }
    } else if (key == "epsilon") {
      config.epsilon = parse_double(key, value);
    } else if (key == "seed") {
      config.seed = parse_u64(key, value);
    } else if (key == "out") {
      config.out = value;
    } else {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (decay_set) {
    if (lr_set) {
      throw ConfigError("set either lr or lr_decay_a/lr_decay_r, not both");
    }
    config.optimizer.lr.kind = optim::LrSchedule::Kind::ExpDecay;
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::filesystem::path resolve_dataset_dir(const ExperimentConfig& config,
                                          const std::string& flag_value) {
  if (!flag_value.empty()) {
    return flag_value;
  }
  if (const char* env = std::getenv("SSGDLAB_DATA"); env && *env) {
    return env;
  }
  return config.dataset;
}

}  // namespace ssgdlab
