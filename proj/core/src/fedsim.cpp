#include "ssgdlab/fedsim.hpp"

#include <fstream>

#include "ssgdlab/checkpoint.hpp"
#include "ssgdlab/errors.hpp"
#include "ssgdlab/privacy.hpp"

namespace ssgdlab::fedsim {

Protection protection_from_string(const std::string& name) {
  if (name == "raw") return Protection::Raw;
  if (name == "dp") return Protection::Dp;
  if (name == "unit") return Protection::Unit;
  throw ConfigError("unknown protection mode '" + name + "'");
}

std::string to_string(Protection mode) {
  switch (mode) {
    case Protection::Raw: return "raw";
    case Protection::Dp: return "dp";
    case Protection::Unit: return "unit";
  }
  return "?";
}

std::vector<std::vector<std::uint32_t>> make_shards(std::size_t dataset_size,
                                                    std::size_t workers) {
  if (workers == 0 || dataset_size < workers) {
    throw ConfigError("need at least one sample per worker");
  }
  std::vector<std::vector<std::uint32_t>> shards(workers);
  const std::size_t base = dataset_size / workers;
  const std::size_t extra = dataset_size % workers;
  std::uint32_t next = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t count = base + (w < extra ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      shards[w].push_back(next++);
    }
  }
  return shards;
}

Simulation::Simulation(Network net, std::vector<Sample> train,
                       SimConfig config)
    : net_(std::move(net)), train_(std::move(train)), config_(config) {
  if (config_.workers < 1) {
    throw ConfigError("need at least one worker");
  }
  if (config_.mode == Protection::Dp && !(config_.epsilon > 0.0)) {
    throw ConfigError("dp mode requires epsilon > 0");
  }
  config_.server.validate();
  shards_ = make_shards(train_.size(), config_.workers);
  const Rng root(config_.seed);
  for (std::size_t w = 0; w < config_.workers; ++w) {
    if (shards_[w].size() < config_.n) {
      throw ConfigError("shard smaller than basic-gradient size n");
    }
    streams_.emplace_back(shards_[w], root.substream("worker-batch", w));
  }
  params_ = init_parameters(net_, root.substream("init"));
}

WirePayload Simulation::make_payload(
    std::uint32_t round, std::uint32_t worker, const ParameterSet& theta,
    const std::vector<std::uint32_t>& batch_indices) const {
  std::vector<Sample> samples;
  samples.reserve(batch_indices.size());
  for (std::uint32_t idx : batch_indices) {
    samples.push_back(train_[idx]);
  }
  const Batch batch = make_batch(net_, samples);
  const ForwardTrace trace = forward(net_, theta, batch);
  GradientBundle bundle = backward(net_, theta, trace);

  WirePayload payload;
  payload.round = round;
  payload.worker = worker;
  payload.mode = config_.mode;
  switch (config_.mode) {
    case Protection::Raw:
      break;
    case Protection::Dp: {
      payload.epsilon = config_.epsilon;
      // Noise goes on the summed batch gradient, then back to the mean.
      const double n = static_cast<double>(batch_indices.size());
      GradientBundle summed = bundle.scaled(n);
      Rng noise = Rng(config_.seed).substream("noise", worker, round);
      bundle = privacy::perturb(summed, config_.epsilon, noise)
                   .scaled(1.0 / n);
      break;
    }
    case Protection::Unit:
      bundle = optim::normalize_per_neuron(bundle, config_.server.tau);
      break;
  }
  payload.bundle = std::move(bundle);
  return payload;
}

void Simulation::run_round() {
  RoundRecord record;
  record.theta = parameters_to_bytes(params_);
  std::vector<GradientBundle> bundles;
  bundles.reserve(config_.workers);
  for (std::size_t w = 0; w < config_.workers; ++w) {
    const std::vector<std::uint32_t> batch = streams_[w].next(config_.n);
    WirePayload payload =
        make_payload(round_, static_cast<std::uint32_t>(w), params_, batch);
    bundles.push_back(payload.bundle);
    record.payloads.push_back(std::move(payload));
  }
  const GradientBundle aggregated = mean_of(bundles);
  optim::apply_direction(config_.server, state_, net_, params_, aggregated);
  log_.push_back(std::move(record));
  ++round_;
}

void Simulation::run(std::size_t rounds) {
  for (std::size_t i = 0; i < rounds; ++i) {
    run_round();
  }
}

attacks::CapturedPayload Simulation::eavesdrop(std::size_t round,
                                               std::size_t worker) const {
  if (round >= log_.size() || worker >= config_.workers) {
    throw UsageError("no logged payload for round " + std::to_string(round) +
                     ", worker " + std::to_string(worker));
  }
  attacks::CapturedPayload captured{
      net_, parameters_from_bytes(log_[round].theta, net_),
      log_[round].payloads[worker].bundle,
      config_.mode == Protection::Unit};
  return captured;
}

WirePayload Simulation::replay(std::size_t round, std::size_t worker) const {
  if (round >= log_.size() || worker >= config_.workers) {
    throw UsageError("no logged payload for round " + std::to_string(round) +
                     ", worker " + std::to_string(worker));
  }
  const ParameterSet theta = parameters_from_bytes(log_[round].theta, net_);
  EpochStream stream(shards_[worker],
                     Rng(config_.seed).substream("worker-batch", worker));
  stream.advance(round * config_.n);
  const std::vector<std::uint32_t> batch = stream.next(config_.n);
  return make_payload(static_cast<std::uint32_t>(round),
                      static_cast<std::uint32_t>(worker), theta, batch);
}

std::vector<Sample> Simulation::round_samples(std::size_t round,
                                              std::size_t worker) const {
  if (round >= log_.size() || worker >= config_.workers) {
    throw UsageError("no logged payload for round " + std::to_string(round) +
                     ", worker " + std::to_string(worker));
  }
  EpochStream stream(shards_[worker],
                     Rng(config_.seed).substream("worker-batch", worker));
  stream.advance(round * config_.n);
  std::vector<Sample> out;
  for (std::uint32_t idx : stream.next(config_.n)) {
    out.push_back(train_[idx]);
  }
  return out;
}

void write_payload(std::ostream& out, const WirePayload& payload) {
  write_u32(out, payload.round);
  write_u32(out, payload.worker);
  char tail[8] = {static_cast<char>(payload.mode), 0, 0, 0, 0, 0, 0, 0};
  out.write(tail, 8);
  if (payload.mode == Protection::Dp) {
    write_f64(out, payload.epsilon);
  }
  write_bundle(out, payload.bundle);
}

WirePayload read_payload(std::istream& in, const Network& net) {
  WirePayload payload;
  payload.round = read_u32(in);
  payload.worker = read_u32(in);
  char tail[8];
  if (!in.read(tail, 8)) {
    throw DataError("truncated payload header");
  }
  const auto mode = static_cast<std::uint8_t>(tail[0]);
  if (mode > 2) {
    throw DataError("bad payload protection mode");
  }
  payload.mode = static_cast<Protection>(mode);
  if (payload.mode == Protection::Dp) {
    payload.epsilon = read_f64(in);
  }
  payload.bundle = read_bundle(in, net);
  return payload;
}

void save_payload_log(const std::filesystem::path& path,
                      const std::vector<RoundRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  for (const RoundRecord& record : log) {
    for (const WirePayload& payload : record.payloads) {
      write_payload(out, payload);
    }
  }
  if (!out) {
    throw DataError("write failed for " + path.string());
  }
}

std::vector<WirePayload> load_payload_log(const std::filesystem::path& path,
                                          const Network& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<WirePayload> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    out.push_back(read_payload(in, net));
  }
  return out;
}

}  // namespace ssgdlab::fedsim
