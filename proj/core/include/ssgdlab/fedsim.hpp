#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ssgdlab/attacks.hpp"
#include "ssgdlab/batching.hpp"
#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/nn.hpp"
#include "ssgdlab/optim.hpp"

namespace ssgdlab::fedsim {

enum class Protection : std::uint8_t { Raw = 0, Dp = 1, Unit = 2 };

Protection protection_from_string(const std::string& name);
std::string to_string(Protection mode);

/// One gradient message as it crosses the wire. Serialized as a 16-byte
/// header (u32 round, u32 worker, u8 mode, 7 padding bytes), then epsilon
/// as f64 when mode = dp, then the bundle in checkpoint framing.
struct WirePayload {
  std::uint32_t round = 0;
  std::uint32_t worker = 0;
  Protection mode = Protection::Raw;
  double epsilon = 0.0;
  GradientBundle bundle;
};

struct RoundRecord {
  std::vector<std::uint8_t> theta;  // server parameters at round start
  std::vector<WirePayload> payloads;
};

struct SimConfig {
  std::size_t workers = 1;
  std::size_t rounds = 1;
  std::size_t n = 1;  // samples per worker basic gradient
  Protection mode = Protection::Unit;
  double epsilon = 4.0;
  optim::OptimizerSpec server;  // the update rule the server applies
  std::uint64_t seed = 1;
};

/// Splits the training set into contiguous disjoint shards, remainder
/// spread over the leading shards.
std::vector<std::vector<std::uint32_t>> make_shards(std::size_t dataset_size,
                                                    std::size_t workers);

/// Synchronous gradient-sharing rounds: every worker computes one basic
/// gradient on its private shard from the shared round-start parameters,
/// applies the protection mode, and sends a WirePayload; the server
/// averages the payload bundles and applies its optimizer. Every payload
/// lands in the eavesdropper log.
class Simulation {
 public:
  Simulation(Network net, std::vector<Sample> train, SimConfig config);

  void run_round();
  void run(std::size_t rounds);

  const ParameterSet& params() const { return params_; }
  const Network& network() const { return net_; }
  const std::vector<RoundRecord>& log() const { return log_; }
  const SimConfig& config() const { return config_; }

  /// Honest-but-curious capture: the logged payload plus the parameter
  /// snapshot of its round. Throws UsageError for missing entries.
  attacks::CapturedPayload eavesdrop(std::size_t round,
                                     std::size_t worker) const;

  /// Recomputes a logged payload from the round's parameter snapshot and
  /// the worker's deterministic sample stream. Bit-equal to the log entry.
  WirePayload replay(std::size_t round, std::size_t worker) const;

  /// Ground truth behind a logged payload (for scoring reconstruction
  /// attacks in the lab).
  std::vector<Sample> round_samples(std::size_t round,
                                    std::size_t worker) const;

 private:
  WirePayload make_payload(std::uint32_t round, std::uint32_t worker,
                           const ParameterSet& theta,
                           const std::vector<std::uint32_t>& batch) const;

  Network net_;
  std::vector<Sample> train_;
  SimConfig config_;
  std::vector<std::vector<std::uint32_t>> shards_;
  std::vector<EpochStream> streams_;
  ParameterSet params_;
  optim::OptimizerState state_;
  std::vector<RoundRecord> log_;
  std::uint32_t round_ = 0;
};

void write_payload(std::ostream& out, const WirePayload& payload);
WirePayload read_payload(std::istream& in, const Network& net);

/// Payload log file: the framed payloads, nothing else.
void save_payload_log(const std::filesystem::path& path,
                      const std::vector<RoundRecord>& log);
std::vector<WirePayload> load_payload_log(const std::filesystem::path& path,
                                          const Network& net);

}  // namespace ssgdlab::fedsim
