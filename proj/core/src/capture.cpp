#include "ssgdlab/capture.hpp"

#include <cstring>
#include <fstream>

#include "ssgdlab/checkpoint.hpp"
#include "ssgdlab/config.hpp"
#include "ssgdlab/errors.hpp"

namespace ssgdlab {
namespace {

constexpr char kCaptureMagic[8] = {'S', 'S', 'G', 'D', 'C', 'A', 'P', '1'};

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  if (len > 4096) {
    throw DataError("implausible string length in capture file");
  }
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) {
    throw DataError("truncated capture file");
  }
  return s;
}

}  // namespace

void save_capture(const std::filesystem::path& path, const Capture& capture) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  out.write(kCaptureMagic, 8);
  write_string(out, capture.model);
  write_string(out, capture.loss);
  write_u32(out, capture.round);
  write_u32(out, capture.worker);
  out.put(capture.payload.normalized ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(capture.truth.label));
  write_tensor(out, capture.truth.input);
  save_parameters(out, capture.payload.params);
  write_bundle(out, capture.payload.bundle);
  if (!out) {
    throw DataError("write failed for " + path.string());
  }
}

Capture load_capture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCaptureMagic, 8) != 0) {
    throw DataError("not a capture file: " + path.string());
  }
  std::string model = read_string(in);
  std::string loss = read_string(in);
  const std::uint32_t round = read_u32(in);
  const std::uint32_t worker = read_u32(in);
  const int flag = in.get();
  if (flag < 0) {
    throw DataError("truncated capture file");
  }

  ExperimentConfig model_config;
  model_config.model = model;
  model_config.loss = loss;
  Network net = model_config.make_network();

  Sample truth;
  truth.label = static_cast<int>(read_u32(in));
  truth.input = read_tensor(in);
  ParameterSet params = load_parameters(in, net);
  GradientBundle bundle = read_bundle(in, net);
  return Capture{std::move(model),
                 std::move(loss),
                 round,
                 worker,
                 attacks::CapturedPayload{std::move(net), std::move(params),
                                          std::move(bundle), flag != 0},
                 std::move(truth)};
}

}  // namespace ssgdlab
