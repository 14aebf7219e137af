#pragma once

#include <filesystem>
#include <string>

#include "ssgdlab/attacks.hpp"

namespace ssgdlab {

/// Self-contained attack input: an eavesdropped payload, the architecture
/// it came from, the parameter snapshot, and the ground-truth sample kept
/// alongside for scoring reconstructions. Written by `fedsim --capture`,
/// consumed by `attack --payload`.
struct Capture {
  std::string model;  // config model syntax, e.g. "mlp:784-32-10"
  std::string loss;   // "cross-entropy" | "square"
  std::uint32_t round = 0;
  std::uint32_t worker = 0;
  attacks::CapturedPayload payload;
  Sample truth;
};

void save_capture(const std::filesystem::path& path, const Capture& capture);
Capture load_capture(const std::filesystem::path& path);

}  // namespace ssgdlab
