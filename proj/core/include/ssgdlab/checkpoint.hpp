#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ssgdlab/gradient.hpp"
#include "ssgdlab/network.hpp"
#include "ssgdlab/nn.hpp"
#include "ssgdlab/tensor.hpp"

namespace ssgdlab {

// Checkpoint framing: the magic string "SSGDLAB1", then for each tensor a
// little-endian u32 rank, u32 extents, and the raw f64 payload. A
// ParameterSet writes weights then bias per parameterized layer in
// definition order; a bias-free layer writes an explicit rank-0 bias.
inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'G', 'D',
                                             'L', 'A', 'B', '1'};

void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void write_magic(std::ostream& out);
void expect_magic(std::istream& in);

void save_parameters(std::ostream& out, const ParameterSet& params);
void save_parameters(const std::filesystem::path& path,
                     const ParameterSet& params);

/// Loads and validates against the network's layer geometry.
ParameterSet load_parameters(std::istream& in, const Network& net);
ParameterSet load_parameters(const std::filesystem::path& path,
                             const Network& net);

std::vector<std::uint8_t> parameters_to_bytes(const ParameterSet& params);
ParameterSet parameters_from_bytes(const std::vector<std::uint8_t>& bytes,
                                   const Network& net);

void write_bundle(std::ostream& out, const GradientBundle& bundle);
/// Reads gradient matrices; neuron axes are restored from the network,
/// since the axis is a property of the layer kind.
GradientBundle read_bundle(std::istream& in, const Network& net);

}  // namespace ssgdlab
