#include "ssgdlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {

void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(buf, 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw DataError("unexpected end of stream reading u32");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  }
  return v;
}

void write_f64(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(buf, 8);
}

double read_f64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw DataError("unexpected end of stream reading f64");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

void write_tensor(std::ostream& out, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    write_u32(out, static_cast<std::uint32_t>(d));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    write_f64(out, t[i]);
  }
}

Tensor read_tensor(std::istream& in) {
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) {
    throw DataError("implausible tensor rank " + std::to_string(rank));
  }
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) {
    d = read_u32(in);
  }
  if (rank == 0) {
    return Tensor();
  }
  std::vector<double> data(shape_size(shape));
  for (double& v : data) {
    v = read_f64(in);
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_magic(std::ostream& out) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
}

void expect_magic(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) {
    throw DataError("truncated stream: missing checkpoint magic");
  }
  if (std::memcmp(buf, kCheckpointMagic, 8) != 0) {
    throw DataError("bad checkpoint magic");
  }
}

void save_parameters(std::ostream& out, const ParameterSet& params) {
  write_magic(out);
  write_u32(out, static_cast<std::uint32_t>(params.layer_count()));
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    write_tensor(out, params.layer(i).weights);
    write_tensor(out, params.layer(i).bias);
  }
}

void save_parameters(const std::filesystem::path& path,
                     const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  save_parameters(out, params);
  if (!out) {
    throw DataError("write failed for " + path.string());
  }
}

ParameterSet load_parameters(std::istream& in, const Network& net) {
  expect_magic(in);
  const std::uint32_t count = read_u32(in);
  const auto& param_layers = net.parameterized_layers();
  if (count != param_layers.size()) {
    throw DataError("checkpoint has " + std::to_string(count) +
                    " layers, network expects " +
                    std::to_string(param_layers.size()));
  }
  std::vector<ParameterSet::LayerParams> layers;
  for (std::size_t j = 0; j < count; ++j) {
    ParameterSet::LayerParams p;
    p.weights = read_tensor(in);
    p.bias = read_tensor(in);
    const LayerSpec& spec = net.layers()[param_layers[j]];
    std::vector<std::size_t> expect_w, expect_b;
    if (spec.kind == LayerKind::FullyConnected) {
      expect_w = {spec.fan_in, spec.fan_out};
      if (spec.has_bias) {
        expect_b = {spec.fan_out};
      }
    } else {
      expect_w = {spec.out_channels, spec.in_channels, spec.kernel,
                  spec.kernel};
      expect_b = {spec.out_channels};
    }
    if (p.weights.shape() != expect_w || p.bias.shape() != expect_b) {
      throw DataError("checkpoint layer " + std::to_string(j) +
                      " does not match network geometry");
    }
    layers.push_back(std::move(p));
  }
  return ParameterSet(std::move(layers));
}

ParameterSet load_parameters(const std::filesystem::path& path,
                             const Network& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  return load_parameters(in, net);
}

std::vector<std::uint8_t> parameters_to_bytes(const ParameterSet& params) {
  std::ostringstream out(std::ios::binary);
  save_parameters(out, params);
  const std::string s = out.str();
  return {s.begin(), s.end()};
}

ParameterSet parameters_from_bytes(const std::vector<std::uint8_t>& bytes,
                                   const Network& net) {
  std::istringstream in(std::string(bytes.begin(), bytes.end()),
                        std::ios::binary);
  return load_parameters(in, net);
}

void write_bundle(std::ostream& out, const GradientBundle& bundle) {
  write_magic(out);
  write_u32(out, static_cast<std::uint32_t>(bundle.layers.size()));
  for (const auto& layer : bundle.layers) {
    write_tensor(out, layer.mat);
  }
}

GradientBundle read_bundle(std::istream& in, const Network& net) {
  expect_magic(in);
  const std::uint32_t count = read_u32(in);
  const auto& param_layers = net.parameterized_layers();
  if (count != param_layers.size()) {
    throw DataError("payload bundle layer count mismatch");
  }
  GradientBundle bundle;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t l = param_layers[j];
    LayerGrad g;
    g.mat = read_tensor(in);
    g.axis = net.layers()[l].neuron_axis();
    const auto [rows, cols] = net.grad_matrix_dims(l);
    if (g.mat.rank() != 2 || g.mat.rows() != rows || g.mat.cols() != cols) {
      throw DataError("payload layer " + std::to_string(j) +
                      " has wrong gradient shape");
    }
    bundle.layers.push_back(std::move(g));
  }
  return bundle;
}

}  // namespace ssgdlab
