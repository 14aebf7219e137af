#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "ssgdlab/nn.hpp"

namespace ssgdlab {

struct MnistData {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Parses the big-endian IDX pairs (train-images/train-labels and
/// t10k-images/t10k-labels, raw or gzip) from `dir`. Pixels are scaled to
/// [0,1] by division by 255; image shape is (28, 28). Malformed or
/// truncated files raise DataError with the byte offset.
MnistData load_mnist(const std::filesystem::path& dir);

/// Single IDX image/label pair.
std::vector<Sample> load_idx_pair(const std::filesystem::path& images,
                                  const std::filesystem::path& labels);

}  // namespace ssgdlab
