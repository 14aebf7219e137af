#pragma once

#include <cstdint>
#include <vector>

#include "ssgdlab/rng.hpp"

namespace ssgdlab {

/// Without-replacement index stream: shuffles a permutation of the index
/// set and deals batches off it, reshuffling whenever an epoch is
/// exhausted. Deterministic under its Rng.
class EpochStream {
 public:
  EpochStream(std::size_t dataset_size, Rng rng);
  EpochStream(std::vector<std::uint32_t> indices, Rng rng);

  std::vector<std::uint32_t> next(std::size_t n);
  /// Discards `count` draws (used to replay a given round from scratch).
  void advance(std::size_t count);

 private:
  std::uint32_t draw();

  std::vector<std::uint32_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

}  // namespace ssgdlab
