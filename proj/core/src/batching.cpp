#include "ssgdlab/batching.hpp"

#include <numeric>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {

EpochStream::EpochStream(std::size_t dataset_size, Rng rng)
    : order_(dataset_size), rng_(rng) {
  if (dataset_size == 0) {
    throw UsageError("epoch stream over an empty dataset");
  }
  std::iota(order_.begin(), order_.end(), 0u);
  rng_.shuffle(order_);
}

EpochStream::EpochStream(std::vector<std::uint32_t> indices, Rng rng)
    : order_(std::move(indices)), rng_(rng) {
  if (order_.empty()) {
    throw UsageError("epoch stream over an empty dataset");
  }
  rng_.shuffle(order_);
}

std::uint32_t EpochStream::draw() {
  if (pos_ == order_.size()) {
    rng_.shuffle(order_);
    pos_ = 0;
  }
  return order_[pos_++];
}

std::vector<std::uint32_t> EpochStream::next(std::size_t n) {
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(draw());
  }
  return out;
}

void EpochStream::advance(std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    draw();
  }
}

}  // namespace ssgdlab
