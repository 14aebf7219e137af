#include "ssgdlab/rng.hpp"

#include <bit>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : Rng(seed, false) {}

Rng::Rng(std::uint64_t seed, bool) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : state_) {
    word = splitmix64(x);
  }
}

Rng Rng::substream(std::string_view tag, std::uint64_t a,
                   std::uint64_t b) const {
  std::uint64_t x = seed_ ^ fnv1a(tag);
  std::uint64_t mixed = splitmix64(x);
  x ^= a + 0x9e3779b97f4a7c15ULL;
  mixed ^= splitmix64(x);
  x ^= b + 0x7f4a7c15f39cc060ULL;
  mixed ^= splitmix64(x);
  return Rng(mixed, true);
}

std::uint64_t Rng::next_u64() {
  // xoshiro256**
  const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = std::rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) {
    throw UsageError("Rng::below requires n > 0");
  }
  // Rejection sampling over the top of the range keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

}  // namespace ssgdlab
