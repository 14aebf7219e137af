#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ssgdlab {

/// Deterministic splittable random generator (xoshiro256** seeded through
/// splitmix64). The same seed always yields the same stream on every
/// platform, and named substreams are independent of each other and of the
/// parent's consumption position, so experiment components (init, batching,
/// noise, attacks) can be replayed in isolation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Derives an independent generator from this generator's birth seed and
  /// a (tag, a, b) triple. Derivation ignores how much the parent has
  /// already consumed.
  Rng substream(std::string_view tag, std::uint64_t a = 0,
                std::uint64_t b = 0) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Unbiased uniform integer in [0, n); n must be nonzero.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  Rng(std::uint64_t seed, bool derived);

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace ssgdlab
