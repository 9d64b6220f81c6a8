#pragma once

#include <cstdint>
#include <vector>

namespace gosr {

/// Deterministic xoshiro256** generator with splitmix64 seeding. All
/// randomness in the project flows through this class so that seeded runs
/// reproduce bit-identically regardless of platform or standard library.
/// Frozen test fixtures depend on the exact output stream: changing the
/// algorithm invalidates them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (cached spare).
  double normal();

  /// Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), returned sorted ascending.
  std::vector<std::int64_t> sample_indices(std::int64_t n, std::int64_t k);

  /// Independent generator for a named substream. Forking from the original
  /// seed keeps stage streams decoupled from call order.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gosr
