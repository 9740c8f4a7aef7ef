#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace finsup {

// splitmix64 step, used only to derive seeds. Keeping derivation separate
// from generation means parallel callers can be handed disjoint streams
// without ever sharing generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministically derives an independent sub-seed for a numbered stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state ^= 0xd1b54a32d192ed03ULL * (stream + 1);
  std::uint64_t b = splitmix64(state);
  return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 12) + (a >> 7));
}

/// FNV-1a over raw bytes; used for config hashes and sample fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffU;
    h *= 1099511628211ULL;
  }
  return h;
}

// Seeded generator with a fixed, portable mapping to unit doubles.
// mt19937_64 output is specified by the standard, so sequences are
// bit-identical across platforms; we never go through the distribution
// templates in <random>, whose results are implementation defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), unbiased via rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % bound));
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Independent generator for a numbered substream of this one.
  Rng stream(std::uint64_t stream_id) const { return Rng(derive_seed(seed_, stream_id)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace finsup
