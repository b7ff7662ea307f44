#pragma once

#include <cstdint>
#include <random>

namespace asng {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 as a UniformRandomBitGenerator. Seeding is free, which matters
// because the loop derives four fresh streams per iteration.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  constexpr result_type operator()() {
    const std::uint64_t out = mix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

  constexpr bool operator==(const SplitMix64&) const = default;

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

// Deterministic sub-stream seed for (seed, t, stream).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t t, std::uint64_t stream) {
  return mix64(mix64(mix64(seed) ^ t) ^ (stream * 0xd1b54a32d192ed03ULL));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t t, std::uint64_t stream) {
  return Rng(derive_seed(seed, t, stream));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace asng
