#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace gyolo {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// xoshiro256++ (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    for (auto& word : s_) word = splitmix64(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform01() {
    return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f);
  }

  /// Uniform in [-bound, bound).
  float uniform_symmetric(float bound) {
    return (2.0f * uniform01() - 1.0f) * bound;
  }

  double uniform01_double() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// Seed for a named parameter: the name hash mixed with the user seed, so
/// adding a parameter never shifts the values drawn for another.
inline std::uint64_t parameter_seed(std::string_view name, std::uint64_t seed) {
  std::uint64_t mix = fnv1a64(name) ^ (seed * 0x9E3779B97F4A7C15ull);
  return splitmix64(mix);
}

}  // namespace gyolo
