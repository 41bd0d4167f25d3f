#pragma once

#include <cstdint>

namespace gyolo {

/// IEEE binary32 -> binary16 bits, round-to-nearest-even. NaN payloads keep
/// their top mantissa bits and stay NaN.
std::uint16_t float_to_half_bits(float value);

/// Exact binary16 -> binary32 widening.
float half_bits_to_float(std::uint16_t bits);

inline float round_to_half(float value) {
  return half_bits_to_float(float_to_half_bits(value));
}

}  // namespace gyolo
