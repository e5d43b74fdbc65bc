// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CELLFED_EMQ_CODEC_HPP
#define CELLFED_EMQ_CODEC_HPP

// Exponent-mantissa quantization of model deltas.
//
// A vector v is represented by one shared decimal exponent u and, per
// element, a sign and a rounded leading digit m_i in {0..9}:
//
//     v_i ~= s_i * m_i * 10^u,   u = floor(log10 ||v||_inf).
//
// Wire layout (MSB first):
//
//     [u: 8 bits two's complement][d sign bits, 1 = +][d mantissa codewords][pad]
//
// with the prefix-free mantissa table
//
//     0 -> 0      1 -> 10      m in 2..9 -> 11 bbb  (bbb = m - 2)
//
// The exponent byte 0x80 (-128) is reserved for the all-zero vector.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cellfed/bitstream.hpp"
#include "cellfed/types.hpp"

namespace cellfed::emq {

inline constexpr int kExponentBits = 8;
inline constexpr int kMinExponent = -127;
inline constexpr int kMaxExponent = 127;
inline constexpr std::int8_t kZeroVectorExponentByte = -128;

/// What to do when |v_i| / 10^u rounds up to 10.
enum class OverflowMode {
  kClamp,            // store 9; per-element error may reach 1.0 * 10^u
  kPromoteExponent,  // reject u, requantize the whole vector with u + 1
};

struct EmqCode {
  int exponent = 0;
  std::vector<std::int8_t> signs;         // +1 / -1
  std::vector<std::uint8_t> mantissas;    // 0..9
  bool zero_vector = false;

  std::size_t dimension() const noexcept { return mantissas.size(); }

  friend bool operator==(const EmqCode&, const EmqCode&) = default;
};

/// floor(log10(x)) for finite x > 0, corrected against the representable
/// powers of ten so that 10^u <= x < 10^(u+1) holds in double arithmetic.
int decimal_exponent(double x);

/// Exponent of the infinity norm, or nullopt for the zero vector.
/// Throws ExponentOutOfRange outside [-127, 127] and InvalidArgument for
/// non-finite input.
std::optional<int> compute_exponent(const VectorRef& v);

EmqCode quantize(const VectorRef& v, OverflowMode mode = OverflowMode::kClamp);
Vector dequantize(const EmqCode& code);

/// Throws MalformedCode if the code violates an EmqCode invariant.
void validate(const EmqCode& code);

/// Codeword length in bits for a mantissa digit: 1, 2 or 5.
int codeword_length(std::uint8_t mantissa);

BitStream encode_bits(const EmqCode& code);
EmqCode decode_bits(const BitStream& stream, std::size_t dimension);

/// 8 + d + sum of codeword lengths; never exceeds 8 + 6d.
std::uint64_t bit_count(const EmqCode& code);

inline constexpr std::uint64_t max_bit_count(std::uint64_t d) { return 8 + 6 * d; }

struct ErrorBound {
  double strict;   // 0.5 * 10^u, elements whose digit did not clamp
  double relaxed;  // 1.0 * 10^u, every element
};

ErrorBound error_bound(int exponent);

}  // namespace cellfed::emq

#endif  // CELLFED_EMQ_CODEC_HPP
