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

#ifndef CELLFED_BASELINES_HPP
#define CELLFED_BASELINES_HPP

#include <cstdint>
#include <vector>

#include "cellfed/types.hpp"

namespace cellfed::baselines {

/// Bits charged for the scale on the wire.
inline constexpr std::uint64_t kScaleBits = 32;

/// Symmetric uniform quantizer over [-scale, scale] with integer levels in
/// [-(2^(n-1) - 1), 2^(n-1) - 1]. The scale is held in double precision in
/// memory but charged kScaleBits in the bit accounting.
struct FixedBitCode {
  int n_bits = 0;
  double scale = 0.0;
  std::vector<std::int64_t> levels;

  bool operator==(const FixedBitCode&) const = default;
};

/// Throws InvalidArgument unless 2 <= n_bits <= 32 and v is finite.
FixedBitCode fixed_bit_quantize(const VectorRef& v, int n_bits);
Vector fixed_bit_dequantize(const FixedBitCode& code);

/// kScaleBits + d * n_bits.
std::uint64_t fixed_bit_count(const FixedBitCode& code);
std::uint64_t fixed_bit_count(std::uint64_t d, int n_bits);

/// Worst-case elementwise round-trip error: scale / (2^n - 2).
double fixed_bit_error_bound(double scale, int n_bits);

/// Per-element width matching a mean EMQ payload:
/// max(2, floor(round(mean_bits) / d)), capped at 32.
int fixed_bit_width_from_emq(double mean_bits, std::uint64_t d);

/// Full-precision payload: 32 bits per element.
std::uint64_t full_precision_bits(std::uint64_t d);

/// All clients at maximum power.
Vector full_power(int clients);

}  // namespace cellfed::baselines

#endif  // CELLFED_BASELINES_HPP
