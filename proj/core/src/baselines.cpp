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

#include "cellfed/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "cellfed/errors.hpp"

namespace cellfed::baselines {

namespace {

std::int64_t max_level(int n_bits) { return (std::int64_t{1} << (n_bits - 1)) - 1; }

}  // namespace

FixedBitCode fixed_bit_quantize(const VectorRef& v, int n_bits) {
  if (n_bits < 2 || n_bits > 32) throw InvalidArgument("fixed-bit width must lie in [2, 32]");
  if (!v.allFinite()) throw InvalidArgument("fixed-bit input contains non-finite values");
  FixedBitCode code;
  code.n_bits = n_bits;
  code.scale = v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  code.levels.assign(static_cast<std::size_t>(v.size()), 0);
  if (code.scale == 0.0) return code;
  const auto q = static_cast<double>(max_level(n_bits));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double level = std::clamp(std::round(v[i] / code.scale * q), -q, q);
    code.levels[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(level);
  }
  return code;
}

Vector fixed_bit_dequantize(const FixedBitCode& code) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(code.levels.size()));
  if (code.scale == 0.0) return out;
  const auto q = static_cast<double>(max_level(code.n_bits));
  for (std::size_t i = 0; i < code.levels.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(code.levels[i]) / q * code.scale;
  }
  return out;
}

std::uint64_t fixed_bit_count(const FixedBitCode& code) {
  return fixed_bit_count(code.levels.size(), code.n_bits);
}

std::uint64_t fixed_bit_count(std::uint64_t d, int n_bits) {
  return kScaleBits + d * static_cast<std::uint64_t>(n_bits);
}

double fixed_bit_error_bound(double scale, int n_bits) {
  return scale / (std::ldexp(1.0, n_bits) - 2.0);
}

int fixed_bit_width_from_emq(double mean_bits, std::uint64_t d) {
  if (d == 0) throw InvalidArgument("dimension must be positive");
  const double per_element = std::floor(std::round(mean_bits) / static_cast<double>(d));
  return static_cast<int>(std::clamp(per_element, 2.0, 32.0));
}

std::uint64_t full_precision_bits(std::uint64_t d) { return 32 * d; }

Vector full_power(int clients) {
  if (clients < 1) throw InvalidArgument("need at least one client");
  return Vector::Ones(clients);
}

}  // namespace cellfed::baselines
