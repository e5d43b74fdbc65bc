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

#include "cellfed/emq_codec.hpp"

#include <cmath>
#include <string>

#include "cellfed/errors.hpp"

namespace cellfed::emq {
namespace {

double pow10(int u) { return std::pow(10.0, static_cast<double>(u)); }

std::uint8_t round_digit(double ratio) {
  // std::round is half-away-from-zero; ratio >= 0.
  return static_cast<std::uint8_t>(std::min(std::round(ratio), 10.0));
}

EmqCode quantize_with_exponent(const VectorRef& v, int u, bool& overflowed) {
  const double scale = pow10(u);
  EmqCode code;
  code.exponent = u;
  code.signs.resize(static_cast<std::size_t>(v.size()));
  code.mantissas.resize(static_cast<std::size_t>(v.size()));
  overflowed = false;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    std::uint8_t m = round_digit(std::abs(v[i]) / scale);
    if (m == 10) {
      overflowed = true;
      m = 9;
    }
    code.mantissas[idx] = m;
    // Zero digits carry a + sign so the stream is canonical.
    code.signs[idx] = v[i] < 0.0 && m > 0 ? -1 : 1;
  }
  return code;
}

}  // namespace

int decimal_exponent(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw InvalidArgument("decimal_exponent needs a finite positive value");
  }
  int u = static_cast<int>(std::floor(std::log10(x)));
  if (pow10(u) > x) --u;
  if (pow10(u + 1) <= x) ++u;
  return u;
}

std::optional<int> compute_exponent(const VectorRef& v) {
  if (!v.allFinite()) throw InvalidArgument("delta vector has non-finite entries");
  if (v.size() == 0) return std::nullopt;
  const double norm = v.cwiseAbs().maxCoeff();
  if (norm == 0.0) return std::nullopt;
  const int u = decimal_exponent(norm);
  if (u < kMinExponent || u > kMaxExponent) {
    throw ExponentOutOfRange("exponent " + std::to_string(u) + " outside [" +
                             std::to_string(kMinExponent) + ", " +
                             std::to_string(kMaxExponent) + "]");
  }
  return u;
}

EmqCode quantize(const VectorRef& v, OverflowMode mode) {
  const std::optional<int> u = compute_exponent(v);
  if (!u) {
    EmqCode code;
    code.zero_vector = true;
    code.signs.assign(static_cast<std::size_t>(v.size()), 1);
    code.mantissas.assign(static_cast<std::size_t>(v.size()), 0);
    return code;
  }
  bool overflowed = false;
  EmqCode code = quantize_with_exponent(v, *u, overflowed);
  if (overflowed && mode == OverflowMode::kPromoteExponent) {
    if (*u + 1 > kMaxExponent) throw ExponentOutOfRange("promoted exponent exceeds 127");
    code = quantize_with_exponent(v, *u + 1, overflowed);
  }
  return code;
}

Vector dequantize(const EmqCode& code) {
  const auto d = static_cast<Eigen::Index>(code.dimension());
  if (code.zero_vector) return Vector::Zero(d);
  const double scale = pow10(code.exponent);
  Vector out(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out[i] = static_cast<double>(code.signs[idx]) * static_cast<double>(code.mantissas[idx]) * scale;
  }
  return out;
}

void validate(const EmqCode& code) {
  if (code.signs.size() != code.mantissas.size()) {
    throw MalformedCode("sign and mantissa counts differ");
  }
  for (std::int8_t s : code.signs) {
    if (s != 1 && s != -1) throw MalformedCode("sign flag must be +1 or -1");
  }
  for (std::uint8_t m : code.mantissas) {
    if (m > 9) throw MalformedCode("mantissa digit above 9");
  }
  if (code.zero_vector) {
    if (code.exponent != 0) throw MalformedCode("zero-vector code must carry exponent 0");
    for (std::uint8_t m : code.mantissas) {
      if (m != 0) throw MalformedCode("zero-vector code with nonzero mantissa");
    }
  } else if (code.exponent < kMinExponent || code.exponent > kMaxExponent) {
    throw MalformedCode("exponent outside [-127, 127]");
  }
}

int codeword_length(std::uint8_t mantissa) {
  if (mantissa == 0) return 1;
  if (mantissa == 1) return 2;
  return 5;
}

BitStream encode_bits(const EmqCode& code) {
  validate(code);
  BitWriter out;
  const std::int8_t exponent_byte =
      code.zero_vector ? kZeroVectorExponentByte : static_cast<std::int8_t>(code.exponent);
  out.put_bits(static_cast<std::uint8_t>(exponent_byte), kExponentBits);
  for (std::int8_t s : code.signs) out.put_bit(s > 0);
  for (std::uint8_t m : code.mantissas) {
    if (m == 0) {
      out.put_bit(false);
    } else if (m == 1) {
      out.put_bits(0b10, 2);
    } else {
      out.put_bits(0b11, 2);
      out.put_bits(static_cast<std::uint32_t>(m - 2), 3);
    }
  }
  return std::move(out).finish();
}

EmqCode decode_bits(const BitStream& stream, std::size_t dimension) {
  BitReader in(stream);
  EmqCode code;
  const auto exponent_byte = static_cast<std::int8_t>(static_cast<std::uint8_t>(in.get_bits(kExponentBits)));
  code.zero_vector = exponent_byte == kZeroVectorExponentByte;
  code.exponent = code.zero_vector ? 0 : exponent_byte;
  code.signs.resize(dimension);
  code.mantissas.resize(dimension);
  for (std::size_t i = 0; i < dimension; ++i) code.signs[i] = in.get_bit() ? 1 : -1;
  for (std::size_t i = 0; i < dimension; ++i) {
    if (!in.get_bit()) {
      code.mantissas[i] = 0;
    } else if (!in.get_bit()) {
      code.mantissas[i] = 1;
    } else {
      code.mantissas[i] = static_cast<std::uint8_t>(in.get_bits(3) + 2);
    }
  }
  validate(code);
  return code;
}

std::uint64_t bit_count(const EmqCode& code) {
  std::uint64_t bits = kExponentBits + code.dimension();
  for (std::uint8_t m : code.mantissas) bits += static_cast<std::uint64_t>(codeword_length(m));
  return bits;
}

ErrorBound error_bound(int exponent) {
  const double unit = pow10(exponent - 1);
  return {5.0 * unit, 10.0 * unit};
}

}  // namespace cellfed::emq
