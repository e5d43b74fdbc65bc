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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cellfed/emq_codec.hpp"
#include "cellfed/errors.hpp"
#include "oracles.hpp"

namespace cellfed::emq {
namespace {

std::string to_bit_string(const BitStream& s) {
  std::string out;
  for (std::size_t i = 0; i < s.bit_length; ++i) out += ((s.bytes[i / 8] >> (7 - i % 8)) & 1) ? '1' : '0';
  return out;
}

std::vector<int> as_ints(const std::vector<std::int8_t>& v) { return {v.begin(), v.end()}; }
std::vector<int> as_ints(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

TEST(DecimalExponent, ExactAtPowersOfTen) {
  EXPECT_EQ(decimal_exponent(1.0), 0);
  EXPECT_EQ(decimal_exponent(1000.0), 3);
  EXPECT_EQ(decimal_exponent(std::nextafter(1000.0, 0.0)), 2);
  EXPECT_EQ(decimal_exponent(1e-5), -5);
  EXPECT_EQ(decimal_exponent(0.001), -3);
  EXPECT_EQ(decimal_exponent(9.99), 0);
  EXPECT_EQ(decimal_exponent(0.034), -2);
}

TEST(DecimalExponent, BracketsEveryValue) {
  Rng rng = make_rng(1, "decimal-exponent");
  std::uniform_real_distribution<double> log_dist(-120.0, 120.0);
  for (int t = 0; t < 20000; ++t) {
    const double x = std::pow(10.0, log_dist(rng));
    const int u = decimal_exponent(x);
    EXPECT_LE(std::pow(10.0, u), x);
    EXPECT_GT(std::pow(10.0, u + 1), x);
  }
}

TEST(ComputeExponent, ZeroAndErrors) {
  EXPECT_FALSE(compute_exponent(Vector::Zero(4)).has_value());
  EXPECT_EQ(*compute_exponent(Vector::Constant(3, -0.5)), -1);
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(compute_exponent(bad), InvalidArgument);
  EXPECT_THROW(compute_exponent(Vector::Constant(1, 1e200)), ExponentOutOfRange);
  EXPECT_THROW(compute_exponent(Vector::Constant(1, 1e-200)), ExponentOutOfRange);
  EXPECT_EQ(*compute_exponent(Vector::Constant(1, 5e127)), 127);
}

TEST(Quantize, HandWorkedVector) {
  Vector v(3);
  v << 0.034, -0.0071, 0.0;
  const EmqCode code = quantize(v);
  EXPECT_EQ(code.exponent, -2);
  EXPECT_EQ(as_ints(code.signs), (std::vector<int>{1, -1, 1}));
  EXPECT_EQ(as_ints(code.mantissas), (std::vector<int>{3, 1, 0}));
  EXPECT_EQ(bit_count(code), 19u);
  const BitStream bits = encode_bits(code);
  EXPECT_EQ(to_bit_string(bits), "1111111010111001100");
  EXPECT_EQ(bits.bytes, (std::vector<std::uint8_t>{0xFE, 0xB9, 0x80}));
  const Vector back = dequantize(code);
  EXPECT_DOUBLE_EQ(back[0], 0.03);
  EXPECT_DOUBLE_EQ(back[1], -0.01);
  EXPECT_EQ(back[2], 0.0);
}

TEST(Quantize, RoundsHalfAwayFromZero) {
  Vector v(3);
  v << 2.5, -2.5, 1.5;
  const EmqCode code = quantize(v);
  EXPECT_EQ(code.exponent, 0);
  EXPECT_EQ(as_ints(code.mantissas), (std::vector<int>{3, 3, 2}));
  EXPECT_EQ(as_ints(code.signs), (std::vector<int>{1, -1, 1}));
}

TEST(Quantize, ZeroDigitsArePositive) {
  Vector v(3);
  v << -3.0, -0.04, -0.0;
  const EmqCode code = quantize(v);
  EXPECT_EQ(as_ints(code.mantissas), (std::vector<int>{3, 0, 0}));
  EXPECT_EQ(as_ints(code.signs), (std::vector<int>{-1, 1, 1}));
  EXPECT_EQ(encode_bits(quantize(dequantize(code))).bytes, encode_bits(code).bytes);
}

TEST(Quantize, ClampAndPromoteOnDigitOverflow) {
  Vector v(2);
  v << 9.6, 0.2;
  const EmqCode clamped = quantize(v, OverflowMode::kClamp);
  EXPECT_EQ(clamped.exponent, 0);
  EXPECT_EQ(as_ints(clamped.mantissas), (std::vector<int>{9, 0}));
  EXPECT_NEAR(std::abs(dequantize(clamped)[0] - 9.6), 0.6, 1e-12);

  const EmqCode promoted = quantize(v, OverflowMode::kPromoteExponent);
  EXPECT_EQ(promoted.exponent, 1);
  EXPECT_EQ(as_ints(promoted.mantissas), (std::vector<int>{1, 0}));
  EXPECT_LE((dequantize(promoted) - v).cwiseAbs().maxCoeff(), 0.5 * 10.0);
}

TEST(Quantize, ZeroVectorUsesReservedExponent) {
  const EmqCode code = quantize(Vector::Zero(5));
  EXPECT_TRUE(code.zero_vector);
  EXPECT_EQ(bit_count(code), 8u + 2 * 5);
  const BitStream bits = encode_bits(code);
  EXPECT_EQ(bits.bytes.front(), 0x80);
  EXPECT_EQ(bits.bit_length, 18u);
  EXPECT_EQ(decode_bits(bits, 5), code);
  EXPECT_TRUE(dequantize(code).isZero());
}

TEST(Quantize, EmptyVector) {
  const EmqCode code = quantize(Vector(0));
  EXPECT_EQ(code.dimension(), 0u);
  EXPECT_EQ(decode_bits(encode_bits(code), 0), code);
}

TEST(Encode, MatchesReferenceBitStrings) {
  Rng rng = make_rng(2, "emq-reference");
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 40);
    const Vector v = testing::random_decade_vector(rng, d, static_cast<int>(rng() % 20) - 10, 2);
    const EmqCode code = quantize(v);
    const std::string expected =
        testing::emq_reference_bits(code.exponent, code.zero_vector, as_ints(code.signs), as_ints(code.mantissas));
    const BitStream bits = encode_bits(code);
    ASSERT_EQ(to_bit_string(bits), expected);
    EXPECT_EQ(bits.bit_length, bit_count(code));
    EXPECT_EQ(bits.bytes.size(), (bits.bit_length + 7) / 8);
  }
}

TEST(Encode, RoundTripsRandomCodes) {
  Rng rng = make_rng(3, "emq-roundtrip");
  for (int t = 0; t < 2000; ++t) {
    const std::size_t d = 1 + rng() % 64;
    EmqCode code;
    code.exponent = static_cast<int>(rng() % 255) - 127;
    for (std::size_t i = 0; i < d; ++i) {
      code.signs.push_back(rng() % 2 ? 1 : -1);
      code.mantissas.push_back(static_cast<std::uint8_t>(rng() % 10));
    }
    EXPECT_EQ(decode_bits(encode_bits(code), d), code);
  }
}

TEST(Decode, RejectsTruncatedAndMalformed) {
  Vector v(4);
  v << 0.5, -0.9, 0.3, 0.7;
  BitStream bits = encode_bits(quantize(v));
  BitStream cut = bits;
  cut.bit_length -= 3;
  EXPECT_THROW(decode_bits(cut, 4), TruncatedStream);
  EXPECT_THROW(decode_bits(bits, 9), TruncatedStream);

  BitWriter w;
  w.put_bits(0x80, 8);
  w.put_bits(0b1, 1);
  w.put_bits(0b10, 2);
  EXPECT_THROW(decode_bits(std::move(w).finish(), 1), MalformedCode);
}

TEST(Encode, RejectsInvalidCodes) {
  EmqCode code;
  code.exponent = 0;
  code.signs = {1};
  code.mantissas = {10};
  EXPECT_THROW(encode_bits(code), MalformedCode);
  code.mantissas = {3};
  code.signs = {0};
  EXPECT_THROW(encode_bits(code), MalformedCode);
  code.signs = {1, 1};
  EXPECT_THROW(encode_bits(code), MalformedCode);
}

TEST(BitBound, NeverExceededAndTightOnLargeDigits) {
  Rng rng = make_rng(4, "emq-bits");
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 100);
    const EmqCode code = quantize(testing::random_decade_vector(rng, d, 0, 3));
    EXPECT_LE(bit_count(code), max_bit_count(static_cast<std::uint64_t>(d)));
  }
  Vector v(9);
  v << 2, -3, 4, -5, 6, -7, 8, -9, 9.4;
  EXPECT_EQ(bit_count(quantize(v)), max_bit_count(9));
}

TEST(ErrorBound, HoldsOverRandomVectors) {
  Rng rng = make_rng(5, "emq-bound");
  for (OverflowMode mode : {OverflowMode::kClamp, OverflowMode::kPromoteExponent}) {
    for (int t = 0; t < 3000; ++t) {
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 50);
      const Vector v = testing::random_decade_vector(rng, d, static_cast<int>(rng() % 30) - 15, 1);
      const EmqCode code = quantize(v, mode);
      const Vector err = (dequantize(code) - v).cwiseAbs();
      const ErrorBound b = error_bound(code.exponent);
      const double tol = 1e-12 * b.relaxed;
      EXPECT_LE(err.maxCoeff(), b.relaxed + tol);
      for (Eigen::Index i = 0; i < d; ++i) {
        const bool clamped = code.mantissas[static_cast<std::size_t>(i)] == 9 &&
                             std::abs(v[i]) >= 9.5 * std::pow(10.0, code.exponent);
        if (!clamped) EXPECT_LE(err[i], b.strict + tol);
      }
      if (mode == OverflowMode::kPromoteExponent) EXPECT_LE(err.maxCoeff(), b.strict + tol);
    }
  }
}

TEST(ErrorBound, Values) {
  EXPECT_DOUBLE_EQ(error_bound(0).strict, 0.5);
  EXPECT_DOUBLE_EQ(error_bound(0).relaxed, 1.0);
  EXPECT_DOUBLE_EQ(error_bound(-3).strict, 5e-4);
  EXPECT_DOUBLE_EQ(error_bound(2).relaxed, 100.0);
}

}  // namespace
}  // namespace cellfed::emq
