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

#ifndef CELLFED_BITSTREAM_HPP
#define CELLFED_BITSTREAM_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cellfed {

/// MSB-first bit sequence. Bits past bit_length in the last byte are zero.
struct BitStream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_length = 0;

  friend bool operator==(const BitStream&, const BitStream&) = default;
};

class BitWriter {
 public:
  void put_bit(bool bit);
  /// Writes the low `count` bits of `value`, most significant first.
  void put_bits(std::uint32_t value, int count);

  std::size_t bit_length() const noexcept { return stream_.bit_length; }
  BitStream finish() &&;

 private:
  BitStream stream_;
};

class BitReader {
 public:
  explicit BitReader(const BitStream& stream) : stream_(&stream) {}

  /// Throws TruncatedStream when no bits remain.
  bool get_bit();
  std::uint32_t get_bits(int count);

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return stream_->bit_length - pos_; }

 private:
  const BitStream* stream_;
  std::size_t pos_ = 0;
};

}  // namespace cellfed

#endif  // CELLFED_BITSTREAM_HPP
