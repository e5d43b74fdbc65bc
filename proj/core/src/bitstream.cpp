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

#include "cellfed/bitstream.hpp"

#include "cellfed/errors.hpp"

namespace cellfed {

void BitWriter::put_bit(bool bit) {
  const std::size_t byte = stream_.bit_length / 8;
  if (byte == stream_.bytes.size()) stream_.bytes.push_back(0);
  if (bit) stream_.bytes[byte] |= static_cast<std::uint8_t>(0x80u >> (stream_.bit_length % 8));
  ++stream_.bit_length;
}

void BitWriter::put_bits(std::uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit(((value >> i) & 1u) != 0);
}

BitStream BitWriter::finish() && { return std::move(stream_); }

bool BitReader::get_bit() {
  if (pos_ >= stream_->bit_length) {
    throw TruncatedStream("bitstream exhausted at bit " + std::to_string(pos_));
  }
  const bool bit = (stream_->bytes[pos_ / 8] & (0x80u >> (pos_ % 8))) != 0;
  ++pos_;
  return bit;
}

std::uint32_t BitReader::get_bits(int count) {
  std::uint32_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | (get_bit() ? 1u : 0u);
  return v;
}

}  // namespace cellfed
