// Copyright 2026 The SBC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include "sbc/bitstream.hpp"

#include <string>

#include "sbc/errors.hpp"

namespace sbc {

BitStream BitStream::from_bytes(std::vector<std::uint8_t> bytes,
                                std::size_t bit_length) {
  if (bytes.size() != (bit_length + 7) / 8) {
    throw CorruptionError("bitstream: " + std::to_string(bytes.size()) +
                          " bytes cannot hold exactly " +
                          std::to_string(bit_length) + " bits");
  }
  if (bit_length % 8 != 0) {
    const unsigned used = bit_length % 8;
    const std::uint8_t pad_mask = static_cast<std::uint8_t>(0xFFu >> used);
    if ((bytes.back() & pad_mask) != 0) {
      throw CorruptionError("bitstream: non-zero padding bits");
    }
  }
  BitStream s;
  s.bytes_ = std::move(bytes);
  s.bit_length_ = bit_length;
  return s;
}

void BitStream::push_bit(bool bit) {
  if ((bit_length_ & 7) == 0) bytes_.push_back(0);
  if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_length_ & 7));
  ++bit_length_;
}

void BitStream::push_bits(std::uint64_t value, unsigned width) {
  for (unsigned i = width; i-- > 0;) push_bit((value >> i) & 1u);
}

void BitStream::push_unary(std::uint64_t count) {
  // Whole bytes of ones when aligned; long runs are common at small b*.
  while (count > 0 && (bit_length_ & 7) != 0) {
    push_bit(true);
    --count;
  }
  while (count >= 8) {
    bytes_.push_back(0xFF);
    bit_length_ += 8;
    count -= 8;
  }
  while (count-- > 0) push_bit(true);
  push_bit(false);
}

bool BitReader::read_bit() {
  if (cursor_ >= stream_.bit_length()) {
    throw CorruptionError("bitstream truncated at bit " +
                          std::to_string(cursor_));
  }
  return stream_.bit(cursor_++);
}

std::uint64_t BitReader::read_bits(unsigned width) {
  if (remaining() < width) {
    throw CorruptionError("bitstream truncated: need " + std::to_string(width) +
                          " bits at bit " + std::to_string(cursor_));
  }
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | stream_.bit(cursor_++);
  return v;
}

std::uint64_t BitReader::read_unary() {
  std::uint64_t q = 0;
  while (read_bit()) ++q;
  return q;
}

}  // namespace sbc
