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
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sbc {

// Append-only bit sequence packed MSB-first into bytes. The final partial
// byte is zero-padded; bit_length() carries the true length.
class BitStream {
 public:
  BitStream() = default;
  // Takes ownership of packed bytes holding bit_length bits. Throws
  // CorruptionError if the byte count does not match or padding is non-zero.
  static BitStream from_bytes(std::vector<std::uint8_t> bytes,
                              std::size_t bit_length);

  void push_bit(bool bit);
  // Low `width` bits of value, most significant first. width <= 64.
  void push_bits(std::uint64_t value, unsigned width);
  // `count` one-bits followed by a zero-bit.
  void push_unary(std::uint64_t count);

  bool bit(std::size_t i) const {
    return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u;
  }
  std::size_t bit_length() const { return bit_length_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  friend bool operator==(const BitStream&, const BitStream&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bit_length_ = 0;
};

// Sequential reader. All reads throw CorruptionError past the end.
class BitReader {
 public:
  explicit BitReader(const BitStream& stream) : stream_(stream) {}

  bool read_bit();
  std::uint64_t read_bits(unsigned width);
  // Number of one-bits before the next zero-bit (which is consumed).
  std::uint64_t read_unary();

  std::size_t position() const { return cursor_; }
  std::size_t remaining() const { return stream_.bit_length() - cursor_; }
  bool at_end() const { return cursor_ == stream_.bit_length(); }

 private:
  const BitStream& stream_;
  std::size_t cursor_ = 0;
};

}  // namespace sbc
