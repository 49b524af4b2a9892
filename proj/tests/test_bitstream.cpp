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
#include <random>

#include "doctest.h"
#include "sbc/bitstream.hpp"
#include "sbc/errors.hpp"

using namespace sbc;

TEST_CASE("bits are packed most significant first") {
  BitStream s;
  s.push_bit(true);
  s.push_bits(0b010, 3);
  CHECK(s.bit_length() == 4);
  CHECK(s.bytes() == std::vector<std::uint8_t>{0xA0});
  s.push_unary(5);
  CHECK(s.bit_length() == 10);
  CHECK(s.bytes() == std::vector<std::uint8_t>{0xAF, 0x80});
}

TEST_CASE("every width round-trips") {
  std::mt19937_64 rng(7);
  for (unsigned width = 0; width <= 64; ++width) {
    BitStream s;
    std::vector<std::uint64_t> values;
    const std::uint64_t mask = width == 64 ? ~0ull : ((1ull << width) - 1);
    if (width <= 16) {
      for (std::uint64_t v = 0; v <= mask; ++v) values.push_back(v);
    } else {
      for (int i = 0; i < 500; ++i) values.push_back(rng() & mask);
    }
    for (auto v : values) {
      s.push_bit(v & 1);
      s.push_bits(v, width);
    }
    BitReader r(s);
    for (auto v : values) {
      CHECK(r.read_bit() == bool(v & 1));
      CHECK(r.read_bits(width) == v);
    }
    CHECK(r.at_end());
  }
}

TEST_CASE("unary runs across byte boundaries") {
  BitStream s;
  const std::vector<std::uint64_t> runs{0, 1, 7, 8, 9, 31, 64, 200, 3};
  s.push_bit(true);
  for (auto q : runs) s.push_unary(q);
  BitReader r(s);
  CHECK(r.read_bit());
  for (auto q : runs) CHECK(r.read_unary() == q);
  CHECK(r.at_end());
}

TEST_CASE("reading past the end is corruption") {
  BitStream s;
  s.push_bits(3, 2);
  BitReader r(s);
  CHECK_THROWS_AS(r.read_bits(3), CorruptionError);
  BitStream ones;
  ones.push_bits(0xF, 4);
  BitReader u(ones);
  CHECK_THROWS_AS(u.read_unary(), CorruptionError);
}

TEST_CASE("from_bytes validates length and padding") {
  CHECK_NOTHROW(BitStream::from_bytes({0xA0}, 4));
  CHECK_THROWS_AS(BitStream::from_bytes({0xA1}, 4), CorruptionError);
  CHECK_THROWS_AS(BitStream::from_bytes({0xA0, 0x00}, 4), CorruptionError);
  CHECK_THROWS_AS(BitStream::from_bytes({}, 1), CorruptionError);
  CHECK(BitStream::from_bytes({}, 0).bit_length() == 0);
}
