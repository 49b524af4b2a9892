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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbc/bitstream.hpp"
#include "sbc/compress.hpp"
#include "sbc/tensor.hpp"

namespace sbc {

// Largest remainder width accepted on the wire.
inline constexpr unsigned kMaxBStar = 32;

// b* = 1 + floor(log2(ln(phi - 1) / ln(1 - p))), clamped to [0, kMaxBStar].
// Throws DomainError unless 0 < p < 1.
unsigned golomb_parameter(double p);
// As golomb_parameter, extended to p = 1 (dense support) with b* = 0.
unsigned golomb_parameter_for_sparsity(double p);

// b* + 1 / (1 - (1 - p)^(2^b*)): expected Golomb bits per position for
// geometric(p) gaps. Throws DomainError unless 0 < p < 1.
double expected_position_bits(double p);
// expected_position_bits extended to p = 1 (every gap is 1: one bit each).
double position_bits_model(double p);

// Gap coding with sentinel previous position -1: for each d = pos_i -
// pos_{i-1}, (d - 1) div 2^b* ones, a zero, then (d - 1) mod 2^b* in b* bits.
BitStream golomb_encode_positions(std::span<const std::uint32_t> positions,
                                  unsigned b_star);
// Throws CorruptionError on truncation, out-of-range positions or a count
// mismatch.
std::vector<std::uint32_t> golomb_decode_positions(const BitStream& payload,
                                                   unsigned b_star,
                                                   std::uint32_t count,
                                                   std::uint32_t tensor_length);
// Closed form sum_i (floor((d_i - 1) / 2^b*) + 1 + b*).
std::uint64_t golomb_payload_bits(std::span<const std::uint32_t> positions,
                                  unsigned b_star);

enum class PayloadKind : std::uint8_t {
  kBinary = 0,  // Golomb positions, one signed mean
  kValued = 1,  // Golomb positions, one f32 per position
  kDense = 2,   // no positions, one f32 per tensor entry
};

struct MessageHeader {
  std::string tensor_name;
  std::uint32_t tensor_length = 0;
  std::uint32_t count = 0;
  int sign = +1;
  PayloadKind kind = PayloadKind::kBinary;
  float mean = 0.0f;
  std::uint8_t b_star = 0;

  friend bool operator==(const MessageHeader&, const MessageHeader&) = default;
};

struct EncodedMessage {
  MessageHeader header;
  BitStream payload;
  std::vector<float> values;  // kValued / kDense only

  // Exact size of the serialized record, in bytes.
  std::size_t wire_bytes() const;
  friend bool operator==(const EncodedMessage&, const EncodedMessage&) = default;
};

EncodedMessage encode(const SparseBinaryUpdate& update, unsigned b_star);
EncodedMessage encode(const SparseValueUpdate& update, unsigned b_star);
EncodedMessage encode_dense(const FlatTensor& tensor);

SparseBinaryUpdate decode(const EncodedMessage& msg);
SparseValueUpdate decode_valued(const EncodedMessage& msg);
// Dense realization of any message kind.
std::vector<float> decode_to_dense(const EncodedMessage& msg);

// Cost of a naive sparse encoding with fixed-width positions and values.
std::uint64_t naive_bits(std::size_t num_positions,
                         unsigned position_bits = 16,
                         unsigned value_bits = 32);
inline std::uint64_t naive_bits(const SparseBinaryUpdate& u,
                                unsigned position_bits = 16,
                                unsigned value_bits = 32) {
  return naive_bits(u.positions.size(), position_bits, value_bits);
}

// n_iter * freq * nnz * (bpos + bval) * K.
double total_bits_model(double n_iter, double freq, double nnz, double bpos,
                        double bval, double clients);

// Round payload: [u16 count] then one record per message:
// [u8 name-length][name][u32 tensor-length][u32 count][u8 flags][f32 mean]
// [u8 b*][u32 payload-bits][payload bytes][f32 values...], little-endian.
// flags bit0 = negative sign, bits1-2 = PayloadKind.
std::vector<std::uint8_t> serialize_round(
    std::span<const EncodedMessage> messages);
std::vector<EncodedMessage> parse_round(std::span<const std::uint8_t> bytes);

}  // namespace sbc
