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
#include "sbc/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "sbc/errors.hpp"

namespace sbc {

namespace {

void require_open_unit(double p, const char* fn) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(fn) + ": sparsity must be in (0, 1), got " +
                      std::to_string(p));
  }
}

}  // namespace

unsigned golomb_parameter(double p) {
  require_open_unit(p, "golomb_parameter");
  const double ratio =
      std::log(std::numbers::phi - 1.0) / std::log1p(-p);
  const double b = 1.0 + std::floor(std::log2(ratio));
  if (b <= 0.0) return 0;
  if (b >= kMaxBStar) return kMaxBStar;
  return static_cast<unsigned>(b);
}

unsigned golomb_parameter_for_sparsity(double p) {
  if (p == 1.0) return 0;
  return golomb_parameter(p);
}

double expected_position_bits(double p) {
  require_open_unit(p, "expected_position_bits");
  const unsigned b = golomb_parameter(p);
  // (1 - p)^(2^b) via exp/log1p keeps precision for small p.
  const double miss = std::exp(std::ldexp(1.0, static_cast<int>(b)) * std::log1p(-p));
  return static_cast<double>(b) + 1.0 / (1.0 - miss);
}

double position_bits_model(double p) {
  if (p == 1.0) return 1.0;
  return expected_position_bits(p);
}

BitStream golomb_encode_positions(std::span<const std::uint32_t> positions,
                                  unsigned b_star) {
  if (b_star > kMaxBStar) throw DomainError("b* exceeds 32");
  BitStream out;
  std::int64_t prev = -1;
  const std::uint64_t mask = (std::uint64_t{1} << b_star) - 1;
  for (std::uint32_t pos : positions) {
    const std::int64_t d = static_cast<std::int64_t>(pos) - prev;
    if (d < 1) throw StructuralError("positions must be strictly increasing");
    const auto gap = static_cast<std::uint64_t>(d - 1);
    out.push_unary(gap >> b_star);
    out.push_bits(gap & mask, b_star);
    prev = pos;
  }
  return out;
}

std::vector<std::uint32_t> golomb_decode_positions(const BitStream& payload,
                                                   unsigned b_star,
                                                   std::uint32_t count,
                                                   std::uint32_t tensor_length) {
  if (b_star > kMaxBStar) throw CorruptionError("b* exceeds 32");
  std::vector<std::uint32_t> positions;
  positions.reserve(count);
  BitReader reader(payload);
  std::int64_t j = -1;
  const std::uint64_t max_quotient = std::uint64_t{tensor_length} >> b_star;
  while (!reader.at_end()) {
    if (positions.size() == count) {
      throw CorruptionError("payload holds more than the " +
                            std::to_string(count) + " positions in the header");
    }
    const std::uint64_t q = reader.read_unary();
    if (q > max_quotient) {
      throw CorruptionError("decoded position exceeds tensor length " +
                            std::to_string(tensor_length));
    }
    const std::uint64_t r = reader.read_bits(b_star);
    j += static_cast<std::int64_t>((q << b_star) + r + 1);
    if (j >= static_cast<std::int64_t>(tensor_length)) {
      throw CorruptionError("decoded position " + std::to_string(j) +
                            " >= tensor length " + std::to_string(tensor_length));
    }
    positions.push_back(static_cast<std::uint32_t>(j));
  }
  if (positions.size() != count) {
    throw CorruptionError("decoded " + std::to_string(positions.size()) +
                          " positions, header says " + std::to_string(count));
  }
  return positions;
}

std::uint64_t golomb_payload_bits(std::span<const std::uint32_t> positions,
                                  unsigned b_star) {
  std::uint64_t bits = 0;
  std::int64_t prev = -1;
  for (std::uint32_t pos : positions) {
    const auto gap = static_cast<std::uint64_t>(static_cast<std::int64_t>(pos) - prev - 1);
    bits += (gap >> b_star) + 1 + b_star;
    prev = pos;
  }
  return bits;
}

std::size_t EncodedMessage::wire_bytes() const {
  // name-length + name + tensor-length + count + flags + mean + b* + bits
  return 1 + header.tensor_name.size() + 4 + 4 + 1 + 4 + 1 + 4 +
         payload.bytes().size() + 4 * values.size();
}

namespace {

MessageHeader header_for(const std::string& name, std::uint32_t length,
                         std::size_t count, PayloadKind kind) {
  if (name.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw StructuralError("tensor name '" + name + "' longer than 255 bytes");
  }
  MessageHeader h;
  h.tensor_name = name;
  h.tensor_length = length;
  h.count = static_cast<std::uint32_t>(count);
  h.kind = kind;
  return h;
}

}  // namespace

EncodedMessage encode(const SparseBinaryUpdate& update, unsigned b_star) {
  validate(update);
  EncodedMessage msg;
  msg.header = header_for(update.tensor_name, update.tensor_length,
                          update.positions.size(), PayloadKind::kBinary);
  msg.header.sign = update.sign;
  msg.header.mean = update.positions.empty() ? 0.0f : update.mean;
  msg.header.b_star = static_cast<std::uint8_t>(b_star);
  msg.payload = golomb_encode_positions(update.positions, b_star);
  return msg;
}

EncodedMessage encode(const SparseValueUpdate& update, unsigned b_star) {
  validate(update);
  EncodedMessage msg;
  msg.header = header_for(update.tensor_name, update.tensor_length,
                          update.positions.size(), PayloadKind::kValued);
  msg.header.b_star = static_cast<std::uint8_t>(b_star);
  msg.payload = golomb_encode_positions(update.positions, b_star);
  msg.values = update.values;
  return msg;
}

EncodedMessage encode_dense(const FlatTensor& tensor) {
  if (tensor.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw StructuralError("tensor '" + tensor.name + "' too large to encode");
  }
  EncodedMessage msg;
  const auto n = static_cast<std::uint32_t>(tensor.size());
  msg.header = header_for(tensor.name, n, n, PayloadKind::kDense);
  msg.values = tensor.values;
  return msg;
}

namespace {

void require_kind(const EncodedMessage& msg, PayloadKind kind) {
  if (msg.header.kind != kind) {
    throw CorruptionError("message for '" + msg.header.tensor_name +
                          "' has unexpected payload kind");
  }
}

}  // namespace

SparseBinaryUpdate decode(const EncodedMessage& msg) {
  require_kind(msg, PayloadKind::kBinary);
  const auto& h = msg.header;
  if (h.count == 0 && msg.payload.bit_length() != 0) {
    throw CorruptionError("empty update with non-empty payload");
  }
  if (!(h.mean >= 0.0f) || !std::isfinite(h.mean)) {
    throw CorruptionError("message for '" + h.tensor_name + "' has bad mean");
  }
  SparseBinaryUpdate u;
  u.tensor_name = h.tensor_name;
  u.tensor_length = h.tensor_length;
  u.sign = h.sign;
  u.mean = h.mean;
  u.positions =
      golomb_decode_positions(msg.payload, h.b_star, h.count, h.tensor_length);
  return u;
}

SparseValueUpdate decode_valued(const EncodedMessage& msg) {
  require_kind(msg, PayloadKind::kValued);
  const auto& h = msg.header;
  if (msg.values.size() != h.count) {
    throw CorruptionError("valued message value count mismatch");
  }
  SparseValueUpdate u;
  u.tensor_name = h.tensor_name;
  u.tensor_length = h.tensor_length;
  u.positions =
      golomb_decode_positions(msg.payload, h.b_star, h.count, h.tensor_length);
  u.values = msg.values;
  return u;
}

std::vector<float> decode_to_dense(const EncodedMessage& msg) {
  switch (msg.header.kind) {
    case PayloadKind::kBinary:
      return densify(decode(msg));
    case PayloadKind::kValued:
      return densify(decode_valued(msg));
    case PayloadKind::kDense:
      if (msg.values.size() != msg.header.tensor_length ||
          msg.header.count != msg.header.tensor_length) {
        throw CorruptionError("dense message for '" + msg.header.tensor_name +
                              "' has wrong value count");
      }
      return msg.values;
  }
  throw CorruptionError("unknown payload kind");
}

std::uint64_t naive_bits(std::size_t num_positions, unsigned position_bits,
                         unsigned value_bits) {
  return static_cast<std::uint64_t>(num_positions) *
         (position_bits + value_bits);
}

double total_bits_model(double n_iter, double freq, double nnz, double bpos,
                        double bval, double clients) {
  return n_iter * freq * nnz * (bpos + bval) * clients;
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed endian platforms are not supported");

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = sizeof(T); i-- > 0;) out.push_back(raw[i]);
  } else {
    out.insert(out.end(), raw, raw + sizeof(T));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    need(sizeof(T), field);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + cursor_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(raw, raw + sizeof(T));
    }
    cursor_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    need(n, field);
    auto s = bytes_.subspan(cursor_, n);
    cursor_ += n;
    return s;
  }

  bool at_end() const { return cursor_ == bytes_.size(); }
  std::size_t offset() const { return cursor_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - cursor_ < n) {
      throw CorruptionError(std::string("round payload truncated reading ") +
                            field + " at byte " + std::to_string(cursor_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t cursor_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_round(
    std::span<const EncodedMessage> messages) {
  if (messages.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw StructuralError("too many messages in one round");
  }
  std::size_t total = 2;
  for (const auto& m : messages) total += m.wire_bytes();
  std::vector<std::uint8_t> out;
  out.reserve(total);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(messages.size()));
  for (const auto& m : messages) {
    const auto& h = m.header;
    if (h.tensor_name.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw StructuralError("tensor name too long");
    }
    if (m.payload.bit_length() > std::numeric_limits<std::uint32_t>::max()) {
      throw StructuralError("payload too long");
    }
    out.push_back(static_cast<std::uint8_t>(h.tensor_name.size()));
    out.insert(out.end(), h.tensor_name.begin(), h.tensor_name.end());
    put_le<std::uint32_t>(out, h.tensor_length);
    put_le<std::uint32_t>(out, h.count);
    const std::uint8_t flags = static_cast<std::uint8_t>(
        (h.sign < 0 ? 1u : 0u) | (static_cast<unsigned>(h.kind) << 1));
    out.push_back(flags);
    put_le<float>(out, h.mean);
    out.push_back(h.b_star);
    put_le<std::uint32_t>(out,
                          static_cast<std::uint32_t>(m.payload.bit_length()));
    out.insert(out.end(), m.payload.bytes().begin(), m.payload.bytes().end());
    for (float v : m.values) put_le<float>(out, v);
  }
  return out;
}

std::vector<EncodedMessage> parse_round(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  const auto n = in.get<std::uint16_t>("message count");
  std::vector<EncodedMessage> messages;
  messages.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    EncodedMessage m;
    auto& h = m.header;
    const auto name_len = in.get<std::uint8_t>("name length");
    const auto name = in.take(name_len, "name");
    h.tensor_name.assign(name.begin(), name.end());
    h.tensor_length = in.get<std::uint32_t>("tensor length");
    h.count = in.get<std::uint32_t>("count");
    const auto flags = in.get<std::uint8_t>("flags");
    if ((flags >> 3) != 0 || ((flags >> 1) & 3u) > 2u) {
      throw CorruptionError("unknown flag bits in message for '" +
                            h.tensor_name + "'");
    }
    h.sign = (flags & 1u) ? -1 : +1;
    h.kind = static_cast<PayloadKind>((flags >> 1) & 3u);
    h.mean = in.get<float>("mean");
    h.b_star = in.get<std::uint8_t>("b*");
    const auto bits = in.get<std::uint32_t>("payload bit length");
    const auto payload = in.take((std::size_t{bits} + 7) / 8, "payload");
    m.payload = BitStream::from_bytes({payload.begin(), payload.end()}, bits);
    std::size_t value_count = 0;
    if (h.kind == PayloadKind::kValued) value_count = h.count;
    if (h.kind == PayloadKind::kDense) {
      if (bits != 0 || h.count != h.tensor_length) {
        throw CorruptionError("malformed dense message for '" +
                              h.tensor_name + "'");
      }
      value_count = h.tensor_length;
    }
    if (bytes.size() - in.offset() < 4 * value_count) {
      throw CorruptionError("round payload truncated reading values for '" +
                            h.tensor_name + "'");
    }
    m.values.reserve(value_count);
    for (std::size_t v = 0; v < value_count; ++v) {
      m.values.push_back(in.get<float>("value"));
    }
    messages.push_back(std::move(m));
  }
  if (!in.at_end()) {
    throw CorruptionError("trailing bytes after round payload");
  }
  return messages;
}

}  // namespace sbc
