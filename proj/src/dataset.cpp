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
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "sbc/errors.hpp"
#include "sbc/train.hpp"

namespace sbc {

void Dataset::validate() const {
  if (features.size() != rows * cols) {
    throw StructuralError("dataset: feature matrix is not rows x cols");
  }
  const std::size_t per_row = task == TaskKind::kRegression ? target_dim : 1;
  if (targets.size() != rows * per_row) {
    throw StructuralError("dataset: target count does not match row count");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> row_ids) const {
  Dataset out;
  out.task = task;
  out.cols = cols;
  out.target_dim = target_dim;
  out.num_classes = num_classes;
  out.rows = row_ids.size();
  const std::size_t per_row = task == TaskKind::kRegression ? target_dim : 1;
  out.features.reserve(row_ids.size() * cols);
  out.targets.reserve(row_ids.size() * per_row);
  for (std::size_t r : row_ids) {
    if (r >= rows) throw StructuralError("dataset subset: row out of range");
    auto f = row(r);
    out.features.insert(out.features.end(), f.begin(), f.end());
    auto t = targets.begin() + static_cast<std::ptrdiff_t>(r * per_row);
    out.targets.insert(out.targets.end(), t, t + static_cast<std::ptrdiff_t>(per_row));
  }
  return out;
}

Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.size == 0) throw ConfigError("dataset size must be positive");
  if (spec.dim == 0) throw ConfigError("dataset dim must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset d;
  d.rows = spec.size;
  d.cols = spec.dim;
  d.features.resize(spec.size * spec.dim);

  switch (spec.kind) {
    case DatasetKind::kBlobs: {
      std::vector<double> direction(spec.dim);
      double norm = 0.0;
      for (double& v : direction) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : direction) v /= norm;
      d.task = TaskKind::kClassification;
      d.num_classes = 2;
      d.targets.resize(spec.size);
      for (std::size_t r = 0; r < spec.size; ++r) {
        const std::size_t label = r % 2;
        const double offset = (label == 1 ? 0.5 : -0.5) * spec.separation;
        for (std::size_t c = 0; c < spec.dim; ++c) {
          d.features[r * spec.dim + c] =
              static_cast<float>(offset * direction[c] + normal(rng));
        }
        d.targets[r] = static_cast<float>(label);
      }
      break;
    }
    case DatasetKind::kLinreg: {
      if (spec.outputs == 0) throw ConfigError("linreg outputs must be positive");
      const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
      std::vector<double> a(spec.outputs * spec.dim);
      for (double& v : a) v = normal(rng) * scale;
      d.task = TaskKind::kRegression;
      d.target_dim = spec.outputs;
      d.num_classes = 0;
      d.targets.resize(spec.size * spec.outputs);
      for (std::size_t r = 0; r < spec.size; ++r) {
        for (std::size_t c = 0; c < spec.dim; ++c) {
          d.features[r * spec.dim + c] = static_cast<float>(normal(rng));
        }
        for (std::size_t o = 0; o < spec.outputs; ++o) {
          double y = 0.0;
          for (std::size_t c = 0; c < spec.dim; ++c) {
            y += a[o * spec.dim + c] * d.features[r * spec.dim + c];
          }
          if (spec.noise > 0.0) y += spec.noise * normal(rng);
          d.targets[r * spec.outputs + o] = static_cast<float>(y);
        }
      }
      break;
    }
    case DatasetKind::kXor: {
      if (spec.dim < 2) throw ConfigError("xor dataset needs dim >= 2");
      std::uniform_real_distribution<double> uniform(-1.0, 1.0);
      d.task = TaskKind::kClassification;
      d.num_classes = 2;
      d.targets.resize(spec.size);
      for (std::size_t r = 0; r < spec.size; ++r) {
        for (std::size_t c = 0; c < spec.dim; ++c) {
          d.features[r * spec.dim + c] = static_cast<float>(uniform(rng));
        }
        const float x0 = d.features[r * spec.dim];
        const float x1 = d.features[r * spec.dim + 1];
        d.targets[r] = x0 * x1 > 0.0f ? 1.0f : 0.0f;
      }
      break;
    }
  }
  return d;
}

std::vector<Dataset> split_iid(const Dataset& data, std::size_t clients,
                               std::uint64_t seed) {
  if (clients == 0) throw ConfigError("split_iid: need at least one client");
  if (clients > data.rows) {
    throw ConfigError("split_iid: " + std::to_string(clients) +
                      " clients for " + std::to_string(data.rows) + " rows");
  }
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> shards;
  shards.reserve(clients);
  const std::size_t base = data.rows / clients;
  const std::size_t extra = data.rows % clients;
  std::size_t start = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    shards.push_back(data.subset(std::span(order).subspan(start, len)));
    start += len;
  }
  return shards;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data,
                                          double validation_fraction) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }
  const auto val = static_cast<std::size_t>(
      std::ceil(validation_fraction * static_cast<double>(data.rows)));
  std::vector<std::size_t> train_rows(data.rows - val);
  std::vector<std::size_t> val_rows(val);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::iota(val_rows.begin(), val_rows.end(), data.rows - val);
  return {data.subset(train_rows), data.subset(val_rows)};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

class BigEndianReader {
 public:
  explicit BigEndianReader(std::span<const std::uint8_t> bytes)
      : bytes_(bytes) {}

  std::uint64_t read(std::size_t width, const char* what) {
    if (bytes_.size() - offset_ < width) {
      throw ParseError(std::string("IDX: truncated ") + what, offset_);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v = (v << 8) | bytes_[offset_++];
    return v;
  }
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

std::size_t idx_width(std::uint8_t type) {
  switch (type) {
    case 0x08: case 0x09: return 1;
    case 0x0B: return 2;
    case 0x0C: case 0x0D: return 4;
    case 0x0E: return 8;
    default: return 0;
  }
}

float idx_value(std::uint8_t type, std::uint64_t raw) {
  switch (type) {
    case 0x08: return static_cast<float>(static_cast<std::uint8_t>(raw));
    case 0x09: return static_cast<float>(static_cast<std::int8_t>(raw));
    case 0x0B: return static_cast<float>(static_cast<std::int16_t>(raw));
    case 0x0C: return static_cast<float>(static_cast<std::int32_t>(raw));
    case 0x0D: {
      float f;
      const auto bits = static_cast<std::uint32_t>(raw);
      std::memcpy(&f, &bits, sizeof f);
      return f;
    }
    default: {
      double f;
      std::memcpy(&f, &raw, sizeof f);
      return static_cast<float>(f);
    }
  }
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  BigEndianReader in(bytes);
  if (in.read(2, "magic") != 0) {
    throw ParseError("IDX: magic must start with two zero bytes", 0);
  }
  IdxArray out;
  out.type_code = static_cast<std::uint8_t>(in.read(1, "type code"));
  const std::size_t width = idx_width(out.type_code);
  if (width == 0) throw ParseError("IDX: unknown type code", 2);
  const auto rank = in.read(1, "rank");
  if (rank == 0) throw ParseError("IDX: rank must be positive", 3);
  std::size_t count = 1;
  for (std::uint64_t d = 0; d < rank; ++d) {
    const std::size_t at = in.offset();
    const auto dim = in.read(4, "dimension");
    if (dim == 0) throw ParseError("IDX: zero dimension", at);
    out.dims.push_back(static_cast<std::size_t>(dim));
    count *= static_cast<std::size_t>(dim);
  }
  if (in.remaining() != count * width) {
    throw ParseError("IDX: expected " + std::to_string(count * width) +
                         " data bytes, found " + std::to_string(in.remaining()),
                     in.offset());
  }
  out.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.values.push_back(idx_value(out.type_code, in.read(width, "data")));
  }
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open IDX file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels, float feature_scale) {
  const IdxArray x = read_idx(images);
  const IdxArray y = read_idx(labels);
  if (y.dims.size() != 1 || y.dims[0] != x.dims[0]) {
    throw StructuralError("IDX: label file does not match image count");
  }
  Dataset d;
  d.task = TaskKind::kClassification;
  d.rows = x.dims[0];
  d.cols = x.values.size() / d.rows;
  d.features = x.values;
  for (float& v : d.features) v *= feature_scale;
  d.targets = y.values;
  float max_label = 0.0f;
  for (float v : d.targets) {
    if (v < 0.0f || v != std::floor(v)) {
      throw StructuralError("IDX: labels must be non-negative integers");
    }
    max_label = std::max(max_label, v);
  }
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

}  // namespace sbc
