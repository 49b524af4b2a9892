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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbc/tensor.hpp"

namespace sbc {

struct SparsityConfig {
  // Fraction of entries transmitted, in (0, 1].
  double p = 0.01;
  // Fraction of entries sampled to estimate the selection threshold, in
  // (0, 1]. 1 means exact top-k selection.
  double subsample_fraction = 1.0;
  std::size_t min_k = 1;
  std::uint64_t subsample_seed = 0;

  void validate() const;
  // max(min_k, floor(p * n)), capped at n.
  std::size_t k_for(std::size_t n) const;
};

// A sparse tensor whose non-zeros all equal sign * mean.
struct SparseBinaryUpdate {
  std::string tensor_name;
  std::uint32_t tensor_length = 0;
  std::vector<std::uint32_t> positions;  // strictly increasing
  float mean = 0.0f;                     // >= 0
  int sign = +1;                         // +1 or -1

  float value() const { return sign < 0 ? -mean : mean; }
  friend bool operator==(const SparseBinaryUpdate&,
                         const SparseBinaryUpdate&) = default;
};

// Top-k positions with their exact values (Gradient-Dropping style).
struct SparseValueUpdate {
  std::string tensor_name;
  std::uint32_t tensor_length = 0;
  std::vector<std::uint32_t> positions;
  std::vector<float> values;

  friend bool operator==(const SparseValueUpdate&,
                         const SparseValueUpdate&) = default;
};

// Throws StructuralError if positions are unsorted, repeated or out of range.
void validate(const SparseBinaryUpdate& u);
void validate(const SparseValueUpdate& u);

std::vector<float> densify(const SparseBinaryUpdate& u);
std::vector<float> densify(const SparseValueUpdate& u);

SparseBinaryUpdate sparse_binarize(const FlatTensor& dw,
                                   const SparsityConfig& cfg);
SparseBinaryUpdate sparse_binarize(std::string_view name,
                                   std::span<const float> dw,
                                   const SparsityConfig& cfg);

// Exact top-k by magnitude with the original values, k = cfg.k_for(n).
SparseValueUpdate top_k_values(std::string_view name, std::span<const float> dw,
                               const SparsityConfig& cfg);

enum class ThresholdPolarity { kMagnitude, kPositive, kNegative };

// k'-th largest score of a uniform random subsample of
// ceil(subsample_fraction * n) entries, k' = ceil(p * subsample size). The
// score is |x|, x or -x depending on polarity. Returns nullopt when exact
// selection must be used instead.
std::optional<float> threshold_via_subsample(
    std::span<const float> dw, const SparsityConfig& cfg, std::uint64_t seed,
    ThresholdPolarity polarity = ThresholdPolarity::kMagnitude);

// Per-client error-feedback accumulator, zero initialised.
using Residual = ParameterSet;

struct CompressedSet {
  std::vector<SparseBinaryUpdate> updates;
  Residual residual;
};

// a = residual + dw; u = sparse_binarize(a); residual' = a - dense(u), per
// tensor.
CompressedSet accumulate_and_compress(const ParameterSet& dw,
                                      const Residual& residual,
                                      const SparsityConfig& cfg);

struct ValueCompressedSet {
  std::vector<SparseValueUpdate> updates;
  Residual residual;
};

ValueCompressedSet accumulate_and_select(const ParameterSet& dw,
                                         const Residual& residual,
                                         const SparsityConfig& cfg);

// Zeroes momentum at every listed position of the matching tensor.
ParameterSet mask_momentum(ParameterSet momentum,
                           std::span<const SparseBinaryUpdate> updates);
ParameterSet mask_momentum(ParameterSet momentum,
                           std::span<const SparseValueUpdate> updates);

// Mean of a over support: argmin_c ||a - c * 1_support||_2.
double projection_value(std::span<const float> a,
                        std::span<const std::uint32_t> support);

}  // namespace sbc
