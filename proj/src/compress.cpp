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
#include "sbc/compress.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "sbc/errors.hpp"

namespace sbc {

void SparsityConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("sparsity p must be in (0, 1], got " + std::to_string(p));
  }
  if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
    throw ConfigError("subsample_fraction must be in (0, 1], got " +
                      std::to_string(subsample_fraction));
  }
}

std::size_t SparsityConfig::k_for(std::size_t n) const {
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
  return std::min(n, std::max(min_k, k));
}

namespace {

template <typename Update>
void validate_positions(const Update& u) {
  for (std::size_t i = 0; i < u.positions.size(); ++i) {
    if (u.positions[i] >= u.tensor_length) {
      throw StructuralError("update for '" + u.tensor_name + "': position " +
                            std::to_string(u.positions[i]) +
                            " out of range for length " +
                            std::to_string(u.tensor_length));
    }
    if (i > 0 && u.positions[i] <= u.positions[i - 1]) {
      throw StructuralError("update for '" + u.tensor_name +
                            "': positions not strictly increasing");
    }
  }
}

// k-th largest score (1-based k), k <= scores.size().
float kth_largest(std::vector<float> scores, std::size_t k) {
  auto nth = scores.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scores.begin(), nth, scores.end(), std::greater<float>());
  return *nth;
}

struct SideSelection {
  double mean_of_top = 0.0;  // mean of the k top scores on this side
  float threshold = 0.0f;
};

// Threshold and mean of the k largest values of sign * dw.
SideSelection top_side(std::span<const float> dw, int sign, std::size_t k) {
  std::vector<float> scores(dw.size());
  for (std::size_t i = 0; i < dw.size(); ++i) {
    scores[i] = sign > 0 ? dw[i] : -dw[i];
  }
  auto nth = scores.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scores.begin(), nth, scores.end(), std::greater<float>());
  SideSelection s;
  s.threshold = *nth;
  double sum = 0.0;
  for (auto it = scores.begin(); it <= nth; ++it) sum += *it;
  s.mean_of_top = sum / static_cast<double>(k);
  return s;
}

// Indices with score > threshold, then ties at a positive threshold in index
// order until k are taken. Scores <= 0 are never selected.
std::vector<std::uint32_t> select_exact(std::span<const float> dw, int sign,
                                        float threshold, std::size_t k) {
  std::vector<std::uint32_t> out;
  const float floor_value = std::max(threshold, 0.0f);
  std::size_t above = 0;
  for (float v : dw) {
    if ((sign > 0 ? v : -v) > floor_value) ++above;
  }
  std::size_t ties_left = threshold > 0.0f && above < k ? k - above : 0;
  out.reserve(above + ties_left);
  for (std::size_t i = 0; i < dw.size(); ++i) {
    const float s = sign > 0 ? dw[i] : -dw[i];
    if (s > floor_value) {
      out.push_back(static_cast<std::uint32_t>(i));
    } else if (ties_left > 0 && s == threshold) {
      out.push_back(static_cast<std::uint32_t>(i));
      --ties_left;
    }
  }
  return out;
}

std::vector<std::uint32_t> select_at_least(std::span<const float> dw, int sign,
                                           float threshold) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < dw.size(); ++i) {
    const float s = sign > 0 ? dw[i] : -dw[i];
    if (s > 0.0f && s >= threshold) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

double mean_over(std::span<const float> dw,
                 std::span<const std::uint32_t> support, int sign) {
  if (support.empty()) return 0.0;
  double sum = 0.0;
  for (auto i : support) sum += sign > 0 ? dw[i] : -dw[i];
  return sum / static_cast<double>(support.size());
}

SparseBinaryUpdate make_update(std::string_view name, std::size_t n, int sign,
                               std::vector<std::uint32_t> positions,
                               std::span<const float> dw) {
  SparseBinaryUpdate u;
  u.tensor_name = std::string(name);
  u.tensor_length = static_cast<std::uint32_t>(n);
  u.sign = sign;
  u.mean = static_cast<float>(std::max(0.0, mean_over(dw, positions, sign)));
  u.positions = std::move(positions);
  return u;
}

void check_length(std::string_view name, std::size_t n) {
  if (n == 0) {
    throw StructuralError("sparse_binarize: tensor '" + std::string(name) +
                          "' is empty");
  }
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw StructuralError("tensor '" + std::string(name) +
                          "' exceeds the 32-bit position range");
  }
}

}  // namespace

void validate(const SparseBinaryUpdate& u) {
  if (u.sign != 1 && u.sign != -1) {
    throw StructuralError("update for '" + u.tensor_name + "': bad sign");
  }
  if (!(u.mean >= 0.0f)) {
    throw StructuralError("update for '" + u.tensor_name +
                          "': mean must be non-negative");
  }
  validate_positions(u);
}

void validate(const SparseValueUpdate& u) {
  if (u.values.size() != u.positions.size()) {
    throw StructuralError("update for '" + u.tensor_name +
                          "': value count != position count");
  }
  validate_positions(u);
}

std::vector<float> densify(const SparseBinaryUpdate& u) {
  std::vector<float> out(u.tensor_length, 0.0f);
  const float v = u.value();
  for (auto i : u.positions) out.at(i) = v;
  return out;
}

std::vector<float> densify(const SparseValueUpdate& u) {
  std::vector<float> out(u.tensor_length, 0.0f);
  for (std::size_t j = 0; j < u.positions.size(); ++j) {
    out.at(u.positions[j]) = u.values[j];
  }
  return out;
}

SparseBinaryUpdate sparse_binarize(const FlatTensor& dw,
                                   const SparsityConfig& cfg) {
  return sparse_binarize(dw.name, dw.values, cfg);
}

SparseBinaryUpdate sparse_binarize(std::string_view name,
                                   std::span<const float> dw,
                                   const SparsityConfig& cfg) {
  cfg.validate();
  check_length(name, dw.size());
  const std::size_t n = dw.size();

  if (cfg.subsample_fraction < 1.0) {
    const auto pos_thr = threshold_via_subsample(
        dw, cfg, cfg.subsample_seed, ThresholdPolarity::kPositive);
    const auto neg_thr = threshold_via_subsample(
        dw, cfg, cfg.subsample_seed, ThresholdPolarity::kNegative);
    if (pos_thr && neg_thr) {
      auto pos = select_at_least(dw, +1, *pos_thr);
      auto neg = select_at_least(dw, -1, *neg_thr);
      const double mu_pos = mean_over(dw, pos, +1);
      const double mu_neg = mean_over(dw, neg, -1);
      if (mu_pos >= mu_neg) return make_update(name, n, +1, std::move(pos), dw);
      return make_update(name, n, -1, std::move(neg), dw);
    }
  }

  const std::size_t k = cfg.k_for(n);
  const SideSelection pos = top_side(dw, +1, k);
  const SideSelection neg = top_side(dw, -1, k);
  if (pos.mean_of_top >= neg.mean_of_top) {
    return make_update(name, n, +1, select_exact(dw, +1, pos.threshold, k), dw);
  }
  return make_update(name, n, -1, select_exact(dw, -1, neg.threshold, k), dw);
}

SparseValueUpdate top_k_values(std::string_view name, std::span<const float> dw,
                               const SparsityConfig& cfg) {
  cfg.validate();
  check_length(name, dw.size());
  const std::size_t n = dw.size();

  std::vector<float> magnitude(n);
  for (std::size_t i = 0; i < n; ++i) magnitude[i] = std::fabs(dw[i]);

  std::vector<std::uint32_t> positions;
  std::optional<float> sub;
  if (cfg.subsample_fraction < 1.0) {
    sub = threshold_via_subsample(dw, cfg, cfg.subsample_seed);
  }
  if (sub) {
    positions = select_at_least(magnitude, +1, *sub);
  } else {
    const std::size_t k = cfg.k_for(n);
    positions = select_exact(magnitude, +1, kth_largest(magnitude, k), k);
  }

  SparseValueUpdate u;
  u.tensor_name = std::string(name);
  u.tensor_length = static_cast<std::uint32_t>(n);
  u.values.reserve(positions.size());
  for (auto i : positions) u.values.push_back(dw[i]);
  u.positions = std::move(positions);
  return u;
}

std::optional<float> threshold_via_subsample(std::span<const float> dw,
                                             const SparsityConfig& cfg,
                                             std::uint64_t seed,
                                             ThresholdPolarity polarity) {
  cfg.validate();
  const std::size_t n = dw.size();
  if (n == 0) return std::nullopt;
  auto score = [polarity](float v) {
    switch (polarity) {
      case ThresholdPolarity::kPositive: return v;
      case ThresholdPolarity::kNegative: return -v;
      default: return std::fabs(v);
    }
  };

  std::vector<float> scores;
  std::size_t k = 0;
  if (cfg.subsample_fraction >= 1.0) {
    scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = score(dw[i]);
    k = cfg.k_for(n);
  } else {
    const auto m = static_cast<std::size_t>(
        std::ceil(cfg.subsample_fraction * static_cast<double>(n)));
    // Partial Fisher-Yates over the index range.
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    scores.resize(m);
    for (std::size_t i = 0; i < m; ++i) scores[i] = score(dw[idx[i]]);
    k = static_cast<std::size_t>(std::ceil(cfg.p * static_cast<double>(m)));
    k = std::max<std::size_t>(k, 1);
  }
  if (scores.size() < k || k == 0) return std::nullopt;
  return kth_largest(std::move(scores), k);
}

namespace {

template <typename Update, typename Compress>
std::pair<std::vector<Update>, Residual> accumulate(
    const ParameterSet& dw, const Residual& residual, const char* context,
    Compress&& compress) {
  require_compatible(dw, residual, context);
  std::vector<Update> updates;
  updates.reserve(dw.size());
  Residual next = residual;
  for (std::size_t t = 0; t < dw.size(); ++t) {
    auto& acc = next[t].values;
    const auto& d = dw[t].values;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += d[j];
    Update u = compress(t, next[t]);
    const std::vector<float> dense = densify(u);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] -= dense[j];
    updates.push_back(std::move(u));
  }
  return {std::move(updates), std::move(next)};
}

SparsityConfig per_tensor(const SparsityConfig& cfg, std::size_t t) {
  SparsityConfig c = cfg;
  c.subsample_seed = cfg.subsample_seed + 0x9E3779B97F4A7C15ull * (t + 1);
  return c;
}

}  // namespace

CompressedSet accumulate_and_compress(const ParameterSet& dw,
                                      const Residual& residual,
                                      const SparsityConfig& cfg) {
  auto [updates, next] = accumulate<SparseBinaryUpdate>(
      dw, residual, "accumulate_and_compress",
      [&](std::size_t t, const FlatTensor& a) {
        return sparse_binarize(a.name, a.values, per_tensor(cfg, t));
      });
  return {std::move(updates), std::move(next)};
}

ValueCompressedSet accumulate_and_select(const ParameterSet& dw,
                                         const Residual& residual,
                                         const SparsityConfig& cfg) {
  auto [updates, next] = accumulate<SparseValueUpdate>(
      dw, residual, "accumulate_and_select",
      [&](std::size_t t, const FlatTensor& a) {
        return top_k_values(a.name, a.values, per_tensor(cfg, t));
      });
  return {std::move(updates), std::move(next)};
}

namespace {

template <typename Update>
ParameterSet mask(ParameterSet momentum, std::span<const Update> updates) {
  for (const auto& u : updates) {
    FlatTensor* slot = momentum.find(u.tensor_name);
    if (slot == nullptr) {
      throw StructuralError("mask_momentum: no momentum slot for '" +
                            u.tensor_name + "'");
    }
    for (auto i : u.positions) {
      if (i >= slot->size()) {
        throw StructuralError("mask_momentum: position " + std::to_string(i) +
                              " out of range for '" + u.tensor_name + "'");
      }
      slot->values[i] = 0.0f;
    }
  }
  return momentum;
}

}  // namespace

ParameterSet mask_momentum(ParameterSet momentum,
                           std::span<const SparseBinaryUpdate> updates) {
  return mask(std::move(momentum), updates);
}

ParameterSet mask_momentum(ParameterSet momentum,
                           std::span<const SparseValueUpdate> updates) {
  return mask(std::move(momentum), updates);
}

double projection_value(std::span<const float> a,
                        std::span<const std::uint32_t> support) {
  if (support.empty()) throw DomainError("projection_value: empty support");
  double sum = 0.0;
  for (auto i : support) {
    if (i >= a.size()) {
      throw StructuralError("projection_value: position out of range");
    }
    sum += a[i];
  }
  return sum / static_cast<double>(support.size());
}

}  // namespace sbc
