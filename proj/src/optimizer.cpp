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
#include <cmath>
#include <random>

#include "sbc/errors.hpp"
#include "sbc/train.hpp"

namespace sbc {

double OptimizerConfig::rate_at(std::uint64_t step) const {
  double rate = learning_rate;
  for (const auto& d : schedule) {
    if (step >= d.at_step) rate *= d.factor;
  }
  return rate;
}

ParameterSet* OptimizerState::momentum_slot() {
  return config.kind == OptimizerKind::kSgd ? nullptr : &first;
}

OptimizerState make_optimizer(const OptimizerConfig& config,
                              const ParameterSet& params) {
  if (!(config.learning_rate >= 0.0)) {
    throw ConfigError("learning rate must be non-negative");
  }
  OptimizerState s;
  s.config = config;
  if (config.kind != OptimizerKind::kSgd) s.first = zeros_like(params);
  if (config.kind == OptimizerKind::kAdam) s.second = zeros_like(params);
  return s;
}

void optimizer_step(OptimizerState& opt, ParameterSet& params,
                    const ParameterSet& grads, ParameterSet* applied) {
  require_compatible(params, grads, "optimizer_step");
  if (applied != nullptr) require_compatible(params, *applied, "optimizer_step");
  const auto& cfg = opt.config;
  const float lr = static_cast<float>(cfg.rate_at(opt.step));
  ++opt.step;

  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  const auto mu = static_cast<float>(cfg.momentum);
  const auto b1 = static_cast<float>(cfg.beta1);
  const auto b2 = static_cast<float>(cfg.beta2);

  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& w = params[t].values;
    const auto& g = grads[t].values;
    float* acc = applied != nullptr ? (*applied)[t].values.data() : nullptr;
    for (std::size_t i = 0; i < w.size(); ++i) {
      float step = 0.0f;
      switch (cfg.kind) {
        case OptimizerKind::kSgd:
          step = -(lr * g[i]);
          break;
        case OptimizerKind::kMomentum: {
          float& m = opt.first[t].values[i];
          m = mu * m + g[i];
          step = -(lr * m);
          break;
        }
        case OptimizerKind::kAdam: {
          float& m = opt.first[t].values[i];
          float& v = opt.second[t].values[i];
          m = b1 * m + (1.0f - b1) * g[i];
          v = b2 * v + (1.0f - b2) * g[i] * g[i];
          const double m_hat = m / bias1;
          const double v_hat = v / bias2;
          step = static_cast<float>(-static_cast<double>(lr) * m_hat /
                                    (std::sqrt(v_hat) + cfg.epsilon));
          break;
        }
      }
      w[i] += step;
      if (acc != nullptr) acc[i] += step;
    }
  }
}

LocalResult sgd_n(const Model& model, OptimizerState& opt, const Dataset& shard,
                  std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sgd_n: need at least one iteration");
  if (batch_size == 0) throw ConfigError("sgd_n: batch size must be positive");
  if (shard.rows == 0) throw StructuralError("sgd_n: empty shard");

  Model local = model;
  LocalResult result;
  result.update = zeros_like(model.params);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, shard.rows - 1);
  std::vector<std::size_t> rows(batch_size);
  double loss_sum = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    for (auto& r : rows) r = pick(rng);
    const ForwardResult fwd = forward_loss(local, shard, rows);
    const ParameterSet grads = backward(local, shard, fwd.cache);
    optimizer_step(opt, local.params, grads, &result.update);
    loss_sum += fwd.loss;
  }
  result.weights = std::move(local.params);
  result.mean_loss = loss_sum / static_cast<double>(n);
  return result;
}

}  // namespace sbc
