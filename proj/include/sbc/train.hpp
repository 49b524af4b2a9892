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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbc/tensor.hpp"

namespace sbc {

// ---------------------------------------------------------------------------
// Data

enum class TaskKind { kRegression, kClassification };

// Row-major features; targets are one label per row (classification) or
// target_dim values per row (regression).
struct Dataset {
  TaskKind task = TaskKind::kClassification;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t target_dim = 1;
  std::size_t num_classes = 2;
  std::vector<float> features;
  std::vector<float> targets;

  std::span<const float> row(std::size_t r) const {
    return {features.data() + r * cols, cols};
  }
  std::span<const float> target(std::size_t r) const {
    return {targets.data() + r * target_dim, target_dim};
  }
  std::size_t label(std::size_t r) const {
    return static_cast<std::size_t>(targets[r]);
  }
  // Throws StructuralError if row counts disagree.
  void validate() const;
  Dataset subset(std::span<const std::size_t> row_ids) const;
};

enum class DatasetKind { kBlobs, kLinreg, kXor };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kBlobs;
  std::size_t size = 1000;
  std::uint64_t seed = 0;
  std::size_t dim = 2;
  // blobs: distance between the two class means in units of sigma.
  double separation = 10.0;
  // linreg: std of the additive Gaussian noise; outputs = target_dim.
  double noise = 0.0;
  std::size_t outputs = 1;
};

// blobs: two unit-variance Gaussian classes, means +-separation/2 along a
// random unit direction, labels alternate. linreg: y = A x + noise with
// x ~ N(0, I). xor: x ~ U[-1, 1]^dim, label = [x0 * x1 > 0].
Dataset make_dataset(const DatasetSpec& spec);

// Random permutation cut into K contiguous shards; the first N mod K shards
// get one extra row.
std::vector<Dataset> split_iid(const Dataset& data, std::size_t clients,
                               std::uint64_t seed);
// Last ceil(fraction * rows) rows become the validation set.
std::pair<Dataset, Dataset> split_holdout(const Dataset& data,
                                          double validation_fraction);

struct IdxArray {
  std::uint8_t type_code = 0x08;
  std::vector<std::size_t> dims;
  std::vector<float> values;
};

// Standard big-endian IDX layout: two zero bytes, type code, rank, u32 dims,
// data. Throws ParseError with the failing byte offset.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
IdxArray read_idx(const std::filesystem::path& path);
// Features from an image file (items flattened, scaled by feature_scale) and
// class labels from a label file.
Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels,
                 float feature_scale = 1.0f / 255.0f);

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { kLinearRegression, kLogisticRegression, kMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 2;
  // Logistic/MLP: 1 selects a sigmoid head, >1 softmax.
  std::size_t output_dim = 2;
  std::size_t hidden = 0;  // MLP only
};

struct Model {
  ModelSpec spec;
  ParameterSet params;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

struct ForwardCache {
  std::vector<std::size_t> rows;
  std::vector<double> hidden_pre;  // MLP: batch x hidden
  std::vector<double> hidden;
  // d(loss)/d(output), batch x output_dim, already divided by batch size.
  std::vector<double> output_grad;
};

struct ForwardResult {
  double loss = 0.0;
  ForwardCache cache;
};

// Mean loss over the batch rows: 0.5 * squared error for linear regression,
// cross-entropy (sigmoid or softmax) for classification.
ForwardResult forward_loss(const Model& model, const Dataset& data,
                           std::span<const std::size_t> rows);
ParameterSet backward(const Model& model, const Dataset& data,
                      const ForwardCache& cache);

struct EvalMetrics {
  double loss = 0.0;
  std::optional<double> accuracy;  // classification only
};

EvalMetrics evaluate(const Model& model, const Dataset& data);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { kSgd, kMomentum, kAdam };

// Multiply the learning rate by factor once step reaches at_step.
struct LrDecay {
  double factor = 0.1;
  std::uint64_t at_step = 0;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<LrDecay> schedule;

  double rate_at(std::uint64_t step) const;
};

struct OptimizerState {
  OptimizerConfig config;
  ParameterSet first;   // momentum buffer or Adam first moment
  ParameterSet second;  // Adam second moment
  std::uint64_t step = 0;

  // The buffer momentum masking applies to, or nullptr for plain SGD.
  ParameterSet* momentum_slot();
};

OptimizerState make_optimizer(const OptimizerConfig& config,
                              const ParameterSet& params);

// One update of params in place. When applied is non-null, the float
// increment written into each weight is added to it.
void optimizer_step(OptimizerState& opt, ParameterSet& params,
                    const ParameterSet& grads, ParameterSet* applied = nullptr);

struct LocalResult {
  ParameterSet weights;
  // Sum of the increments applied by the n steps.
  ParameterSet update;
  double mean_loss = 0.0;
};

// n mini-batch steps from model.params, rows sampled uniformly with
// replacement from shard using a generator seeded with seed.
LocalResult sgd_n(const Model& model, OptimizerState& opt, const Dataset& shard,
                  std::size_t n, std::size_t batch_size, std::uint64_t seed);

}  // namespace sbc
