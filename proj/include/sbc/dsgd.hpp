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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sbc/codec.hpp"
#include "sbc/compress.hpp"
#include "sbc/train.hpp"

namespace sbc {

enum class CompressionMode {
  kIdentity,      // dense float32 updates, no residual
  kSparseBinary,  // top-p per sign, one mean per tensor, Golomb positions
  kTopKValues,    // top-p by magnitude with exact values, Golomb positions
};

struct CompressionStrategy {
  CompressionMode mode = CompressionMode::kSparseBinary;
  SparsityConfig sparsity;
  bool momentum_masking = false;
};

struct RoundConfig {
  std::size_t local_iterations = 1;  // n
  double participation = 1.0;
  std::size_t rounds = 1;  // T
  std::size_t batch_size = 32;
  std::size_t clients = 1;  // K

  void validate() const;
};

struct ClientState {
  std::size_t id = 0;
  ParameterSet weights;
  Residual residual;
  OptimizerState optimizer;
  Dataset shard;
};

struct ServerState {
  ParameterSet weights;
  ParameterSet update;  // last global update
  std::size_t round = 0;
};

// splitmix64 over (master, client, round, stream). Used for every RNG stream
// so that results do not depend on client scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t client,
                          std::uint64_t round, std::uint64_t stream = 0);

// Seed streams.
inline constexpr std::uint64_t kStreamBatches = 0;
inline constexpr std::uint64_t kStreamSubsample = 1;
inline constexpr std::uint64_t kStreamParticipants = 2;
inline constexpr std::uint64_t kStreamShards = 3;
inline constexpr std::uint64_t kStreamInit = 4;

struct ClientMessage {
  std::size_t client_id = 0;
  std::vector<std::uint8_t> bytes;  // serialized round payload
  std::uint64_t uplink_bits = 0;    // bytes.size() * 8
  std::uint64_t nonzeros = 0;       // transmitted entries
  double theoretical_bits = 0.0;    // total_bits_model for this message
  double local_loss = 0.0;
};

void apply_broadcast(ClientState& client, const ParameterSet& broadcast);

// Applies the broadcast, runs n local steps, compresses the weight-update
// with error feedback and serializes it.
ClientMessage client_round(ClientState& client, const ModelSpec& model,
                           const ParameterSet* broadcast,
                           const CompressionStrategy& strategy,
                           const RoundConfig& rounds,
                           std::uint64_t master_seed, std::size_t round);

class RoundError : public std::runtime_error {
 public:
  RoundError(std::size_t client, const std::string& what)
      : std::runtime_error("client " + std::to_string(client) + ": " + what),
        client_(client) {}
  std::size_t client() const { return client_; }

 private:
  std::size_t client_;
};

// Decodes every message, averages in ascending client id and applies the
// mean to the master weights. Returns the broadcast update.
const ParameterSet& server_round(ServerState& server,
                                 std::vector<ClientMessage> messages);

// ceil(fraction * K) distinct ids in [0, K), sorted.
std::vector<std::size_t> sample_participants(std::size_t clients,
                                             double fraction, std::size_t round,
                                             std::uint64_t seed);

// Serialized size of an identity-mode message for these parameters.
std::uint64_t dense_message_bits(const ParameterSet& params);

// Bits the cost model predicts for one message of `nonzeros` entries.
double theoretical_message_bits(const CompressionStrategy& strategy,
                                std::uint64_t nonzeros);

// Delivery hook between clients and server. The default passes bytes
// through unchanged.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::vector<std::uint8_t> uplink(std::size_t client,
                                           std::vector<std::uint8_t> bytes) {
    (void)client;
    return bytes;
  }
};

struct RunConfig {
  ModelSpec model;
  OptimizerConfig optimizer;
  RoundConfig rounds;
  CompressionStrategy compression;
  std::uint64_t seed = 0;
  // Evaluate every eval_every rounds and always after the last; 0 = last only.
  std::size_t eval_every = 0;
  bool parallel_clients = false;
};

struct RoundRecord {
  std::size_t round = 0;
  std::uint64_t local_iterations = 0;  // cumulative n * t
  double client_loss = 0.0;            // mean local training loss
  std::optional<double> train_loss;
  std::optional<double> train_accuracy;
  std::optional<double> validation_loss;
  std::optional<double> validation_accuracy;
  std::vector<std::size_t> participants;
  std::vector<std::uint64_t> uplink_bits;  // per participant
  std::uint64_t nonzeros = 0;
  std::uint64_t round_bits = 0;
  std::uint64_t cumulative_bits = 0;
  double theoretical_bits = 0.0;
  double cumulative_theoretical_bits = 0.0;
  double baseline_bits = 0.0;  // cumulative dense baseline
  double compression_ratio = 0.0;
};

struct RunSummary {
  std::size_t rounds_completed = 0;
  std::uint64_t local_iterations = 0;
  std::uint64_t total_bits = 0;
  double total_theoretical_bits = 0.0;
  double baseline_bits = 0.0;
  double compression_ratio = 0.0;
  std::uint64_t dense_message_bits = 0;
  std::optional<double> final_train_loss;
  std::optional<double> final_train_accuracy;
  std::optional<double> final_validation_loss;
  std::optional<double> final_validation_accuracy;
  std::optional<std::string> error;
};

struct MetricsLog {
  std::vector<RoundRecord> rounds;
  RunSummary summary;
};

// Server, clients and round loop of synchronous distributed SGD.
class Simulation {
 public:
  Simulation(RunConfig config, const Dataset& train, const Dataset& validation,
             Transport* transport = nullptr);

  // One communication round. Throws on failure.
  RoundRecord run_round();
  // Applies any undelivered broadcast to every client.
  void deliver_pending();
  // Every client, after pending delivery, holds the master weights bitwise.
  bool clients_synchronized() const;

  const ServerState& server() const { return server_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const RunConfig& config() const { return config_; }
  const ParameterSet& initial_weights() const { return initial_; }
  std::uint64_t dense_bits() const { return dense_bits_; }

  // Full evaluation of the master weights.
  void evaluate_into(RoundRecord& record) const;

 private:
  RunConfig config_;
  const Dataset& train_;
  const Dataset& validation_;
  Transport* transport_;
  Transport default_transport_;
  ServerState server_;
  std::vector<ClientState> clients_;
  ParameterSet initial_;
  std::optional<ParameterSet> pending_;
  std::uint64_t dense_bits_ = 0;
  std::uint64_t cumulative_bits_ = 0;
  double cumulative_theoretical_ = 0.0;
  double cumulative_baseline_ = 0.0;
};

using RoundObserver = std::function<void(const Simulation&, const RoundRecord&)>;

// Runs T rounds. A failing round ends the run; the log keeps completed rounds
// and summary.error describes the failure.
MetricsLog run(const RunConfig& config, const Dataset& train,
               const Dataset& validation, const RoundObserver& observer = {},
               Transport* transport = nullptr);

}  // namespace sbc
