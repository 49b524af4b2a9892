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
#include "sbc/dsgd.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "sbc/errors.hpp"

namespace sbc {

void RoundConfig::validate() const {
  if (local_iterations == 0) throw ConfigError("local_iterations must be >= 1");
  if (clients == 0) throw ConfigError("clients must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) {
    throw ConfigError("participation must be in (0, 1]");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t client,
                          std::uint64_t round, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master);
  h = mix(h ^ client);
  h = mix(h ^ round);
  return mix(h ^ stream);
}

void apply_broadcast(ClientState& client, const ParameterSet& broadcast) {
  add_inplace(client.weights, broadcast);
}

double theoretical_message_bits(const CompressionStrategy& strategy,
                                std::uint64_t nonzeros) {
  const auto nnz = static_cast<double>(nonzeros);
  switch (strategy.mode) {
    case CompressionMode::kIdentity:
      return total_bits_model(1, 1, nnz, 0.0, 32.0, 1);
    case CompressionMode::kSparseBinary:
      return total_bits_model(1, 1, nnz, position_bits_model(strategy.sparsity.p),
                              0.0, 1);
    case CompressionMode::kTopKValues:
      return total_bits_model(1, 1, nnz, position_bits_model(strategy.sparsity.p),
                              32.0, 1);
  }
  return 0.0;
}

ClientMessage client_round(ClientState& client, const ModelSpec& model,
                           const ParameterSet* broadcast,
                           const CompressionStrategy& strategy,
                           const RoundConfig& rounds,
                           std::uint64_t master_seed, std::size_t round) {
  if (broadcast != nullptr) apply_broadcast(client, *broadcast);

  const Model local{model, client.weights};
  LocalResult local_result = sgd_n(
      local, client.optimizer, client.shard, rounds.local_iterations,
      rounds.batch_size, derive_seed(master_seed, client.id, round, kStreamBatches));

  std::vector<EncodedMessage> messages;
  messages.reserve(client.weights.size());
  ClientMessage out;
  out.client_id = client.id;
  out.local_loss = local_result.mean_loss;

  switch (strategy.mode) {
    case CompressionMode::kIdentity: {
      for (const auto& t : local_result.update) {
        messages.push_back(encode_dense(t));
        out.nonzeros += t.size();
      }
      if (strategy.momentum_masking) {
        if (ParameterSet* m = client.optimizer.momentum_slot()) {
          *m = zeros_like(*m);
        }
      }
      break;
    }
    case CompressionMode::kSparseBinary: {
      SparsityConfig cfg = strategy.sparsity;
      cfg.subsample_seed =
          derive_seed(master_seed, client.id, round, kStreamSubsample);
      CompressedSet c =
          accumulate_and_compress(local_result.update, client.residual, cfg);
      client.residual = std::move(c.residual);
      const unsigned b = golomb_parameter_for_sparsity(cfg.p);
      for (const auto& u : c.updates) {
        messages.push_back(encode(u, b));
        out.nonzeros += u.positions.size();
      }
      if (strategy.momentum_masking) {
        if (ParameterSet* m = client.optimizer.momentum_slot()) {
          *m = mask_momentum(std::move(*m), c.updates);
        }
      }
      break;
    }
    case CompressionMode::kTopKValues: {
      SparsityConfig cfg = strategy.sparsity;
      cfg.subsample_seed =
          derive_seed(master_seed, client.id, round, kStreamSubsample);
      ValueCompressedSet c =
          accumulate_and_select(local_result.update, client.residual, cfg);
      client.residual = std::move(c.residual);
      const unsigned b = golomb_parameter_for_sparsity(cfg.p);
      for (const auto& u : c.updates) {
        messages.push_back(encode(u, b));
        out.nonzeros += u.positions.size();
      }
      if (strategy.momentum_masking) {
        if (ParameterSet* m = client.optimizer.momentum_slot()) {
          *m = mask_momentum(std::move(*m), c.updates);
        }
      }
      break;
    }
  }

  out.bytes = serialize_round(messages);
  out.uplink_bits = static_cast<std::uint64_t>(out.bytes.size()) * 8;
  out.theoretical_bits = theoretical_message_bits(strategy, out.nonzeros);
  return out;
}

const ParameterSet& server_round(ServerState& server,
                                 std::vector<ClientMessage> messages) {
  if (messages.empty()) throw StructuralError("server_round: no messages");
  std::sort(messages.begin(), messages.end(),
            [](const ClientMessage& a, const ClientMessage& b) {
              return a.client_id < b.client_id;
            });

  std::optional<ParameterSet> sum;
  for (const auto& msg : messages) {
    std::vector<EncodedMessage> decoded;
    try {
      decoded = parse_round(msg.bytes);
    } catch (const std::exception& e) {
      throw RoundError(msg.client_id, e.what());
    }
    if (decoded.size() != server.weights.size()) {
      throw RoundError(msg.client_id, "expected " +
                                          std::to_string(server.weights.size()) +
                                          " tensors, got " +
                                          std::to_string(decoded.size()));
    }
    ParameterSet dense = zeros_like(server.weights);
    for (std::size_t t = 0; t < decoded.size(); ++t) {
      const auto& h = decoded[t].header;
      if (h.tensor_name != dense[t].name || h.tensor_length != dense[t].size()) {
        throw RoundError(msg.client_id, "tensor '" + h.tensor_name +
                                            "' does not match master tensor '" +
                                            dense[t].name + "'");
      }
      try {
        dense[t].values = decode_to_dense(decoded[t]);
      } catch (const std::exception& e) {
        throw RoundError(msg.client_id, e.what());
      }
    }
    if (!sum) {
      sum = std::move(dense);
    } else {
      add_inplace(*sum, dense);
    }
  }

  if (messages.size() > 1) {
    const auto count = static_cast<float>(messages.size());
    for (auto& t : *sum) {
      for (float& v : t.values) v /= count;
    }
  }
  add_inplace(server.weights, *sum);
  server.update = std::move(*sum);
  ++server.round;
  return server.update;
}

std::vector<std::size_t> sample_participants(std::size_t clients,
                                             double fraction, std::size_t round,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("participation must be in (0, 1]");
  }
  std::vector<std::size_t> ids(clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  // Guard against 0.5 * 4 = 2.0000000001 style products.
  const double want = fraction * static_cast<double>(clients);
  auto m = static_cast<std::size_t>(std::ceil(want - 1e-9));
  m = std::clamp<std::size_t>(m, clients == 0 ? 0 : 1, clients);
  if (m == clients) return ids;
  std::mt19937_64 rng(derive_seed(seed, 0, round, kStreamParticipants));
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::uint64_t dense_message_bits(const ParameterSet& params) {
  std::vector<EncodedMessage> messages;
  for (const auto& t : params) messages.push_back(encode_dense(t));
  return static_cast<std::uint64_t>(serialize_round(messages).size()) * 8;
}

Simulation::Simulation(RunConfig config, const Dataset& train,
                       const Dataset& validation, Transport* transport)
    : config_(std::move(config)),
      train_(train),
      validation_(validation),
      transport_(transport != nullptr ? transport : &default_transport_) {
  config_.rounds.validate();
  if (config_.compression.mode != CompressionMode::kIdentity) {
    config_.compression.sparsity.validate();
  }
  const Model init =
      init_model(config_.model, derive_seed(config_.seed, 0, 0, kStreamInit));
  initial_ = init.params;
  server_.weights = init.params;
  server_.update = zeros_like(init.params);
  dense_bits_ = dense_message_bits(init.params);

  std::vector<Dataset> shards = split_iid(
      train_, config_.rounds.clients, derive_seed(config_.seed, 0, 0, kStreamShards));
  clients_.resize(config_.rounds.clients);
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    ClientState& c = clients_[i];
    c.id = i;
    c.weights = init.params;
    c.residual = zeros_like(init.params);
    c.optimizer = make_optimizer(config_.optimizer, init.params);
    c.shard = std::move(shards[i]);
  }
}

RoundRecord Simulation::run_round() {
  const std::size_t round = server_.round;
  const RoundConfig& rc = config_.rounds;
  RoundRecord record;
  record.round = round + 1;
  record.participants =
      sample_participants(rc.clients, rc.participation, round, config_.seed);

  std::vector<bool> active(clients_.size(), false);
  for (auto id : record.participants) active[id] = true;
  const ParameterSet* broadcast = pending_ ? &*pending_ : nullptr;
  if (broadcast != nullptr) {
    for (auto& c : clients_) {
      if (!active[c.id]) apply_broadcast(c, *broadcast);
    }
  }

  auto work = [&](std::size_t id) {
    return client_round(clients_[id], config_.model, broadcast,
                        config_.compression, rc, config_.seed, round);
  };
  std::vector<ClientMessage> messages;
  messages.reserve(record.participants.size());
  if (config_.parallel_clients && record.participants.size() > 1) {
    std::vector<std::future<ClientMessage>> futures;
    for (auto id : record.participants) {
      futures.push_back(std::async(std::launch::async, work, id));
    }
    for (auto& f : futures) messages.push_back(f.get());
  } else {
    for (auto id : record.participants) messages.push_back(work(id));
  }
  pending_.reset();

  double loss_sum = 0.0;
  for (auto& m : messages) {
    record.uplink_bits.push_back(m.uplink_bits);
    record.round_bits += m.uplink_bits;
    record.nonzeros += m.nonzeros;
    record.theoretical_bits += m.theoretical_bits;
    loss_sum += m.local_loss;
    m.bytes = transport_->uplink(m.client_id, std::move(m.bytes));
  }
  record.client_loss = loss_sum / static_cast<double>(messages.size());

  pending_ = server_round(server_, std::move(messages));

  cumulative_bits_ += record.round_bits;
  cumulative_theoretical_ += record.theoretical_bits;
  cumulative_baseline_ += static_cast<double>(record.participants.size()) *
                          static_cast<double>(rc.local_iterations) *
                          static_cast<double>(dense_bits_);
  record.local_iterations =
      static_cast<std::uint64_t>(server_.round) * rc.local_iterations;
  record.cumulative_bits = cumulative_bits_;
  record.cumulative_theoretical_bits = cumulative_theoretical_;
  record.baseline_bits = cumulative_baseline_;
  record.compression_ratio =
      cumulative_bits_ > 0 ? cumulative_baseline_ / static_cast<double>(cumulative_bits_)
                           : 0.0;
  return record;
}

void Simulation::deliver_pending() {
  if (!pending_) return;
  for (auto& c : clients_) apply_broadcast(c, *pending_);
  pending_.reset();
}

bool Simulation::clients_synchronized() const {
  for (const auto& c : clients_) {
    ParameterSet w = c.weights;
    if (pending_) add_inplace(w, *pending_);
    if (!bitwise_equal(w, server_.weights)) return false;
  }
  return true;
}

void Simulation::evaluate_into(RoundRecord& record) const {
  const Model master{config_.model, server_.weights};
  const EvalMetrics tr = evaluate(master, train_);
  record.train_loss = tr.loss;
  record.train_accuracy = tr.accuracy;
  if (validation_.rows > 0) {
    const EvalMetrics va = evaluate(master, validation_);
    record.validation_loss = va.loss;
    record.validation_accuracy = va.accuracy;
  }
}

MetricsLog run(const RunConfig& config, const Dataset& train,
               const Dataset& validation, const RoundObserver& observer,
               Transport* transport) {
  Simulation sim(config, train, validation, transport);
  MetricsLog log;
  RunSummary& s = log.summary;
  s.dense_message_bits = sim.dense_bits();
  const std::size_t total = config.rounds.rounds;
  try {
    for (std::size_t t = 1; t <= total; ++t) {
      RoundRecord rec = sim.run_round();
      const bool last = t == total;
      if (last || (config.eval_every > 0 && t % config.eval_every == 0)) {
        sim.evaluate_into(rec);
      }
      if (last) sim.deliver_pending();
      if (observer) observer(sim, rec);
      log.rounds.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  s.rounds_completed = log.rounds.size();
  if (!log.rounds.empty()) {
    const RoundRecord& last = log.rounds.back();
    s.local_iterations = last.local_iterations;
    s.total_bits = last.cumulative_bits;
    s.total_theoretical_bits = last.cumulative_theoretical_bits;
    s.baseline_bits = last.baseline_bits;
    s.compression_ratio = last.compression_ratio;
    s.final_train_loss = last.train_loss;
    s.final_train_accuracy = last.train_accuracy;
    s.final_validation_loss = last.validation_loss;
    s.final_validation_accuracy = last.validation_accuracy;
  }
  return log;
}

}  // namespace sbc
