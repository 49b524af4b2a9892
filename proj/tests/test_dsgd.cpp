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
#include <map>
#include <random>

#include "doctest.h"
#include "sbc/dsgd.hpp"
#include "sbc/errors.hpp"

using namespace sbc;

namespace {

Dataset blobs(std::size_t size, std::size_t dim, std::uint64_t seed) {
  DatasetSpec s;
  s.size = size;
  s.dim = dim;
  s.seed = seed;
  s.separation = 3.0;
  return make_dataset(s);
}

RunConfig base_config(std::size_t dim) {
  RunConfig c;
  c.model = {ModelKind::kLogisticRegression, dim, 2, 0};
  c.optimizer.learning_rate = 0.1;
  c.rounds.clients = 4;
  c.rounds.local_iterations = 5;
  c.rounds.rounds = 6;
  c.rounds.batch_size = 8;
  c.compression.mode = CompressionMode::kSparseBinary;
  c.compression.sparsity.p = 0.1;
  c.seed = 42;
  return c;
}

ParameterSet random_set(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  ParameterSet s;
  s.add(FlatTensor("weight", {2, 3}));
  s.add(FlatTensor("bias", {2}));
  for (auto& t : s) {
    for (auto& v : t.values) v = g(rng);
  }
  return s;
}

ClientMessage dense_message(std::size_t id, const ParameterSet& u) {
  std::vector<EncodedMessage> msgs;
  for (const auto& t : u) msgs.push_back(encode_dense(t));
  ClientMessage m;
  m.client_id = id;
  m.bytes = serialize_round(msgs);
  return m;
}

class FlipBits : public Transport {
 public:
  explicit FlipBits(std::size_t victim) : victim_(victim) {}
  std::vector<std::uint8_t> uplink(std::size_t client,
                                   std::vector<std::uint8_t> bytes) override {
    if (client == victim_) bytes.resize(bytes.size() / 2);
    return bytes;
  }

 private:
  std::size_t victim_;
};

}  // namespace

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, 2, 3, 0) == derive_seed(1, 2, 3, 0));
  CHECK(derive_seed(1, 2, 3, 0) != derive_seed(1, 2, 3, 1));
  CHECK(derive_seed(1, 2, 3, 0) != derive_seed(1, 3, 2, 0));
  CHECK(derive_seed(1, 0, 0, 0) != derive_seed(2, 0, 0, 0));
}

TEST_CASE("participant sampling") {
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(sample_participants(4, 1.0, r, 9) == std::vector<std::size_t>{0, 1, 2, 3});
  }
  CHECK(sample_participants(4, 0.5, 7, 9) == sample_participants(4, 0.5, 7, 9));
  CHECK(sample_participants(10, 0.25, 0, 1).size() == 3);
  CHECK(sample_participants(4, 0.01, 0, 1).size() == 1);
  CHECK_THROWS_AS(sample_participants(4, 0.0, 0, 1), ConfigError);

  std::map<std::vector<std::size_t>, int> counts;
  const int rounds = 10000;
  for (int r = 0; r < rounds; ++r) {
    const auto s = sample_participants(4, 0.5, static_cast<std::size_t>(r), 3);
    REQUIRE(s.size() == 2);
    ++counts[s];
  }
  CHECK(counts.size() == 6);
  const double expected = rounds / 6.0;
  double chi2 = 0.0;
  for (const auto& [_, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 5 degrees of freedom, 0.1% upper tail.
  CHECK(chi2 < 20.515);
}

TEST_CASE("server averages in client order") {
  ServerState s;
  s.weights = zeros_like(random_set(0));

  const auto u = random_set(1);
  const auto& b1 = server_round(s, {dense_message(0, u)});
  CHECK(bitwise_equal(b1, u));
  CHECK(bitwise_equal(s.weights, u));

  const ParameterSet before = s.weights;
  const auto& b2 = server_round(s, {dense_message(1, u), dense_message(0, scale(u, -1.0f))});
  CHECK(max_abs(b2) == 0.0);
  CHECK(s.weights == before);

  std::vector<ParameterSet> ups;
  std::vector<ClientMessage> msgs;
  for (std::size_t i = 0; i < 4; ++i) {
    ups.push_back(random_set(10 + i));
    msgs.push_back(dense_message(3 - i, ups.back()));
  }
  const auto& b3 = server_round(s, msgs);
  for (std::size_t t = 0; t < b3.size(); ++t) {
    for (std::size_t j = 0; j < b3[t].size(); ++j) {
      // msgs[i] belongs to client 3 - i, so ascending ids visit ups[3..0].
      float f = ups[3][t].values[j];
      f += ups[2][t].values[j];
      f += ups[1][t].values[j];
      f += ups[0][t].values[j];
      f /= 4.0f;
      CHECK(b3[t].values[j] == f);
      long double exact = 0.0L;
      for (const auto& up : ups) exact += up[t].values[j];
      CHECK(std::fabs(double(exact / 4.0L) - double(f)) <= 4.0 * std::ldexp(1.0, -23) * std::fabs(double(exact)));
    }
  }
}

TEST_CASE("server rejects bad messages with the client id") {
  ServerState s;
  s.weights = zeros_like(random_set(0));
  auto m = dense_message(2, random_set(1));
  m.bytes.pop_back();
  try {
    server_round(s, {m});
    FAIL("expected a round error");
  } catch (const RoundError& e) {
    CHECK(e.client() == 2);
  }

  ParameterSet other;
  other.add(FlatTensor("weight", {6}));
  other.add(FlatTensor("other", {2}));
  try {
    server_round(s, {dense_message(1, other)});
    FAIL("expected a round error");
  } catch (const RoundError& e) {
    CHECK(e.client() == 1);
  }
}

TEST_CASE("client round") {
  const auto train = blobs(400, 5, 1);
  RunConfig cfg = base_config(5);
  const Model m = init_model(cfg.model, 3);
  auto make_client = [&] {
    ClientState c;
    c.id = 1;
    c.weights = m.params;
    c.residual = zeros_like(m.params);
    c.optimizer = make_optimizer(cfg.optimizer, m.params);
    c.shard = train;
    return c;
  };

  SUBCASE("identity n = 1 sends the dense step") {
    CompressionStrategy id{CompressionMode::kIdentity, {}, false};
    RoundConfig rc = cfg.rounds;
    rc.local_iterations = 1;
    auto c = make_client();
    const auto msg = client_round(c, cfg.model, nullptr, id, rc, 5, 0);
    auto c2 = make_client();
    const auto local = sgd_n(Model{cfg.model, m.params}, c2.optimizer, c2.shard, 1,
                             rc.batch_size, derive_seed(5, 1, 0, kStreamBatches));
    const auto parsed = parse_round(msg.bytes);
    for (std::size_t t = 0; t < parsed.size(); ++t) {
      CHECK(decode_to_dense(parsed[t]) == local.update[t].values);
    }
    CHECK(max_abs(c.residual) == 0.0);
    CHECK(msg.uplink_bits == 8 * msg.bytes.size());
  }

  SUBCASE("zero learning rate gives the zero update") {
    auto c = make_client();
    c.optimizer.config.learning_rate = 0.0;
    const auto msg = client_round(c, cfg.model, nullptr, cfg.compression, cfg.rounds, 5, 0);
    for (const auto& e : parse_round(msg.bytes)) {
      CHECK(decode(e).positions.empty());
      CHECK(e.header.mean == 0.0f);
    }
    CHECK(msg.nonzeros == 0);
  }

  SUBCASE("fixed seeds are bitwise reproducible") {
    auto a = make_client();
    auto b = make_client();
    const auto ma = client_round(a, cfg.model, nullptr, cfg.compression, cfg.rounds, 5, 3);
    const auto mb = client_round(b, cfg.model, nullptr, cfg.compression, cfg.rounds, 5, 3);
    CHECK(ma.bytes == mb.bytes);
    CHECK(bitwise_equal(a.residual, b.residual));
  }

  SUBCASE("momentum masking clears transmitted coordinates") {
    CompressionStrategy s = cfg.compression;
    s.momentum_masking = true;
    auto c = make_client();
    c.optimizer = make_optimizer(
        OptimizerConfig{OptimizerKind::kMomentum, 0.1, 0.9, 0.9, 0.999, 1e-8, {}},
        m.params);
    const auto msg = client_round(c, cfg.model, nullptr, s, cfg.rounds, 5, 0);
    for (const auto& e : parse_round(msg.bytes)) {
      const auto u = decode(e);
      const FlatTensor* slot = c.optimizer.first.find(u.tensor_name);
      REQUIRE(slot != nullptr);
      for (auto i : u.positions) CHECK(slot->values[i] == 0.0f);
    }
  }
}

TEST_CASE("zero rounds leave the master at its initialization") {
  const auto train = blobs(200, 4, 2);
  RunConfig cfg = base_config(4);
  cfg.rounds.rounds = 0;
  const auto log = run(cfg, train, train);
  CHECK(log.rounds.empty());
  CHECK_FALSE(log.summary.error.has_value());
  Simulation sim(cfg, train, train);
  CHECK(bitwise_equal(sim.server().weights, sim.initial_weights()));
}

TEST_CASE("clients stay synchronized and the master replays its updates") {
  const auto train = blobs(400, 6, 3);
  for (double participation : {1.0, 0.5}) {
    for (auto mode : {CompressionMode::kSparseBinary, CompressionMode::kTopKValues,
                      CompressionMode::kIdentity}) {
      RunConfig cfg = base_config(6);
      cfg.rounds.participation = participation;
      cfg.compression.mode = mode;
      Simulation sim(cfg, train, train);
      ParameterSet replay = sim.initial_weights();
      for (int t = 0; t < 6; ++t) {
        const auto rec = sim.run_round();
        CHECK(sim.clients_synchronized());
        add_inplace(replay, sim.server().update);
        CHECK(bitwise_equal(replay, sim.server().weights));
        std::uint64_t bits = 0;
        for (auto b : rec.uplink_bits) bits += b;
        CHECK(bits == rec.round_bits);
      }
      sim.deliver_pending();
      for (const auto& c : sim.clients()) {
        CHECK(bitwise_equal(c.weights, sim.server().weights));
      }
    }
  }
}

TEST_CASE("parallel clients match serial execution") {
  const auto train = blobs(400, 6, 4);
  RunConfig cfg = base_config(6);
  const auto serial = run(cfg, train, train);
  cfg.parallel_clients = true;
  const auto parallel = run(cfg, train, train);
  REQUIRE(serial.rounds.size() == parallel.rounds.size());
  for (std::size_t i = 0; i < serial.rounds.size(); ++i) {
    CHECK(serial.rounds[i].cumulative_bits == parallel.rounds[i].cumulative_bits);
    CHECK(serial.rounds[i].client_loss == parallel.rounds[i].client_loss);
  }
  CHECK(serial.summary.final_validation_loss == parallel.summary.final_validation_loss);
}

TEST_CASE("a corrupted uplink aborts the run naming the client") {
  const auto train = blobs(400, 6, 5);
  RunConfig cfg = base_config(6);
  FlipBits transport(2);
  Simulation sim(cfg, train, train, &transport);
  try {
    sim.run_round();
    FAIL("expected a round error");
  } catch (const RoundError& e) {
    CHECK(e.client() == 2);
  }
  const auto log = run(cfg, train, train, {}, &transport);
  REQUIRE(log.summary.error.has_value());
  CHECK(log.summary.error->find("client 2") != std::string::npos);
  CHECK(log.summary.rounds_completed == 0);
}

TEST_CASE("identity run reports a compression ratio of one") {
  const auto train = blobs(200, 4, 6);
  RunConfig cfg = base_config(4);
  cfg.compression.mode = CompressionMode::kIdentity;
  cfg.rounds.local_iterations = 1;
  const auto log = run(cfg, train, train);
  CHECK(log.summary.compression_ratio == 1.0);
}

TEST_CASE("sparse binary compression ratio is of order 10^4 at p = 0.01, n = 100") {
  const auto train = blobs(2000, 5000, 7);
  RunConfig cfg = base_config(5000);
  cfg.compression.sparsity.p = 0.01;
  cfg.rounds.local_iterations = 100;
  cfg.rounds.rounds = 2;
  cfg.rounds.clients = 2;
  cfg.optimizer.learning_rate = 0.01;
  const auto log = run(cfg, train, train);
  REQUIRE_FALSE(log.summary.error.has_value());
  const double theoretical_ratio = log.summary.baseline_bits / log.summary.total_theoretical_bits;
  MESSAGE("measured ratio " << log.summary.compression_ratio << ", model ratio "
                            << theoretical_ratio);
  CHECK(log.summary.compression_ratio >= 1e4);
  CHECK(log.summary.compression_ratio < 1e5);
  CHECK(theoretical_ratio >= 1e4);
  CHECK(theoretical_ratio < 1e5);
}
