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
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "sbc/errors.hpp"
#include "sbc/train.hpp"

using namespace sbc;

namespace {

Dataset small_classification(std::size_t rows, std::size_t cols,
                             std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Dataset d;
  d.rows = rows;
  d.cols = cols;
  d.num_classes = classes;
  d.features.resize(rows * cols);
  for (auto& v : d.features) v = g(rng);
  for (std::size_t r = 0; r < rows; ++r) {
    d.targets.push_back(static_cast<float>(r % classes));
  }
  return d;
}

Dataset small_regression(std::size_t rows, std::size_t cols, std::size_t outs,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Dataset d;
  d.task = TaskKind::kRegression;
  d.rows = rows;
  d.cols = cols;
  d.target_dim = outs;
  d.num_classes = 0;
  d.features.resize(rows * cols);
  d.targets.resize(rows * outs);
  for (auto& v : d.features) v = g(rng);
  for (auto& v : d.targets) v = g(rng);
  return d;
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> r(d.rows);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

// Straight-line loss for the linear/logistic families, written without the
// library's forward pass.
double reference_loss(const Model& m, const Dataset& d) {
  const auto& w = m.params[0].values;
  const auto& b = m.params[1].values;
  const std::size_t out = m.spec.output_dim;
  double total = 0.0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      z[o] = b[o];
      for (std::size_t c = 0; c < d.cols; ++c) z[o] += double(w[o * d.cols + c]) * d.row(r)[c];
    }
    if (m.spec.kind == ModelKind::kLinearRegression) {
      for (std::size_t o = 0; o < out; ++o) {
        const double e = z[o] - d.target(r)[o];
        total += 0.5 * e * e;
      }
    } else if (out == 1) {
      const double p = 1.0 / (1.0 + std::exp(-z[0]));
      total -= d.label(r) == 1 ? std::log(p) : std::log(1.0 - p);
    } else {
      double s = 0.0;
      for (double v : z) s += std::exp(v);
      total -= std::log(std::exp(z[d.label(r)]) / s);
    }
  }
  return total / static_cast<double>(d.rows);
}

void check_gradients(const Model& model, const Dataset& d, std::uint64_t seed) {
  const auto rows = all_rows(d);
  const auto fwd = forward_loss(model, d, rows);
  const ParameterSet grads = backward(model, d, fwd.cache);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < model.params.size(); ++t) {
    std::uniform_int_distribution<std::size_t> pick(0, model.params[t].size() - 1);
    for (int probe = 0; probe < 10; ++probe) {
      const std::size_t j = pick(rng);
      Model plus = model, minus = model;
      const float w = model.params[t].values[j];
      plus.params[t].values[j] = w + 1e-4f;
      minus.params[t].values[j] = w - 1e-4f;
      const double h2 = double(plus.params[t].values[j]) - double(minus.params[t].values[j]);
      const double fd = (forward_loss(plus, d, rows).loss -
                         forward_loss(minus, d, rows).loss) / h2;
      const double an = grads[t].values[j];
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-2});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-4);
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("zero logistic model predicts uniformly") {
  const auto d = small_classification(8, 3, 2, 1);
  for (std::size_t outs : {1u, 2u}) {
    Model m = init_model({ModelKind::kLogisticRegression, 3, outs, 0}, 1);
    for (auto& t : m.params) std::fill(t.values.begin(), t.values.end(), 0.0f);
    CHECK(forward_loss(m, d, all_rows(d)).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("exact linear fit has zero loss and zero gradient") {
  Dataset d = small_regression(10, 2, 2, 2);
  for (std::size_t r = 0; r < d.rows; ++r) {
    d.targets[r * 2] = d.row(r)[0];
    d.targets[r * 2 + 1] = d.row(r)[1];
  }
  Model m = init_model({ModelKind::kLinearRegression, 2, 2, 0}, 2);
  m.params[0].values = {1, 0, 0, 1};
  m.params[1].values = {0, 0};
  const auto fwd = forward_loss(m, d, all_rows(d));
  CHECK(fwd.loss == 0.0);
  CHECK(max_abs(backward(m, d, fwd.cache)) == 0.0);
}

TEST_CASE("loss matches a straight-line recomputation") {
  const auto c = small_classification(20, 4, 3, 3);
  const auto b = small_classification(20, 4, 2, 4);
  const auto r = small_regression(20, 4, 2, 5);
  const Model soft = init_model({ModelKind::kLogisticRegression, 4, 3, 0}, 6);
  const Model sig = init_model({ModelKind::kLogisticRegression, 4, 1, 0}, 7);
  const Model lin = init_model({ModelKind::kLinearRegression, 4, 2, 0}, 8);
  CHECK(forward_loss(soft, c, all_rows(c)).loss == doctest::Approx(reference_loss(soft, c)).epsilon(1e-6));
  CHECK(forward_loss(sig, b, all_rows(b)).loss == doctest::Approx(reference_loss(sig, b)).epsilon(1e-6));
  CHECK(forward_loss(lin, r, all_rows(r)).loss == doctest::Approx(reference_loss(lin, r)).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central differences") {
  check_gradients(init_model({ModelKind::kLinearRegression, 5, 2, 0}, 9),
                  small_regression(16, 5, 2, 10), 11);
  check_gradients(init_model({ModelKind::kLogisticRegression, 5, 1, 0}, 12),
                  small_classification(16, 5, 2, 13), 14);
  check_gradients(init_model({ModelKind::kLogisticRegression, 5, 3, 0}, 15),
                  small_classification(16, 5, 3, 16), 17);
  check_gradients(init_model({ModelKind::kMlp, 5, 3, 8}, 18),
                  small_classification(16, 5, 3, 19), 20);
  check_gradients(init_model({ModelKind::kMlp, 5, 1, 8}, 21),
                  small_classification(16, 5, 2, 22), 23);
}

TEST_CASE("gradient is invariant to duplicating the batch") {
  const auto d = small_classification(12, 4, 2, 24);
  const Model m = init_model({ModelKind::kMlp, 4, 2, 6}, 25);
  std::vector<std::size_t> once{0, 3, 5, 7}, twice{0, 3, 5, 7, 0, 3, 5, 7};
  const auto g1 = backward(m, d, forward_loss(m, d, once).cache);
  const auto g2 = backward(m, d, forward_loss(m, d, twice).cache);
  for (std::size_t t = 0; t < g1.size(); ++t) {
    for (std::size_t j = 0; j < g1[t].size(); ++j) {
      CHECK(g1[t].values[j] == doctest::Approx(g2[t].values[j]).epsilon(1e-6));
    }
  }
}

TEST_CASE("optimizer steps") {
  ParameterSet p;
  p.add(FlatTensor("w", {1}, {1.0f}));
  ParameterSet g;
  g.add(FlatTensor("w", {1}, {1.0f}));

  OptimizerConfig sgd;
  sgd.learning_rate = 0.1;
  auto o = make_optimizer(sgd, p);
  auto q = p;
  optimizer_step(o, q, g);
  CHECK(q[0].values[0] == doctest::Approx(0.9));

  OptimizerConfig mom;
  mom.kind = OptimizerKind::kMomentum;
  mom.learning_rate = 1.0;
  mom.momentum = 0.9;
  o = make_optimizer(mom, p);
  q = p;
  optimizer_step(o, q, g);
  CHECK(q[0].values[0] == doctest::Approx(0.0));
  optimizer_step(o, q, g);
  CHECK(q[0].values[0] == doctest::Approx(-1.9));

  OptimizerConfig adam;
  adam.kind = OptimizerKind::kAdam;
  adam.learning_rate = 0.01;
  o = make_optimizer(adam, p);
  q = p;
  optimizer_step(o, q, g);
  CHECK(1.0 - q[0].values[0] == doctest::Approx(0.01 / (1.0 + 1e-8)).epsilon(1e-6));
}

TEST_CASE("learning rate schedule") {
  OptimizerConfig c;
  c.learning_rate = 1.0;
  c.schedule = {{0.1, 10}, {0.5, 20}};
  CHECK(c.rate_at(0) == 1.0);
  CHECK(c.rate_at(10) == doctest::Approx(0.1));
  CHECK(c.rate_at(25) == doctest::Approx(0.05));
}

TEST_CASE("sgd_n") {
  const auto d = small_classification(50, 3, 2, 26);
  const Model m = init_model({ModelKind::kLogisticRegression, 3, 2, 0}, 27);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.5;

  SUBCASE("one iteration is one optimizer step on one sampled batch") {
    auto o1 = make_optimizer(cfg, m.params);
    const auto r = sgd_n(m, o1, d, 1, 5, 99);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, d.rows - 1);
    std::vector<std::size_t> rows(5);
    for (auto& x : rows) x = pick(rng);
    auto o2 = make_optimizer(cfg, m.params);
    ParameterSet w = m.params;
    optimizer_step(o2, w, backward(m, d, forward_loss(m, d, rows).cache));
    CHECK(bitwise_equal(r.weights, w));
    CHECK(bitwise_equal(add(m.params, r.update), w));
  }
  SUBCASE("zero learning rate leaves weights unchanged") {
    OptimizerConfig z = cfg;
    z.learning_rate = 0.0;
    auto o = make_optimizer(z, m.params);
    const auto r = sgd_n(m, o, d, 10, 5, 1);
    CHECK(r.weights == m.params);
    CHECK(max_abs(r.update) == 0.0);
  }
  SUBCASE("same seed is bitwise reproducible") {
    auto o1 = make_optimizer(cfg, m.params);
    auto o2 = make_optimizer(cfg, m.params);
    CHECK(bitwise_equal(sgd_n(m, o1, d, 20, 4, 5).weights, sgd_n(m, o2, d, 20, 4, 5).weights));
  }
  SUBCASE("errors") {
    auto o = make_optimizer(cfg, m.params);
    CHECK_THROWS(sgd_n(m, o, d, 0, 4, 5));
    Dataset empty = d.subset(std::vector<std::size_t>{});
    CHECK_THROWS_AS(sgd_n(m, o, empty, 1, 4, 5), StructuralError);
  }
}

TEST_CASE("well separated blobs are learned quickly") {
  DatasetSpec s;
  s.kind = DatasetKind::kBlobs;
  s.size = 1000;
  s.dim = 10;
  s.separation = 10.0;
  const auto d = make_dataset(s);
  Model m = init_model({ModelKind::kLogisticRegression, 10, 2, 0}, 1);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  auto o = make_optimizer(cfg, m.params);
  m.params = sgd_n(m, o, d, 200, 32, 2).weights;
  CHECK(*evaluate(m, d).accuracy >= 0.99);
}

TEST_CASE("noise-free linear regression recovers least squares") {
  DatasetSpec s;
  s.kind = DatasetKind::kLinreg;
  s.size = 200;
  s.dim = 3;
  const auto d = make_dataset(s);

  // Normal equations with a bias column, solved by Gaussian elimination.
  const std::size_t k = 4;
  std::vector<double> a(k * k, 0.0), rhs(k, 0.0);
  for (std::size_t r = 0; r < d.rows; ++r) {
    double x[4] = {d.row(r)[0], d.row(r)[1], d.row(r)[2], 1.0};
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += x[i] * d.target(r)[0];
      for (std::size_t j = 0; j < k; ++j) a[i * k + j] += x[i] * x[j];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = c + 1; r < k; ++r) {
      const double f = a[r * k + c] / a[c * k + c];
      for (std::size_t j = c; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
      rhs[r] -= f * rhs[c];
    }
  }
  std::vector<double> sol(k);
  for (std::size_t r = k; r-- > 0;) {
    double v = rhs[r];
    for (std::size_t j = r + 1; j < k; ++j) v -= a[r * k + j] * sol[j];
    sol[r] = v / a[r * k + r];
  }

  Model m = init_model({ModelKind::kLinearRegression, 3, 1, 0}, 3);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  auto o = make_optimizer(cfg, m.params);
  m.params = sgd_n(m, o, d, 1000, 32, 4).weights;
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(m.params[0].values[i] - sol[i]) < 1e-3);
  CHECK(std::fabs(m.params[1].values[0] - sol[3]) < 1e-3);
}

TEST_CASE("iid split") {
  Dataset d = small_classification(100, 1, 2, 5);
  for (std::size_t r = 0; r < d.rows; ++r) d.features[r] = static_cast<float>(r);

  const auto whole = split_iid(d, 1, 3);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0].rows == 100);

  const auto shards = split_iid(d, 4, 3);
  std::set<float> seen;
  for (const auto& s : shards) {
    CHECK(s.rows == 25);
    for (float v : s.features) seen.insert(v);
  }
  CHECK(seen.size() == 100);

  const auto uneven = split_iid(small_classification(10, 1, 2, 6), 3, 1);
  CHECK(uneven[0].rows == 4);
  CHECK(uneven[1].rows == 3);
  CHECK(uneven[2].rows == 3);
  CHECK_THROWS(split_iid(d, 101, 1));
}

TEST_CASE("shard class balance tracks the global proportion") {
  DatasetSpec s;
  s.size = 10000;
  const auto d = make_dataset(s);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const auto& shard : split_iid(d, 4, seed)) {
      double ones = 0.0;
      for (std::size_t r = 0; r < shard.rows; ++r) ones += shard.label(r);
      worst = std::max(worst, std::fabs(ones / shard.rows - 0.5));
    }
  }
  MESSAGE("largest shard deviation " << worst);
  CHECK(worst <= 0.05);
}

TEST_CASE("IDX fixture round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "sbc_idx_test";
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> images{0, 0, 0x08, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2};
  for (std::uint8_t v = 0; v < 16; ++v) images.push_back(static_cast<std::uint8_t>(v * 17));
  const std::vector<std::uint8_t> labels{0, 0, 0x08, 1, 0, 0, 0, 4, 1, 0, 1, 1};
  write_bytes(dir / "img.idx", images);
  write_bytes(dir / "lbl.idx", labels);

  const auto arr = read_idx(dir / "img.idx");
  CHECK(arr.dims == std::vector<std::size_t>{4, 2, 2});
  for (std::size_t i = 0; i < 16; ++i) CHECK(arr.values[i] == float(i * 17));

  const auto d = load_idx(dir / "img.idx", dir / "lbl.idx");
  CHECK(d.rows == 4);
  CHECK(d.cols == 4);
  CHECK(d.row(1)[0] == doctest::Approx(4 * 17 / 255.0));
  CHECK(d.label(3) == 1);
  CHECK(d.num_classes == 2);

  const auto fixture = read_idx(std::filesystem::path(SBC_FIXTURES) / "be_int16.idx");
  CHECK(fixture.dims == std::vector<std::size_t>{3});
  CHECK(fixture.values == std::vector<float>{1, -2, 258});
}

TEST_CASE("malformed IDX reports the byte offset") {
  const std::vector<std::uint8_t> bad_magic{1, 0, 8, 1, 0, 0, 0, 1, 5};
  try {
    parse_idx(bad_magic);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
  const std::vector<std::uint8_t> truncated{0, 0, 8, 1, 0, 0, 0, 3, 5, 6};
  try {
    parse_idx(truncated);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    // the data section starts at byte 8
    CHECK(e.offset() == 8);
  }
  const std::vector<std::uint8_t> bad_type{0, 0, 0x07, 1, 0, 0, 0, 1, 5};
  CHECK_THROWS_AS(parse_idx(bad_type), ParseError);
}
