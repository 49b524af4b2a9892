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
#include <random>

#include "sbc/errors.hpp"
#include "sbc/train.hpp"

namespace sbc {

namespace {

bool is_classifier(const ModelSpec& spec) {
  return spec.kind != ModelKind::kLinearRegression;
}

void check_model(const ModelSpec& spec) {
  if (spec.input_dim == 0 || spec.output_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (spec.kind == ModelKind::kMlp && spec.hidden == 0) {
    throw ConfigError("mlp needs a positive hidden width");
  }
}

void check_data(const ModelSpec& spec, const Dataset& data) {
  if (data.cols != spec.input_dim) {
    throw StructuralError("model expects " + std::to_string(spec.input_dim) +
                          " features, batch has " + std::to_string(data.cols));
  }
  if (is_classifier(spec)) {
    if (data.task != TaskKind::kClassification) {
      throw StructuralError("classification model given a regression dataset");
    }
  } else if (data.task != TaskKind::kRegression ||
             data.target_dim != spec.output_dim) {
    throw StructuralError("regression model output does not match targets");
  }
}

// Dense affine layer out = W in + b for one row; W is [outputs, inputs].
void affine(const FlatTensor& w, const FlatTensor& b, const double* in,
            std::size_t inputs, double* out) {
  const std::size_t outputs = b.size();
  for (std::size_t o = 0; o < outputs; ++o) {
    double z = b.values[o];
    const float* wr = w.values.data() + o * inputs;
    for (std::size_t i = 0; i < inputs; ++i) z += wr[i] * in[i];
    out[o] = z;
  }
}

struct Pass {
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

// Forward over rows. Fills cache when non-null; the output gradient is
// scaled by 1/grad_scale_rows.
Pass run_forward(const Model& model, const Dataset& data,
                 std::span<const std::size_t> rows, ForwardCache* cache) {
  const ModelSpec& spec = model.spec;
  check_data(spec, data);
  const std::size_t in_dim = spec.input_dim;
  const std::size_t out_dim = spec.output_dim;
  const std::size_t hid = spec.kind == ModelKind::kMlp ? spec.hidden : 0;
  const double inv_batch = 1.0 / static_cast<double>(rows.size());

  if (cache != nullptr) {
    cache->rows.assign(rows.begin(), rows.end());
    cache->hidden_pre.assign(rows.size() * hid, 0.0);
    cache->hidden.assign(rows.size() * hid, 0.0);
    cache->output_grad.assign(rows.size() * out_dim, 0.0);
  }

  std::vector<double> x(in_dim), pre(hid), h(hid), z(out_dim);
  Pass pass;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const std::size_t r = rows[b];
    if (r >= data.rows) throw StructuralError("batch row out of range");
    auto xr = data.row(r);
    std::copy(xr.begin(), xr.end(), x.begin());

    if (spec.kind == ModelKind::kMlp) {
      affine(model.params[0], model.params[1], x.data(), in_dim, pre.data());
      for (std::size_t j = 0; j < hid; ++j) h[j] = pre[j] > 0.0 ? pre[j] : 0.0;
      affine(model.params[2], model.params[3], h.data(), hid, z.data());
      if (cache != nullptr) {
        std::copy(pre.begin(), pre.end(), cache->hidden_pre.begin() + b * hid);
        std::copy(h.begin(), h.end(), cache->hidden.begin() + b * hid);
      }
    } else {
      affine(model.params[0], model.params[1], x.data(), in_dim, z.data());
    }

    double* g = cache != nullptr ? cache->output_grad.data() + b * out_dim : nullptr;
    if (!is_classifier(spec)) {
      auto y = data.target(r);
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double e = z[o] - y[o];
        pass.loss_sum += 0.5 * e * e;
        if (g) g[o] = e * inv_batch;
      }
      continue;
    }

    const std::size_t label = data.label(r);
    if (out_dim == 1) {
      if (label > 1) throw StructuralError("sigmoid head needs labels in {0,1}");
      const double y = static_cast<double>(label);
      const double zz = z[0];
      pass.loss_sum += std::max(zz, 0.0) + std::log1p(std::exp(-std::fabs(zz))) - y * zz;
      if (g) g[0] = (1.0 / (1.0 + std::exp(-zz)) - y) * inv_batch;
      if ((zz > 0.0) == (label == 1)) ++pass.correct;
      continue;
    }

    if (label >= out_dim) throw StructuralError("label exceeds output width");
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (std::size_t o = 0; o < out_dim; ++o) denom += std::exp(z[o] - zmax);
    const double log_denom = std::log(denom);
    pass.loss_sum -= z[label] - zmax - log_denom;
    if (g) {
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double prob = std::exp(z[o] - zmax - log_denom);
        g[o] = (prob - (o == label ? 1.0 : 0.0)) * inv_batch;
      }
    }
    const auto argmax = static_cast<std::size_t>(
        std::max_element(z.begin(), z.end()) - z.begin());
    if (argmax == label) ++pass.correct;
  }
  return pass;
}

// Accumulates dW += g a^T and db += g into double buffers.
void affine_grad(const double* g, const double* a, std::size_t outputs,
                 std::size_t inputs, std::vector<double>& dw,
                 std::vector<double>& db) {
  for (std::size_t o = 0; o < outputs; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    double* row = dw.data() + o * inputs;
    for (std::size_t i = 0; i < inputs; ++i) row[i] += go * a[i];
    db[o] += go;
  }
}

void store(FlatTensor& t, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) t.values[i] = static_cast<float>(v[i]);
}

}  // namespace

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  check_model(spec);
  std::mt19937_64 rng(seed);
  auto layer = [&rng](Model& m, const std::string& prefix, std::size_t out,
                      std::size_t in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    FlatTensor w(prefix + "weight", {out, in});
    for (float& v : w.values) v = static_cast<float>(u(rng));
    m.params.add(std::move(w));
    m.params.add(FlatTensor(prefix + "bias", {out}));
  };
  Model m;
  m.spec = spec;
  if (spec.kind == ModelKind::kMlp) {
    layer(m, "hidden.", spec.hidden, spec.input_dim);
    layer(m, "output.", spec.output_dim, spec.hidden);
  } else {
    layer(m, "", spec.output_dim, spec.input_dim);
  }
  return m;
}

ForwardResult forward_loss(const Model& model, const Dataset& data,
                           std::span<const std::size_t> rows) {
  if (rows.empty()) throw StructuralError("forward_loss: empty batch");
  ForwardResult result;
  const Pass pass = run_forward(model, data, rows, &result.cache);
  result.loss = pass.loss_sum / static_cast<double>(rows.size());
  return result;
}

ParameterSet backward(const Model& model, const Dataset& data,
                      const ForwardCache& cache) {
  const ModelSpec& spec = model.spec;
  const std::size_t in_dim = spec.input_dim;
  const std::size_t out_dim = spec.output_dim;
  ParameterSet grads = zeros_like(model.params);
  std::vector<double> x(in_dim);

  if (spec.kind != ModelKind::kMlp) {
    std::vector<double> dw(out_dim * in_dim, 0.0), db(out_dim, 0.0);
    for (std::size_t b = 0; b < cache.rows.size(); ++b) {
      auto xr = data.row(cache.rows[b]);
      std::copy(xr.begin(), xr.end(), x.begin());
      affine_grad(cache.output_grad.data() + b * out_dim, x.data(), out_dim,
                  in_dim, dw, db);
    }
    store(grads[0], dw);
    store(grads[1], db);
    return grads;
  }

  const std::size_t hid = spec.hidden;
  const FlatTensor& w2 = model.params[2];
  std::vector<double> dw1(hid * in_dim, 0.0), db1(hid, 0.0);
  std::vector<double> dw2(out_dim * hid, 0.0), db2(out_dim, 0.0);
  std::vector<double> gh(hid);
  for (std::size_t b = 0; b < cache.rows.size(); ++b) {
    const double* g = cache.output_grad.data() + b * out_dim;
    const double* h = cache.hidden.data() + b * hid;
    const double* pre = cache.hidden_pre.data() + b * hid;
    affine_grad(g, h, out_dim, hid, dw2, db2);
    for (std::size_t j = 0; j < hid; ++j) {
      double s = 0.0;
      if (pre[j] > 0.0) {
        for (std::size_t o = 0; o < out_dim; ++o) s += g[o] * w2.values[o * hid + j];
      }
      gh[j] = s;
    }
    auto xr = data.row(cache.rows[b]);
    std::copy(xr.begin(), xr.end(), x.begin());
    affine_grad(gh.data(), x.data(), hid, in_dim, dw1, db1);
  }
  store(grads[0], dw1);
  store(grads[1], db1);
  store(grads[2], dw2);
  store(grads[3], db2);
  return grads;
}

EvalMetrics evaluate(const Model& model, const Dataset& data) {
  if (data.rows == 0) throw StructuralError("evaluate: empty dataset");
  constexpr std::size_t kChunk = 1024;
  std::vector<std::size_t> rows;
  Pass total;
  for (std::size_t start = 0; start < data.rows; start += kChunk) {
    const std::size_t end = std::min(data.rows, start + kChunk);
    rows.resize(end - start);
    for (std::size_t r = start; r < end; ++r) rows[r - start] = r;
    const Pass p = run_forward(model, data, rows, nullptr);
    total.loss_sum += p.loss_sum;
    total.correct += p.correct;
  }
  EvalMetrics m;
  m.loss = total.loss_sum / static_cast<double>(data.rows);
  if (is_classifier(model.spec)) {
    m.accuracy = static_cast<double>(total.correct) / static_cast<double>(data.rows);
  }
  return m;
}

}  // namespace sbc
