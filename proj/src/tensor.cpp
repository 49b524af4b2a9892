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
#include "sbc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <utility>

#include "sbc/errors.hpp"

namespace sbc {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::size_t flatten_index(const Shape& shape,
                          std::span<const std::size_t> index) {
  if (index.size() != shape.size()) {
    throw StructuralError("flatten_index: index rank " +
                          std::to_string(index.size()) + " != shape rank " +
                          std::to_string(shape.size()));
  }
  std::size_t flat = 0;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (index[d] >= shape[d]) {
      throw StructuralError("flatten_index: index " + std::to_string(index[d]) +
                            " out of bounds for dimension " +
                            std::to_string(d) + " of size " +
                            std::to_string(shape[d]));
    }
    flat = flat * shape[d] + index[d];
  }
  return flat;
}

std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat) {
  if (flat >= shape_size(shape)) {
    throw StructuralError("unflatten_index: position " + std::to_string(flat) +
                          " out of bounds for " +
                          std::to_string(shape_size(shape)) + " elements");
  }
  std::vector<std::size_t> index(shape.size());
  for (std::size_t d = shape.size(); d-- > 0;) {
    index[d] = flat % shape[d];
    flat /= shape[d];
  }
  return index;
}

FlatTensor::FlatTensor(std::string name, Shape shape)
    : name(std::move(name)), shape(std::move(shape)) {
  values.assign(shape_size(this->shape), 0.0f);
}

FlatTensor::FlatTensor(std::string name, Shape shape, std::vector<float> values)
    : name(std::move(name)), shape(std::move(shape)), values(std::move(values)) {
  if (this->values.size() != shape_size(this->shape)) {
    throw StructuralError("tensor '" + this->name + "': " +
                          std::to_string(this->values.size()) +
                          " values for shape of " +
                          std::to_string(shape_size(this->shape)) +
                          " elements");
  }
}

void ParameterSet::add(FlatTensor tensor) {
  if (find(tensor.name) != nullptr) {
    throw StructuralError("duplicate tensor name '" + tensor.name + "'");
  }
  if (tensor.values.size() != shape_size(tensor.shape)) {
    throw StructuralError("tensor '" + tensor.name +
                          "': value count does not match shape");
  }
  tensors_.push_back(std::move(tensor));
}

std::size_t ParameterSet::num_elements() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

const FlatTensor* ParameterSet::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

FlatTensor* ParameterSet::find(const std::string& name) {
  for (auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

bool shape_compatible(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_layout(b[i])) return false;
  }
  return true;
}

void require_compatible(const ParameterSet& a, const ParameterSet& b,
                        const char* context) {
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= a.size() || i >= b.size()) {
      const auto& extra = i < a.size() ? a[i] : b[i];
      throw StructuralError(std::string(context) + ": tensor '" + extra.name +
                            "' present in only one operand");
    }
    if (!a[i].same_layout(b[i])) {
      throw StructuralError(std::string(context) + ": tensor '" + a[i].name +
                            "' does not match '" + b[i].name + "'");
    }
  }
}

namespace {

ParameterSet zip(const ParameterSet& a, const ParameterSet& b,
                 const char* context,
                 const std::function<float(float, float)>& op) {
  require_compatible(a, b, context);
  ParameterSet out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& v = out[i].values;
    const auto& w = b[i].values;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = op(v[j], w[j]);
  }
  return out;
}

}  // namespace

ParameterSet zeros_like(const ParameterSet& a) {
  ParameterSet out;
  for (const auto& t : a) out.add(FlatTensor(t.name, t.shape));
  return out;
}

ParameterSet add(const ParameterSet& a, const ParameterSet& b) {
  return zip(a, b, "add", [](float x, float y) { return x + y; });
}

ParameterSet subtract(const ParameterSet& a, const ParameterSet& b) {
  return zip(a, b, "subtract", [](float x, float y) { return x - y; });
}

ParameterSet scale(const ParameterSet& a, float c) {
  ParameterSet out = a;
  for (auto& t : out) {
    for (float& v : t.values) v *= c;
  }
  return out;
}

void add_inplace(ParameterSet& a, const ParameterSet& b) {
  require_compatible(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto& v = a[i].values;
    const auto& w = b[i].values;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += w[j];
  }
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw StructuralError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

double max_abs(const ParameterSet& a) {
  double m = 0.0;
  for (const auto& t : a) {
    for (float v : t.values) m = std::max(m, std::fabs(static_cast<double>(v)));
  }
  return m;
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  if (!shape_compatible(a, b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& v = a[i].values;
    const auto& w = b[i].values;
    if (!v.empty() &&
        std::memcmp(v.data(), w.data(), v.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace sbc
