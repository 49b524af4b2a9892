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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sbc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

// Row-major (last dimension fastest) flat position of a multi-index.
std::size_t flatten_index(const Shape& shape,
                          std::span<const std::size_t> index);
std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat);

// Dense named float32 tensor. values.size() == shape_size(shape).
struct FlatTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;

  FlatTensor() = default;
  FlatTensor(std::string name, Shape shape);
  FlatTensor(std::string name, Shape shape, std::vector<float> values);

  std::size_t size() const { return values.size(); }
  bool same_layout(const FlatTensor& other) const {
    return name == other.name && shape == other.shape;
  }

  friend bool operator==(const FlatTensor&, const FlatTensor&) = default;
};

// Ordered collection of uniquely named tensors. Iteration follows insertion
// order.
class ParameterSet {
 public:
  ParameterSet() = default;

  void add(FlatTensor tensor);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  // Total number of scalar entries over all tensors.
  std::size_t num_elements() const;

  FlatTensor& operator[](std::size_t i) { return tensors_[i]; }
  const FlatTensor& operator[](std::size_t i) const { return tensors_[i]; }
  const FlatTensor* find(const std::string& name) const;
  FlatTensor* find(const std::string& name);

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<FlatTensor> tensors_;
};

// Identical names, order and shapes.
bool shape_compatible(const ParameterSet& a, const ParameterSet& b);
// Throws StructuralError naming the first offending tensor.
void require_compatible(const ParameterSet& a, const ParameterSet& b,
                        const char* context);

ParameterSet zeros_like(const ParameterSet& a);
ParameterSet add(const ParameterSet& a, const ParameterSet& b);
ParameterSet subtract(const ParameterSet& a, const ParameterSet& b);
ParameterSet scale(const ParameterSet& a, float c);

// In-place a += b.
void add_inplace(ParameterSet& a, const ParameterSet& b);

double dot(std::span<const float> a, std::span<const float> b);
// Max absolute entry over all tensors.
double max_abs(const ParameterSet& a);

// Bitwise equality of all float payloads (distinguishes -0 and +0).
bool bitwise_equal(const ParameterSet& a, const ParameterSet& b);

}  // namespace sbc
