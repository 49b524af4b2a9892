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
#include "doctest.h"
#include "sbc/errors.hpp"
#include "sbc/tensor.hpp"

using namespace sbc;

namespace {

ParameterSet one(const std::string& name, std::vector<float> v) {
  ParameterSet s;
  const std::size_t n = v.size();
  s.add(FlatTensor(name, {n}, std::move(v)));
  return s;
}

}  // namespace

TEST_CASE("add is componentwise") {
  const auto r = add(one("w", {1, 2}), one("w", {3, 4}));
  CHECK(r[0].values == std::vector<float>{4, 6});
  const auto x = one("w", {1.5f, -2.0f, 7.0f});
  CHECK(add(x, zeros_like(x)) == x);
  CHECK_THROWS_AS(add(one("w", {1}), one("v", {1})), StructuralError);
}

TEST_CASE("add names the offending tensor") {
  ParameterSet a = one("w", {1});
  a.add(FlatTensor("b", {2}));
  ParameterSet b = one("w", {1});
  b.add(FlatTensor("b", {3}));
  try {
    add(a, b);
    FAIL("expected a structural error");
  } catch (const StructuralError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
}

TEST_CASE("scale") {
  CHECK(scale(one("w", {2, 4}), 0.5f)[0].values == std::vector<float>{1, 2});
  const auto x = one("w", {3, -1, 8});
  CHECK(scale(x, 0.0f) == zeros_like(x));
  CHECK(scale(x, 1.0f) == x);
}

TEST_CASE("subtract and add_inplace") {
  auto a = one("w", {5, 1});
  const auto b = one("w", {2, 3});
  CHECK(subtract(a, b)[0].values == std::vector<float>{3, -2});
  add_inplace(a, b);
  CHECK(a[0].values == std::vector<float>{7, 4});
  CHECK(max_abs(one("w", {1, -9, 3})) == 9.0);
}

TEST_CASE("row-major flattening") {
  const Shape s{2, 3};
  const std::size_t idx[] = {1, 2};
  CHECK(flatten_index(s, idx) == 5);
  CHECK(unflatten_index(s, 0) == std::vector<std::size_t>{0, 0});
  CHECK(unflatten_index({4}, 3) == std::vector<std::size_t>{3});

  const Shape cube{3, 4, 5};
  for (std::size_t f = 0; f < shape_size(cube); ++f) {
    const auto m = unflatten_index(cube, f);
    CHECK(flatten_index(cube, m) == f);
    CHECK(f == (m[0] * 4 + m[1]) * 5 + m[2]);
  }
  const std::size_t bad[] = {2, 0};
  CHECK_THROWS_AS(flatten_index(s, bad), StructuralError);
  CHECK_THROWS_AS(unflatten_index(s, 6), StructuralError);
}

TEST_CASE("parameter sets") {
  ParameterSet s;
  s.add(FlatTensor("a", {2, 2}));
  s.add(FlatTensor("b", {3}));
  CHECK(s.num_elements() == 7);
  CHECK(s.find("b")->size() == 3);
  CHECK(s.find("c") == nullptr);
  CHECK_THROWS(s.add(FlatTensor("a", {1})));
  CHECK_THROWS(FlatTensor("x", {2}, {1, 2, 3}));
}

TEST_CASE("bitwise equality distinguishes signed zero") {
  const auto a = one("w", {0.0f});
  const auto b = one("w", {-0.0f});
  CHECK(a == b);
  CHECK_FALSE(bitwise_equal(a, b));
  CHECK(bitwise_equal(a, a));
}
