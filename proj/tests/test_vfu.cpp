// Copyright 2026 The Panther Simulator Authors
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

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "panther/errors.hpp"
#include "panther/vfu.hpp"

using namespace panther;

TEST_CASE("add and sub saturate") {
  CHECK(sat_add(32767, 1) == 32767);
  CHECK(sat_sub(-32768, 1) == -32768);
  CHECK(sat_add(100, -250) == -150);
}

TEST_CASE("q_mul matches rounded product") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 2000; ++t) {
    const auto a = static_cast<int16_t>(rng()), b = static_cast<int16_t>(rng());
    CHECK(q_mul(a, b) == oracle::clamp16(oracle::div_pow2_half_even(int64_t{a} * b, 8)));
  }
}

TEST_CASE("relu and its gradient") {
  DataVector a{-3, 0, 5}, b{1, 0, -2}, out(3);
  alu_apply(AluOp::kRelu, a, {}, out);
  CHECK(out == DataVector{0, 0, 5});
  alu_apply(AluOp::kReluGrad, a, b, out);
  CHECK(out == DataVector{-3, 0, 0});
}

TEST_CASE("sigmoid at zero is one half") {
  DataVector a{0}, out(1);
  alu_apply(AluOp::kSigmoid, a, {}, out);
  CHECK(out[0] == 128);
}

TEST_CASE("operands of different length are rejected") {
  DataVector a(3), b(2), out(3);
  CHECK_THROWS_AS(alu_apply(AluOp::kAdd, a, b, out), DimensionError);
}

TEST_CASE("loss gradient is near zero on a confident correct logit") {
  DataVector logits(10, -20 * 256), onehot(10, 0), g(10);
  logits[4] = 20 * 256;
  onehot[4] = 256;
  alu_apply(AluOp::kLossGrad, logits, onehot, g);
  for (int16_t v : g) CHECK(std::abs(v) <= 1);
}

TEST_CASE("loss gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    DataVector logits(10), onehot(10, 0), g(10);
    for (auto& v : logits) v = static_cast<int16_t>(static_cast<int>(rng() % 1537) - 768);
    const int label = static_cast<int>(rng() % 10);
    onehot[label] = 256;
    alu_apply(AluOp::kLossGrad, logits, onehot, g);
    // Central difference in real units on the exact loss.
    auto loss = [&](int k, double delta) {
      double top = -1e9;
      std::vector<double> z(10);
      for (int i = 0; i < 10; ++i) z[i] = logits[i] / 256.0 + (i == k ? delta : 0.0);
      for (double v : z) top = std::max(top, v);
      double s = 0;
      for (double v : z) s += std::exp(v - top);
      return std::log(s) + top - z[label];
    };
    for (int k = 0; k < 10; ++k) {
      const double fd = (loss(k, 1e-5) - loss(k, -1e-5)) / 2e-5;
      // The stored vector is the descent direction, the negated gradient.
      CHECK(std::abs(-fd * 256.0 - g[k]) <= 2.0);
    }
  }
}

TEST_CASE("reduction tree order") {
  const auto plan = reduction_plan(5);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 2);
  CHECK(plan[1] == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(plan[2] == std::vector<std::pair<int, int>>{{0, 1}});
  std::vector<DataVector> parts{{1}, {2}, {3}, {4}, {5}};
  CHECK(reduce_tree(parts) == DataVector{15});
  CHECK(reduction_plan(1).empty());
}

TEST_CASE("cross entropy of uniform logits") {
  DataVector z(4, 0);
  CHECK(softmax_cross_entropy(z, 2) == doctest::Approx(std::log(4.0)));
  CHECK_THROWS_AS(softmax_cross_entropy(z, 4), ShapeError);
}
