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

#include <random>

#include "panther/errors.hpp"
#include "panther/mcu.hpp"

using namespace panther;

namespace {

McuInstance make(McuVariant v, int rows = 4, int cols = 4) {
  WeightMatrix w(rows, cols);
  for (int i = 0; i < rows * cols; ++i) w.raw[i] = (i % 7 - 3) << 14;
  McuParams p;
  p.variant = v;
  p.baseline = static_cast<Baseline>(static_cast<int>(v) - 1);
  return McuInstance(p, slice_weights(w, SliceConfig::parse("44466555")));
}

void load(McuInstance& m, McuBank b, const DataVector& v) {
  std::copy(v.begin(), v.end(), m.bank(b).begin());
  m.mark_written(b);
}

}  // namespace

TEST_CASE("mask text") {
  const OpMask m = OpMask::parse("110");
  CHECK(m.mvm);
  CHECK(m.mtvm);
  CHECK_FALSE(m.opa);
  CHECK(m.str() == "110");
  CHECK(OpMask::from_bits(m.bits()) == m);
  CHECK_THROWS_AS(OpMask::parse("12"), ConfigError);
}

TEST_CASE("empty mask is free") {
  McuInstance m = make(McuVariant::kV2);
  const McuResult r = m.execute_mask({}, CostModel{});
  CHECK(r.charge.cycles == 0);
  CHECK(r.charge.energy.total() == 0);
}

TEST_CASE("latency composition per variant") {
  const CostModel cost;
  for (McuVariant v : {McuVariant::kV1, McuVariant::kV2}) {
    McuInstance m = make(v);
    load(m, McuBank::kMvmIn, {256, 0, 0, 0});
    load(m, McuBank::kMtvmIn, {0, 256, 0, 0});
    load(m, McuBank::kOpaRow, {1, 1, 1, 1});
    load(m, McuBank::kOpaCol, {1, 1, 1, 1});
    const McuResult r = m.execute_mask(OpMask::parse(v == McuVariant::kV1 ? "111" : "110"), cost);
    if (v == McuVariant::kV1) {
      CHECK(r.charge.cycles >= 2 * cost.reram_mvm_cycles);
      CHECK(m.pending() == 1);
    } else {
      CHECK(r.charge.cycles == cost.reram_mvm_cycles);
    }
  }
}

TEST_CASE("unwritten operand") {
  McuInstance m = make(McuVariant::kV1);
  CHECK_THROWS_AS(m.execute_mask(OpMask::parse("100"), CostModel{}), MissingOperandError);
  load(m, McuBank::kMvmIn, {1, 2, 3, 4});
  m.execute_mask(OpMask::parse("100"), CostModel{});
  // Consumed by the first use.
  CHECK_THROWS_AS(m.execute_mask(OpMask::parse("100"), CostModel{}), MissingOperandError);
}

TEST_CASE("variants agree after commit") {
  std::mt19937_64 rng(3);
  std::vector<std::pair<DataVector, DataVector>> trace;
  for (int t = 0; t < 8; ++t) {
    DataVector x(4), d(4);
    for (auto& e : x) e = static_cast<int16_t>(static_cast<int>(rng() % 513) - 256);
    for (auto& e : d) e = static_cast<int16_t>(static_cast<int>(rng() % 513) - 256);
    trace.emplace_back(x, d);
  }
  std::vector<WeightMatrix> finals;
  const CostModel cost;
  for (McuVariant v : {McuVariant::kV1, McuVariant::kV2, McuVariant::kV3}) {
    McuInstance m = make(v);
    for (const auto& [x, d] : trace) {
      load(m, McuBank::kOpaRow, x);
      load(m, McuBank::kOpaCol, d);
      m.execute_mask(OpMask::parse("001"), cost);
    }
    m.halt_commit(cost);
    CHECK(m.pending() == 0);
    for (int k = 1; k < m.copy_count(); ++k) CHECK(m.copy(k).same_cells(m.copy(0)));
    finals.push_back(reconstruct(m.copy(0)));
  }
  CHECK(finals[0] == finals[1]);
  CHECK(finals[1] == finals[2]);
}

TEST_CASE("pending storage grows only without eager update") {
  const CostModel cost;
  McuInstance v2 = make(McuVariant::kV2), v3 = make(McuVariant::kV3);
  for (int t = 0; t < 5; ++t) {
    for (McuInstance* m : {&v2, &v3}) {
      load(*m, McuBank::kOpaRow, {1, 0, 0, 0});
      load(*m, McuBank::kOpaCol, {1, 0, 0, 0});
      m->execute_mask(OpMask::parse("001"), cost);
    }
  }
  // The first update stays latched in the OPA banks.
  CHECK(v2.pending_words() == 4 * 8);
  CHECK(v2.pending() == 5);
  CHECK(v3.pending_words() == 0);
}

TEST_CASE("halt with nothing pending costs nothing") {
  McuInstance m = make(McuVariant::kV2);
  CHECK(m.halt_commit(CostModel{}).charge.energy.total() == 0);
}
