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

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "panther/compiler.hpp"
#include "panther/errors.hpp"
#include "panther/vfu.hpp"

using namespace panther;

namespace {

const SliceConfig kCfg = SliceConfig::parse("44466555");

ModelSpec three_layer() { return mlp({128, 128, 128, 10}); }

Topology topo3() {
  Topology t;
  t.mcus_per_core = 3;
  return t;
}

std::map<PKind, int> mcu_ops(const PGraph& g) {
  std::map<PKind, int> m;
  for (const auto& n : g.nodes)
    if (is_mcu_kind(n.kind)) ++m[n.kind];
  return m;
}

WeightMatrix random_weights(std::mt19937_64& rng, int rows, int cols, int span) {
  WeightMatrix w(rows, cols);
  std::uniform_int_distribution<int> d(-span, span);
  for (auto& v : w.raw) v = d(rng);
  return w;
}

DataVector random_vec(std::mt19937_64& rng, int n, int span) {
  DataVector v(n);
  std::uniform_int_distribution<int> d(-span, span);
  for (auto& e : v) e = static_cast<int16_t>(d(rng));
  return v;
}

}  // namespace

TEST_CASE("single-sample three-layer SGD takes six MCU timesteps") {
  const Graph g = build_graph(three_layer(), 1);
  const PGraph pg = partition(g, topo3());
  const auto ops = mcu_ops(pg);
  CHECK(ops.at(PKind::kMvm) == 3);
  CHECK(ops.at(PKind::kMtvm) == 2);
  CHECK(ops.at(PKind::kOpa) == 3);
  for (McuVariant v : {McuVariant::kV1, McuVariant::kV2, McuVariant::kV3}) {
    const Schedule s = fuse(pg, {v, true});
    CHECK(s.steps == 6);
  }
  CHECK(fuse(pg, {McuVariant::kV2, false}).steps == 8);

  // Step of every MCU operation, by (kind, layer).
  const Schedule s = fuse(pg, {McuVariant::kV1, true});
  std::map<std::pair<PKind, int>, int> at;
  for (size_t i = 0; i < pg.nodes.size(); ++i)
    if (is_mcu_kind(pg.nodes[i].kind)) at[{pg.nodes[i].kind, pg.nodes[i].layer}] = s.step[i];
  CHECK(at[{PKind::kMvm, 0}] == 0);
  CHECK(at[{PKind::kMvm, 1}] == 1);
  CHECK(at[{PKind::kMvm, 2}] == 2);
  CHECK(at[{PKind::kMtvm, 2}] == 3);
  CHECK(at[{PKind::kMtvm, 1}] == 4);
  CHECK(at[{PKind::kOpa, 2}] == 4);
  CHECK(at[{PKind::kOpa, 1}] == 5);
  CHECK(at[{PKind::kOpa, 0}] == 5);
}

TEST_CASE("five-sample mini-batch puts the OPA block last") {
  const PGraph pg = partition(build_graph(three_layer(), 5), topo3());
  CHECK(pg.count(PKind::kOpa) == 15);
  const Schedule s = fuse(pg, {McuVariant::kV2, true});
  CHECK(s.steps == 13);
  // MVMs and MTVMs fill steps 0-8; the 15 OPAs fill the final five steps.
  int last_other = -1;
  std::set<int> opa_steps;
  for (size_t i = 0; i < pg.nodes.size(); ++i) {
    if (!is_mcu_kind(pg.nodes[i].kind)) continue;
    if (pg.nodes[i].kind == PKind::kOpa)
      opa_steps.insert(s.step[i]);
    else
      last_other = std::max(last_other, s.step[i]);
  }
  CHECK(last_other == 8);
  CHECK(opa_steps == std::set<int>{8, 9, 10, 11, 12});
  // Forward of input k on layer l at step k + l; backward of input k on
  // layer l at step k + 6 - l.
  for (size_t i = 0; i < pg.nodes.size(); ++i) {
    const PNode& n = pg.nodes[i];
    if (n.kind == PKind::kMvm) CHECK(s.step[i] == n.sample + n.layer);
    if (n.kind == PKind::kMtvm) CHECK(s.step[i] == n.sample + 5 - n.layer);
  }
  CHECK(fuse(pg, {McuVariant::kV1, true}).steps == 18);
  CHECK(fuse(pg, {McuVariant::kV3, true}).steps == 10);
  CHECK(fuse(pg, {McuVariant::kV2, false}).steps == 40);
}

TEST_CASE("fused schedule respects dependencies and resources") {
  for (McuVariant v : {McuVariant::kV1, McuVariant::kV2, McuVariant::kV3}) {
    for (const ModelSpec& m : {three_layer(), mlp_l4(), cnn4()}) {
      const PGraph pg = partition(build_graph(m, 2), Topology{});
      const Schedule s = fuse(pg, {v, true});
      std::map<std::tuple<int, int, int>, int> used;  // (shard, step, kind) -> count
      for (size_t i = 0; i < pg.nodes.size(); ++i) {
        const PNode& n = pg.nodes[i];
        if (!is_mcu_kind(n.kind)) continue;
        REQUIRE(s.step[i] >= 0);
        REQUIRE(s.step[i] < s.steps);
        const int kind = v == McuVariant::kV1 ? 0 : static_cast<int>(n.kind);
        REQUIRE(++used[{n.shard, s.step[i], kind}] == 1);
      }
      // An MCU result is consumed no earlier than the step after it.
      std::vector<int> ready(pg.nodes.size(), -1);
      for (size_t i = 0; i < pg.nodes.size(); ++i) {
        int r = -1;
        for (int in : pg.nodes[i].inputs) r = std::max(r, ready[in]);
        if (is_mcu_kind(pg.nodes[i].kind)) {
          REQUIRE(s.step[i] > r);
          ready[i] = s.step[i];
        } else {
          ready[i] = r;
        }
      }
    }
  }
}

TEST_CASE("one-layer model needs only MVM and OPA") {
  const PGraph pg = partition(build_graph(mlp({64, 10}), 1), Topology{});
  const auto ops = mcu_ops(pg);
  CHECK(ops.count(PKind::kMtvm) == 0);
  CHECK(ops.at(PKind::kMvm) == 1);
  CHECK(ops.at(PKind::kOpa) == 1);
}

TEST_CASE("layers larger than a crossbar are sharded") {
  const Placement p = place(mlp({256, 256, 10}), Topology{});
  CHECK(p.layer_shards[0].size() == 4);
  CHECK(p.row_blocks(0) == 2);
  CHECK(p.col_blocks(0) == 2);
  Topology big;
  big.tiles = 1024;
  const Placement q = place(mlp({4096, 4096, 10}), big);
  CHECK(q.layer_shards[0].size() == 1024);
  Topology small;
  small.tiles = 16;
  CHECK_THROWS_AS(place(mlp({4096, 4096, 10}), small), CapacityError);
}

TEST_CASE("compiled programs validate, link and halt") {
  for (const ModelSpec& m : {mlp({64, 64, 10}), mlp_l4(), cnn4()}) {
    for (McuVariant v : {McuVariant::kV1, McuVariant::kV2, McuVariant::kV3}) {
      CompileOptions o;
      o.batch = 2;
      o.variant = v;
      const Compiled c = compile(m, o);
      CHECK_NOTHROW(validate(c.program));
      CHECK_NOTHROW(link_check(c.program));
      CHECK_NOTHROW(link_check(c.crs_program));
      for (const auto& core : c.program.cores) CHECK(core.code.back().op == Opcode::kHalt);
      int crs = 0;
      for (const auto& core : c.crs_program.cores)
        for (const auto& ins : core.code) crs += ins.op == Opcode::kCrs;
      CHECK(crs == static_cast<int>(c.program.cores.size()));
      CHECK(c.mcus.size() == c.graph.placement.shards.size());
    }
  }
}

TEST_CASE("a tiny register file spills but still compiles") {
  CompileOptions o;
  o.registers = kReloadScratch + 512;
  const Compiled c = compile(mlp_l4(), o);
  CHECK(c.stats.spills > 0);
  CHECK_NOTHROW(link_check(c.program));
}

TEST_CASE("shared memory overflow is reported") {
  CompileOptions o;
  o.batch = 64;
  o.registers = kReloadScratch + 128;
  o.topo.memory_words = 4096;
  CHECK_THROWS_AS(compile(mlp_l4(), o), SpillOverflowError);
}

TEST_CASE("shard and gather weights round-trip") {
  std::mt19937_64 rng(3);
  const ModelSpec m = mlp({300, 200, 10});
  const Placement p = place(m, Topology{});
  const std::vector<WeightMatrix> w = {random_weights(rng, 300, 200, 1 << (14 + kUpdateShift)), random_weights(rng, 200, 10, 1 << (14 + kUpdateShift))};
  const auto shards = shard_weights(p, w, kCfg);
  CHECK(shards.size() == p.shards.size());
  CHECK(gather_weights(p, m, shards) == w);
}

TEST_CASE("interpreted dense forward matches the blocked matvec oracle") {
  std::mt19937_64 rng(11);
  const ModelSpec m = mlp({300, 140, 10});
  const PGraph g = partition(build_graph(m, 3), Topology{});
  const std::vector<WeightMatrix> w = {random_weights(rng, 300, 140, 1 << (12 + kUpdateShift)), random_weights(rng, 140, 10, 1 << (12 + kUpdateShift))};
  auto shards = shard_weights(g.placement, w, kCfg);
  std::vector<DataVector> xs;
  for (int k = 0; k < 3; ++k) xs.push_back(random_vec(rng, 300, 256));
  const auto logits = interpret(g, shards, xs, {0, 1, 2}, -1);
  for (int k = 0; k < 3; ++k) {
    const auto h = oracle::relu(oracle::blocked_matvec(w[0].raw, 300, 140, xs[k]));
    CHECK(logits[k] == oracle::blocked_matvec(w[1].raw, 140, 10, h));
  }
  CHECK(gather_weights(g.placement, m, shards) == w);  // negative shift: no update
}

TEST_CASE("conv lowering matches direct convolution forward, backward and weight gradient") {
  std::mt19937_64 rng(5);
  // 8x8x2 input, 3x3 kernels, padding 1 then 0, then a classifier.
  ModelSpec m;
  m.name = "conv_check";
  m.layers = {LayerSpec::conv(2, 4, 8, 3, 1, Activation::kRelu), LayerSpec::conv(4, 3, 8, 3, 0, Activation::kRelu),
              LayerSpec::dense(108, 10, Activation::kNone)};
  m.validate();
  const oracle::Conv c1{2, 4, 8, 3, 1}, c2{4, 3, 8, 3, 0};
  const std::vector<WeightMatrix> w = {random_weights(rng, 18, 4, 1 << (15 + kUpdateShift)), random_weights(rng, 36, 3, 1 << (15 + kUpdateShift)),
                                       random_weights(rng, 108, 10, 1 << (14 + kUpdateShift))};
  const int lr = 2 + kUpdateShift;
  const DataVector x = random_vec(rng, 128, 512);
  const int label = 7;

  // Oracle.
  const auto h1 = oracle::relu(c1.forward(w[0].raw, x));
  const auto h2 = oracle::relu(c2.forward(w[1].raw, h1));
  const auto logits = oracle::matvec(w[2].raw, 108, 10, h2);
  DataVector d3(10);
  alu_apply(AluOp::kLossGrad, logits, one_hot(label, 10), d3);
  auto d2 = oracle::matvec(oracle::transpose(w[2].raw, 108, 10), 10, 108, d3);
  for (size_t i = 0; i < d2.size(); ++i) d2[i] = h2[i] > 0 ? d2[i] : 0;
  auto d1 = c2.backward(w[1].raw, d2);
  for (size_t i = 0; i < d1.size(); ++i) d1[i] = h1[i] > 0 ? d1[i] : 0;
  const auto w3 = oracle::outer_accumulate(w[2].raw, 108, 10, h2, d3, lr);
  const auto w2 = c2.update(w[1].raw, h1, d2, lr);
  const auto w1 = c1.update(w[0].raw, x, d1, lr);
  REQUIRE(w3 != w[2].raw);
  REQUIRE(w2 != w[1].raw);
  REQUIRE(w1 != w[0].raw);

  const PGraph g = partition(build_graph(m, 1), Topology{});
  int opas0 = 0, opas1 = 0;
  for (const auto& n : g.nodes) {
    if (n.kind != PKind::kOpa) continue;
    opas0 += n.layer == 0;
    opas1 += n.layer == 1;
  }
  CHECK(opas0 == 64);  // E^2 with E = 8
  CHECK(opas1 == 36);  // E^2 with E = 6
  // Generous carry headroom keeps the update free of saturation.
  const SliceConfig roomy(std::vector<SliceSpec>(8, SliceSpec{4, 11}));
  auto shards = shard_weights(g.placement, w, roomy);
  const auto out = interpret(g, shards, {x}, {label}, lr);
  CHECK(out[0] == logits);
  const auto after = gather_weights(g.placement, m, shards);
  uint64_t sat = 0;
  for (const auto& sh : shards)
    for (uint64_t e : sh.stats().saturation_events) sat += e;
  REQUIRE(sat == 0);
  CHECK(after[2].raw == w3);
  CHECK(after[1].raw == w2);
  CHECK(after[0].raw == w1);

  // Weight-gradient OPAs of one sample on one crossbar occupy E^2 timesteps.
  const Schedule s = fuse(g, {McuVariant::kV3, true});
  std::set<int> steps0;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].kind == PKind::kOpa && g.nodes[i].layer == 0) steps0.insert(s.step[i]);
  CHECK(steps0.size() == 64);
}

TEST_CASE("1x1 convolution equals a dense layer per pixel") {
  std::mt19937_64 rng(9);
  ModelSpec conv;
  conv.layers = {LayerSpec::conv(4, 4, 2, 1, 0, Activation::kNone)};
  ModelSpec dense = mlp({4, 4});
  const WeightMatrix w = random_weights(rng, 4, 4, 1 << kWeightFormat.frac_bits);
  const DataVector x = random_vec(rng, 16, 1024);
  const PGraph gc = partition(build_graph(conv, 1), Topology{});
  auto sc = shard_weights(gc.placement, {w}, kCfg);
  const auto yc = interpret(gc, sc, {x}, {0}, -1)[0];
  const PGraph gd = partition(build_graph(dense, 1), Topology{});
  for (int p = 0; p < 4; ++p) {
    auto sd = shard_weights(gd.placement, {w}, kCfg);
    const DataVector xp(x.begin() + p * 4, x.begin() + p * 4 + 4);
    const auto yd = interpret(gd, sd, {xp}, {0}, -1)[0];
    CHECK(DataVector(yc.begin() + p * 4, yc.begin() + p * 4 + 4) == yd);
  }
}

TEST_CASE("unsupported convolutions are rejected") {
  ModelSpec m;
  m.layers = {LayerSpec::conv(16, 8, 8, 3, 0, Activation::kRelu)};  // 144 patch rows
  CHECK_THROWS_AS(m.validate(), UnsupportedConvError);
  m.layers = {LayerSpec::conv(1, 8, 8, 3, 3, Activation::kRelu)};  // pad >= kernel
  CHECK_THROWS_AS(m.validate(), UnsupportedConvError);
}
