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

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "panther/cost_model.hpp"
#include "panther/graph.hpp"
#include "panther/isa.hpp"

namespace panther {

/// Node shape. Defaults follow the evaluated configuration; memory is in
/// 16-bit words per tile.
struct Topology {
  int tiles = 138;
  int cores_per_tile = 8;
  int mcus_per_core = 2;
  int64_t memory_words = int64_t{1} << 20;

  int tile_of(int core) const { return core / cores_per_tile; }
  int capacity() const { return tiles * cores_per_tile * mcus_per_core; }
};

/// One <=128x128 block of a layer's weight matrix and the MCU holding it.
struct Shard {
  int layer = 0;
  int bi = 0;
  int bj = 0;
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;
  int core = 0;
  int mcu = 0;  // index within the core
};

struct Placement {
  Topology topo;
  std::vector<Shard> shards;
  std::vector<std::vector<int>> layer_shards;  // row-block-major
  std::vector<int> home_core;                  // core of each layer's (0, 0) shard

  int cores_used() const;
  const Shard& shard(int layer, int bi, int bj) const;
  int row_blocks(int layer) const;
  int col_blocks(int layer) const;
};

Placement place(const ModelSpec& model, const Topology& topo);

enum class PKind : uint8_t { kLoad, kStore, kMvm, kMtvm, kOpa, kAlu, kGather, kSend, kRecv };
enum class IoKind : uint8_t { kNone, kInput, kLabel, kLogits };

inline bool is_mcu_kind(PKind k) { return k == PKind::kMvm || k == PKind::kMtvm || k == PKind::kOpa; }

/// Node of the partitioned graph: every vector is at most 128 long and
/// every node runs on one core.
struct PNode {
  PKind kind = PKind::kLoad;
  std::vector<int> inputs;
  int len = 0;
  int core = 0;
  int layer = -1;
  int sample = 0;
  int pixel = -1;
  int shard = -1;
  AluOp alu = AluOp::kAdd;
  std::vector<Segment> segments;
  IoKind io = IoKind::kNone;
  int io_offset = 0;
  int buffer = -1;  // send/recv pair id
};

/// Shared-memory placement of per-batch inputs, one-hot labels and logits.
struct IoMap {
  int batch = 1;
  int input_len = 0;
  int classes = 0;
  int input_tile = 0;
  int output_tile = 0;
  uint32_t input_base = 0;
  uint32_t label_base = 0;
  uint32_t logits_base = 0;

  uint32_t input_addr(int k) const { return input_base + static_cast<uint32_t>(k * input_len); }
  uint32_t label_addr(int k) const { return label_base + static_cast<uint32_t>(k * classes); }
  uint32_t logits_addr(int k) const { return logits_base + static_cast<uint32_t>(k * classes); }
  int64_t words_on(int tile) const;
};

struct PGraph {
  ModelSpec model;
  int batch = 1;
  Placement placement;
  IoMap io;
  std::vector<PNode> nodes;
  int buffers = 0;

  int count(PKind k) const;
};

/// Shards matrices onto MCUs and rewrites the graph into per-shard MCU ops,
/// tree reductions of partial sums, <=128-element vector ops, gathers and
/// send/recv pairs between cores.
PGraph partition(const Graph& g, const Topology& topo);

struct ScheduleOptions {
  McuVariant variant = McuVariant::kV1;
  bool fusion = true;
};

/// Global MCU timestep of every MCU op. `level` of a non-MCU node is the
/// bundle after which it runs (-1: before the first).
struct Schedule {
  std::vector<int> step;
  std::vector<int> level;
  int steps = 0;
  int iterations = 0;
};

/// List scheduling of MCU ops into multi-mask bundles.
Schedule fuse(const PGraph& g, const ScheduleOptions& opt);

struct McuBinding {
  int core = 0;
  int mcu = 0;
  int shard = 0;
  int layer = 0;
};

struct CompileOptions {
  int batch = 1;
  McuVariant variant = McuVariant::kV1;
  Topology topo;
  bool fusion = true;
  int registers = kRegisterLimit - kMaxMcusPerCore * kMcuRegisterSpan;  // general-purpose registers per core
};

struct CompileStats {
  int spills = 0;
  int reloads = 0;
  std::vector<int64_t> spill_words;  // per core
  int64_t pending_words = 0;         // parked pending-OPA operand words, whole batch
};

struct Compiled {
  CompileOptions options;
  PGraph graph;
  Schedule schedule;
  Program program;
  Program crs_program;  // same, with a crs before every halt
  std::vector<McuBinding> mcus;
  CompileStats stats;
};

inline constexpr int kGeneralRegisterBase = kMaxMcusPerCore * kMcuRegisterSpan;
inline constexpr int kReloadScratch = 3 * kBankSize;

inline int bank_register(int mcu, McuBank bank) {
  return mcu * kMcuRegisterSpan + static_cast<int>(bank) * kBankSize;
}

/// Linearizes each core's nodes, allocates registers with spills and emits
/// the per-core programs.
Compiled lower(PGraph g, Schedule s, const CompileOptions& opt);

Compiled compile(const ModelSpec& model, const CompileOptions& opt);

/// Per-shard SlicedMatrix blocks of per-layer weights.
std::vector<SlicedMatrix> shard_weights(const Placement& p, const std::vector<WeightMatrix>& layers,
                                        const SliceConfig& cfg, SlicePolicy policy = SlicePolicy::kStrict);
std::vector<WeightMatrix> gather_weights(const Placement& p, const ModelSpec& model,
                                         const std::vector<SlicedMatrix>& shards);

/// Direct evaluation of a partitioned graph on shard weights (no ISA, no
/// registers). Returns logits per sample; applies the batch's OPAs at the end
/// in per-shard program order.
std::vector<DataVector> interpret(const PGraph& g, std::vector<SlicedMatrix>& shards,
                                  const std::vector<DataVector>& inputs, const std::vector<int>& labels,
                                  int lr_shift, int adc_bits = 0);

/// Forward pass only; no labels, no updates.
std::vector<DataVector> infer(const PGraph& g, std::vector<SlicedMatrix>& shards,
                              const std::vector<DataVector>& inputs, int adc_bits = 0);

/// The same graph evaluated on plain 32-bit weight blocks (one per shard).
std::vector<DataVector> interpret_exact(const PGraph& g, std::vector<WeightMatrix>& blocks,
                                        const std::vector<DataVector>& inputs, const std::vector<int>& labels,
                                        int lr_shift);
std::vector<DataVector> infer_exact(const PGraph& g, std::vector<WeightMatrix>& blocks,
                                    const std::vector<DataVector>& inputs);

std::vector<WeightMatrix> split_weights(const Placement& p, const std::vector<WeightMatrix>& layers);
std::vector<WeightMatrix> join_weights(const Placement& p, const ModelSpec& model,
                                       const std::vector<WeightMatrix>& blocks);

DataVector one_hot(int label, int classes);

}  // namespace panther
