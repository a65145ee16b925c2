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

#include <algorithm>
#include <cstdlib>
#include <tuple>

#include "panther/compiler.hpp"
#include "panther/errors.hpp"

namespace panther {

DataVector one_hot(int label, int classes) {
  if (label < 0 || label >= classes) throw ShapeError("label " + std::to_string(label) + " out of range");
  DataVector v(static_cast<size_t>(classes), 0);
  v[static_cast<size_t>(label)] = int16_t{1} << kDataFormat.frac_bits;
  return v;
}

std::vector<SlicedMatrix> shard_weights(const Placement& p, const std::vector<WeightMatrix>& layers,
                                        const SliceConfig& cfg, SlicePolicy policy) {
  std::vector<SlicedMatrix> out;
  for (const auto& block : split_weights(p, layers)) out.push_back(slice_weights(block, cfg, policy));
  return out;
}

std::vector<WeightMatrix> gather_weights(const Placement& p, const ModelSpec& model,
                                         const std::vector<SlicedMatrix>& shards) {
  std::vector<WeightMatrix> blocks;
  for (const auto& s : shards) blocks.push_back(reconstruct(s));
  return join_weights(p, model, blocks);
}

namespace {

// Matrix primitives on bit-sliced crossbars.
struct SlicedOps {
  std::vector<SlicedMatrix>& m;
  int adc_bits;

  int adc(const SlicedMatrix& a) const {
    return adc_bits > 0 ? adc_bits : lossless_adc_bits(a.config(), std::max(a.rows(), a.cols()));
  }
  DataVector mvm(int s, const DataVector& x) const { return mvm_bitsliced(m[s], x, adc(m[s])); }
  DataVector mtvm(int s, const DataVector& d) const { return mtvm_bitsliced(m[s], d, adc(m[s])); }
  void opa(int s, const DataVector& x, const DataVector& d, int lr_shift) const {
    opa_bitsliced(m[s], x, d, lr_shift);
  }
};

// The same primitives on plain 32-bit blocks.
struct ExactOps {
  std::vector<WeightMatrix>& m;

  DataVector mvm(int s, const DataVector& x) const {
    const WeightMatrix& w = m[s];
    DataVector y(static_cast<size_t>(w.cols));
    for (int j = 0; j < w.cols; ++j) {
      int64_t acc = 0;
      for (int i = 0; i < w.rows; ++i) acc += int64_t{x[i]} * w.at(i, j);
      y[j] = saturate16(round_shift_right(acc, kWeightFormat.frac_bits));
    }
    return y;
  }
  DataVector mtvm(int s, const DataVector& d) const {
    const WeightMatrix& w = m[s];
    DataVector y(static_cast<size_t>(w.rows));
    for (int i = 0; i < w.rows; ++i) {
      int64_t acc = 0;
      for (int j = 0; j < w.cols; ++j) acc += int64_t{d[j]} * w.at(i, j);
      y[i] = saturate16(round_shift_right(acc, kWeightFormat.frac_bits));
    }
    return y;
  }
  void opa(int s, const DataVector& x, const DataVector& d, int lr_shift) const {
    if (lr_shift < 0) return;
    WeightMatrix& w = m[s];
    for (int j = 0; j < w.cols; ++j) {
      const int64_t dm = update_magnitude(d[j], lr_shift);
      if (dm == 0) continue;
      for (int i = 0; i < w.rows; ++i) {
        const int64_t p = std::abs(int64_t{x[i]}) * dm;
        w.at(i, j) = saturate32(w.at(i, j) + (((x[i] < 0) != (d[j] < 0)) ? -p : p));
      }
    }
  }
};

// Marks the nodes a forward pass needs: ancestors of the logits stores.
std::vector<char> forward_cone(const PGraph& g) {
  std::vector<char> need(g.nodes.size(), 0);
  for (size_t id = g.nodes.size(); id-- > 0;) {
    if (g.nodes[id].kind == PKind::kStore) need[id] = 1;
    if (!need[id]) continue;
    for (int in : g.nodes[id].inputs) need[in] = 1;
  }
  return need;
}

template <class Ops>
std::vector<DataVector> walk(const PGraph& g, const Ops& ops, const std::vector<DataVector>& inputs,
                             const std::vector<int>* labels, int lr_shift) {
  if (static_cast<int>(inputs.size()) != g.batch || (labels && static_cast<int>(labels->size()) != g.batch))
    throw ShapeError("one input and one label per batch member expected");
  for (const auto& x : inputs)
    if (static_cast<int>(x.size()) != g.io.input_len) throw ShapeError("input length mismatch");
  const std::vector<char> need = labels ? std::vector<char>(g.nodes.size(), 1) : forward_cone(g);
  std::vector<DataVector> val(g.nodes.size());
  std::vector<DataVector> logits(static_cast<size_t>(g.batch));
  std::vector<std::tuple<int, int, int>> updates;  // shard, x node, d node

  for (size_t id = 0; id < g.nodes.size(); ++id) {
    if (!need[id]) continue;
    const PNode& n = g.nodes[id];
    DataVector& out = val[id];
    switch (n.kind) {
      case PKind::kLoad: {
        if (n.io == IoKind::kInput) {
          const DataVector& x = inputs[n.sample];
          out.assign(x.begin() + n.io_offset, x.begin() + n.io_offset + n.len);
        } else {
          out = one_hot((*labels)[n.sample], n.len);
        }
        break;
      }
      case PKind::kStore:
        logits[n.sample] = val[n.inputs[0]];
        break;
      case PKind::kMvm:
        out = ops.mvm(n.shard, val[n.inputs[0]]);
        break;
      case PKind::kMtvm:
        out = ops.mtvm(n.shard, val[n.inputs[0]]);
        break;
      case PKind::kOpa:
        updates.emplace_back(n.shard, n.inputs[0], n.inputs[1]);
        break;
      case PKind::kAlu:
        out.resize(n.len);
        alu_apply(n.alu, val[n.inputs[0]], n.inputs.size() > 1 ? std::span<const int16_t>(val[n.inputs[1]])
                                                              : std::span<const int16_t>(),
                  out);
        break;
      case PKind::kGather:
        for (const auto& s : n.segments) {
          if (s.src < 0) {
            out.insert(out.end(), s.count, 0);
          } else {
            const DataVector& src = val[n.inputs[s.src]];
            out.insert(out.end(), src.begin() + s.offset, src.begin() + s.offset + s.count);
          }
        }
        break;
      case PKind::kSend:
      case PKind::kRecv:
        out = val[n.inputs[0]];
        break;
    }
  }
  // Updates land at halt, in program order.
  if (lr_shift >= 0)
    for (auto [s, x, d] : updates) ops.opa(s, val[x], val[d], lr_shift);
  return logits;
}

}  // namespace

std::vector<DataVector> interpret(const PGraph& g, std::vector<SlicedMatrix>& shards,
                                  const std::vector<DataVector>& inputs, const std::vector<int>& labels,
                                  int lr_shift, int adc_bits) {
  return walk(g, SlicedOps{shards, adc_bits}, inputs, &labels, lr_shift);
}

std::vector<DataVector> infer(const PGraph& g, std::vector<SlicedMatrix>& shards,
                              const std::vector<DataVector>& inputs, int adc_bits) {
  return walk(g, SlicedOps{shards, adc_bits}, inputs, nullptr, -1);
}

std::vector<DataVector> interpret_exact(const PGraph& g, std::vector<WeightMatrix>& blocks,
                                        const std::vector<DataVector>& inputs, const std::vector<int>& labels,
                                        int lr_shift) {
  return walk(g, ExactOps{blocks}, inputs, &labels, lr_shift);
}

std::vector<DataVector> infer_exact(const PGraph& g, std::vector<WeightMatrix>& blocks,
                                    const std::vector<DataVector>& inputs) {
  return walk(g, ExactOps{blocks}, inputs, nullptr, -1);
}

std::vector<WeightMatrix> split_weights(const Placement& p, const std::vector<WeightMatrix>& layers) {
  if (layers.size() != p.layer_shards.size()) throw ShapeError("one weight matrix per layer expected");
  std::vector<WeightMatrix> out;
  out.reserve(p.shards.size());
  for (const auto& sh : p.shards) {
    WeightMatrix block(sh.rows, sh.cols);
    for (int i = 0; i < sh.rows; ++i)
      for (int j = 0; j < sh.cols; ++j) block.at(i, j) = layers[sh.layer].at(sh.row0 + i, sh.col0 + j);
    out.push_back(std::move(block));
  }
  return out;
}

std::vector<WeightMatrix> join_weights(const Placement& p, const ModelSpec& model,
                                       const std::vector<WeightMatrix>& blocks) {
  std::vector<WeightMatrix> out;
  for (const auto& l : model.layers) out.emplace_back(l.weight_rows(), l.weight_cols());
  for (size_t s = 0; s < p.shards.size(); ++s) {
    const Shard& sh = p.shards[s];
    for (int i = 0; i < sh.rows; ++i)
      for (int j = 0; j < sh.cols; ++j) out[sh.layer].at(sh.row0 + i, sh.col0 + j) = blocks[s].at(i, j);
  }
  return out;
}

}  // namespace panther
