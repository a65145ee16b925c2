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
#include <map>

#include "panther/compiler.hpp"
#include "panther/errors.hpp"

namespace panther {
namespace {

struct Piece {
  int node;
  int len;
};
using Tensor = std::vector<Piece>;

int blocks(int n) { return (n + kCrossbarDim - 1) / kCrossbarDim; }

class Partitioner {
 public:
  Partitioner(const Graph& g, PGraph& out) : g_(g), out_(out) {}

  void run() {
    tensors_.resize(g_.nodes.size());
    for (size_t id = 0; id < g_.nodes.size(); ++id) tensors_[id] = lower_node(g_.nodes[id]);
  }

 private:
  int emit(PNode n) {
    out_.nodes.push_back(std::move(n));
    return static_cast<int>(out_.nodes.size()) - 1;
  }

  int core_of(int node) const { return out_.nodes[node].core; }
  int home(int layer) const { return out_.placement.home_core[layer]; }

  // Value `node` made available on `core`, through a send/recv pair if needed.
  int on(int node, int core) {
    const PNode& src = out_.nodes[node];
    if (src.core == core) return node;
    const auto key = std::make_pair(node, core);
    if (auto it = transfers_.find(key); it != transfers_.end()) return it->second;
    PNode s;
    s.kind = PKind::kSend;
    s.inputs = {node};
    s.len = src.len;
    s.core = src.core;
    s.layer = src.layer;
    s.sample = src.sample;
    s.buffer = out_.buffers++;
    PNode r = s;
    r.kind = PKind::kRecv;
    r.core = core;
    const int sid = emit(std::move(s));
    r.inputs = {sid};
    const int rid = emit(std::move(r));
    transfers_[key] = rid;
    return rid;
  }

  // Elements [off, off + count) of a tensor as one vector on `core`.
  int piece(const Tensor& t, int off, int count, int core, int layer, int sample) {
    int pos = 0;
    for (const auto& p : t) {
      if (pos == off && p.len == count) return on(p.node, core);
      pos += p.len;
    }
    return gather(t, {{0, off, count}}, core, layer, sample);
  }

  // Physical gather of logical segments (src 0 = tensor t, -1 = zeros).
  int gather(const Tensor& t, const std::vector<Segment>& segs, int core, int layer, int sample) {
    PNode n;
    n.kind = PKind::kGather;
    n.core = core;
    n.layer = layer;
    n.sample = sample;
    std::map<int, int> slot;  // physical node -> input index
    for (const auto& s : segs) {
      n.len += s.count;
      if (s.src < 0) {
        n.segments.push_back(s);
        continue;
      }
      int pos = 0, need = s.offset, left = s.count;
      for (const auto& p : t) {
        if (left == 0) break;
        if (need < pos + p.len) {
          const int start = need - pos;
          const int take = std::min(left, p.len - start);
          auto [it, fresh] = slot.emplace(p.node, static_cast<int>(n.inputs.size()));
          if (fresh) n.inputs.push_back(on(p.node, core));
          n.segments.push_back({it->second, start, take});
          need += take;
          left -= take;
        }
        pos += p.len;
      }
      if (left != 0) throw DimensionError("gather reads past the end of its source");
    }
    return emit(std::move(n));
  }

  int reduce(std::vector<int> parts, int core, int layer, int sample) {
    if (parts.size() == 1) return parts.front();
    for (int& p : parts) p = on(p, core);
    for (const auto& level : reduction_plan(static_cast<int>(parts.size()))) {
      std::vector<int> next;
      for (auto [i, j] : level) next.push_back(alu(AluOp::kAdd, parts[i], parts[j], core, layer, sample));
      if (parts.size() % 2) next.push_back(parts.back());
      parts = std::move(next);
    }
    return parts.front();
  }

  int alu(AluOp op, int a, int b, int core, int layer, int sample) {
    PNode n;
    n.kind = PKind::kAlu;
    n.alu = op;
    n.core = core;
    n.layer = layer;
    n.sample = sample;
    n.len = out_.nodes[a].len;
    n.inputs = b < 0 ? std::vector<int>{a} : std::vector<int>{a, b};
    return emit(std::move(n));
  }

  int mcu_op(PKind k, int shard, const Node& src, std::vector<int> in, int len) {
    const Shard& sh = out_.placement.shards[shard];
    PNode n;
    n.kind = k;
    n.shard = shard;
    n.core = sh.core;
    n.layer = src.layer;
    n.sample = src.sample;
    n.pixel = src.pixel;
    n.inputs = std::move(in);
    n.len = len;
    return emit(std::move(n));
  }

  int io_load(IoKind io, int offset, int len, int core, int layer, int sample) {
    PNode n;
    n.kind = PKind::kLoad;
    n.io = io;
    n.io_offset = offset;
    n.len = len;
    n.core = core;
    n.layer = layer;
    n.sample = sample;
    return emit(std::move(n));
  }

  Tensor lower_node(const Node& n) {
    const Placement& pl = out_.placement;
    switch (n.kind) {
      case NodeKind::kInput: {
        Tensor t;
        for (int off = 0; off < n.len; off += kCrossbarDim) {
          const int len = std::min(kCrossbarDim, n.len - off);
          t.push_back({io_load(IoKind::kInput, off, len, home(0), 0, n.sample), len});
        }
        return t;
      }
      case NodeKind::kLabel:
        return {{io_load(IoKind::kLabel, 0, n.len, home(n.layer), n.layer, n.sample), n.len}};
      case NodeKind::kMvm: {
        const Tensor& x = tensors_[n.inputs[0]];
        Tensor t;
        for (int bj = 0; bj < pl.col_blocks(n.layer); ++bj) {
          std::vector<int> parts;
          for (int bi = 0; bi < pl.row_blocks(n.layer); ++bi) {
            const int sid = pl.layer_shards[n.layer][bi * pl.col_blocks(n.layer) + bj];
            const Shard& sh = pl.shards[sid];
            const int xin = piece(x, sh.row0, sh.rows, sh.core, n.layer, n.sample);
            parts.push_back(mcu_op(PKind::kMvm, sid, n, {xin}, sh.cols));
          }
          t.push_back({reduce(parts, home(n.layer), n.layer, n.sample), pl.shards[pl.layer_shards[n.layer][bj]].cols});
        }
        return t;
      }
      case NodeKind::kMtvm: {
        const Tensor& d = tensors_[n.inputs[0]];
        Tensor t;
        for (int bi = 0; bi < pl.row_blocks(n.layer); ++bi) {
          std::vector<int> parts;
          int rows = 0;
          for (int bj = 0; bj < pl.col_blocks(n.layer); ++bj) {
            const int sid = pl.layer_shards[n.layer][bi * pl.col_blocks(n.layer) + bj];
            const Shard& sh = pl.shards[sid];
            const int din = piece(d, sh.col0, sh.cols, sh.core, n.layer, n.sample);
            parts.push_back(mcu_op(PKind::kMtvm, sid, n, {din}, sh.rows));
            rows = sh.rows;
          }
          t.push_back({reduce(parts, home(n.layer), n.layer, n.sample), rows});
        }
        return t;
      }
      case NodeKind::kOpa: {
        const Tensor& x = tensors_[n.inputs[0]];
        const Tensor& d = tensors_[n.inputs[1]];
        for (int sid : pl.layer_shards[n.layer]) {
          const Shard& sh = pl.shards[sid];
          const int xin = piece(x, sh.row0, sh.rows, sh.core, n.layer, n.sample);
          const int din = piece(d, sh.col0, sh.cols, sh.core, n.layer, n.sample);
          mcu_op(PKind::kOpa, sid, n, {xin, din}, 0);
        }
        return {};
      }
      case NodeKind::kAlu: {
        const int core = home(n.layer);
        const Tensor& a = tensors_[n.inputs[0]];
        if (n.alu == AluOp::kLossGrad) {
          const int av = piece(a, 0, n.len, core, n.layer, n.sample);
          const int bv = piece(tensors_[n.inputs[1]], 0, n.len, core, n.layer, n.sample);
          return {{alu(n.alu, av, bv, core, n.layer, n.sample), n.len}};
        }
        Tensor t;
        int off = 0;
        for (const auto& p : a) {
          const int av = on(p.node, core);
          const int bv =
              alu_is_unary(n.alu) ? -1 : piece(tensors_[n.inputs[1]], off, p.len, core, n.layer, n.sample);
          t.push_back({alu(n.alu, av, bv, core, n.layer, n.sample), p.len});
          off += p.len;
        }
        return t;
      }
      case NodeKind::kGather: {
        const Tensor& src = tensors_[n.inputs[0]];
        const int core = home(n.layer);
        // Split the output into <=128 chunks; a chunk that is exactly one
        // source piece is reused as is.
        Tensor t;
        std::vector<Segment> chunk;
        int chunk_len = 0;
        auto flush = [&] {
          if (chunk.empty()) return;
          int reused = -1;
          if (chunk.size() == 1 && chunk[0].src == 0) {
            int pos = 0;
            for (const auto& p : src) {
              if (pos == chunk[0].offset && p.len == chunk[0].count) reused = p.node;
              pos += p.len;
            }
          }
          t.push_back({reused >= 0 ? reused : gather(src, chunk, core, n.layer, n.sample), chunk_len});
          chunk.clear();
          chunk_len = 0;
        };
        for (Segment s : n.segments) {
          while (s.count > 0) {
            const int take = std::min(s.count, kCrossbarDim - chunk_len);
            chunk.push_back({s.src, s.offset, take});
            chunk_len += take;
            s.count -= take;
            if (s.src >= 0) s.offset += take;
            if (chunk_len == kCrossbarDim) flush();
          }
        }
        flush();
        return t;
      }
      case NodeKind::kConcat: {
        Tensor t;
        for (int in : n.inputs) t.insert(t.end(), tensors_[in].begin(), tensors_[in].end());
        return t;
      }
      case NodeKind::kOutput: {
        const int core = home(n.layer);
        const int v = piece(tensors_[n.inputs[0]], 0, n.len, core, n.layer, n.sample);
        PNode s;
        s.kind = PKind::kStore;
        s.io = IoKind::kLogits;
        s.inputs = {v};
        s.len = n.len;
        s.core = core;
        s.layer = n.layer;
        s.sample = n.sample;
        emit(std::move(s));
        return {};
      }
    }
    return {};
  }

  const Graph& g_;
  PGraph& out_;
  std::vector<Tensor> tensors_;
  std::map<std::pair<int, int>, int> transfers_;
};

}  // namespace

int Placement::cores_used() const {
  int c = 0;
  for (const auto& s : shards) c = std::max(c, s.core + 1);
  return c;
}

int Placement::row_blocks(int layer) const {
  int n = 0;
  for (int sid : layer_shards[layer]) n = std::max(n, shards[sid].bi + 1);
  return n;
}

int Placement::col_blocks(int layer) const {
  int n = 0;
  for (int sid : layer_shards[layer]) n = std::max(n, shards[sid].bj + 1);
  return n;
}

const Shard& Placement::shard(int layer, int bi, int bj) const {
  return shards[layer_shards[layer][bi * col_blocks(layer) + bj]];
}

Placement place(const ModelSpec& model, const Topology& topo) {
  if (topo.tiles < 1 || topo.cores_per_tile < 1 || topo.mcus_per_core < 1 ||
      topo.mcus_per_core > kMaxMcusPerCore)
    throw ConfigError("topology sizes must be positive with at most 6 MCUs per core");
  Placement p;
  p.topo = topo;
  int next = 0;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const int rows = model.layers[l].weight_rows(), cols = model.layers[l].weight_cols();
    std::vector<int> ids;
    for (int bi = 0; bi < blocks(rows); ++bi) {
      for (int bj = 0; bj < blocks(cols); ++bj) {
        Shard s;
        s.layer = static_cast<int>(l);
        s.bi = bi;
        s.bj = bj;
        s.row0 = bi * kCrossbarDim;
        s.col0 = bj * kCrossbarDim;
        s.rows = std::min(kCrossbarDim, rows - s.row0);
        s.cols = std::min(kCrossbarDim, cols - s.col0);
        s.core = next / topo.mcus_per_core;
        s.mcu = next % topo.mcus_per_core;
        ++next;
        ids.push_back(static_cast<int>(p.shards.size()));
        p.shards.push_back(s);
      }
    }
    p.home_core.push_back(p.shards[ids.front()].core);
    p.layer_shards.push_back(std::move(ids));
  }
  if (next > topo.capacity())
    throw CapacityError("model needs " + std::to_string(next) + " MCUs, the node has " +
                        std::to_string(topo.capacity()));
  return p;
}

int64_t IoMap::words_on(int tile) const {
  int64_t w = 0;
  if (tile == input_tile) w = static_cast<int64_t>(batch) * input_len;
  if (tile == output_tile) w = std::max<int64_t>(w, logits_base + static_cast<int64_t>(batch) * classes);
  return w;
}

int PGraph::count(PKind k) const {
  int c = 0;
  for (const auto& n : nodes) c += n.kind == k;
  return c;
}

PGraph partition(const Graph& g, const Topology& topo) {
  PGraph out;
  out.model = g.model;
  out.batch = g.batch;
  out.placement = place(g.model, topo);
  IoMap& io = out.io;
  io.batch = g.batch;
  io.input_len = g.model.input_len();
  io.classes = g.model.output_len();
  io.input_tile = topo.tile_of(out.placement.home_core.front());
  io.output_tile = topo.tile_of(out.placement.home_core.back());
  io.input_base = 0;
  io.label_base = io.output_tile == io.input_tile ? static_cast<uint32_t>(g.batch * io.input_len) : 0;
  io.logits_base = io.label_base + static_cast<uint32_t>(g.batch * io.classes);
  Partitioner(g, out).run();
  return out;
}

}  // namespace panther
