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

// First-fit allocator over [base, base + size) with coalescing.
class RangeAllocator {
 public:
  RangeAllocator(int64_t base, int64_t size) { free_[base] = size; }

  int64_t take(int64_t len) {
    for (auto it = free_.begin(); it != free_.end(); ++it) {
      if (it->second < len) continue;
      const int64_t at = it->first, left = it->second - len;
      free_.erase(it);
      if (left > 0) free_[at + len] = left;
      high_ = std::max(high_, at + len);
      return at;
    }
    return -1;
  }

  void give(int64_t at, int64_t len) {
    auto next = free_.lower_bound(at);
    if (next != free_.end() && next->first == at + len) {
      len += next->second;
      next = free_.erase(next);
    }
    if (next != free_.begin()) {
      auto prev = std::prev(next);
      if (prev->first + prev->second == at) {
        prev->second += len;
        return;
      }
    }
    free_[at] = len;
  }

  int64_t high_water() const { return high_; }

 private:
  std::map<int64_t, int64_t> free_;
  int64_t high_ = 0;
};

struct Item {
  bool bundle = false;
  std::vector<int> nodes;
};

struct ValueState {
  int reg = -1;
  int64_t slot = -1;  // spill slot, relative to the core's spill base
  std::vector<int> uses;
  size_t next = 0;  // index into uses of the next use
};

class CoreLowering {
 public:
  CoreLowering(const PGraph& g, const CompileOptions& opt, int core, const std::vector<int>& buffer_peer_core,
               CompileStats& stats)
      : g_(g),
        opt_(opt),
        core_(core),
        peer_(buffer_peer_core),
        stats_(stats),
        regs_(kGeneralRegisterBase, opt.registers - kReloadScratch),
        spill_(0, int64_t{1} << 40) {}

  CoreProgram run(const std::vector<Item>& items) {
    // Uses per value, by item position.
    for (size_t pos = 0; pos < items.size(); ++pos)
      for (int id : items[pos].nodes)
        for (int v : operands(id)) {
          auto& u = values_[v].uses;
          if (u.empty() || u.back() != static_cast<int>(pos)) u.push_back(static_cast<int>(pos));
        }
    for (size_t pos = 0; pos < items.size(); ++pos) {
      pos_ = static_cast<int>(pos);
      pinned_.clear();
      scratch_next_ = 0;
      for (int id : items[pos].nodes)
        for (int v : operands(id)) pinned_.push_back(v);
      if (items[pos].bundle)
        emit_bundle(items[pos].nodes);
      else
        emit_node(items[pos].nodes.front());
      release_dead();
    }
    CoreProgram cp;
    cp.tile = g_.placement.topo.tile_of(core_);
    out_.push_back(Instruction::halt());
    cp.code = std::move(out_);
    return cp;
  }

  int64_t spill_words() const { return spill_.high_water(); }
  const std::vector<size_t>& spill_refs() const { return spill_refs_; }

 private:
  std::vector<int> operands(int id) const {
    const PNode& n = g_.nodes[id];
    if (n.kind == PKind::kRecv || n.kind == PKind::kLoad) return {};
    return n.inputs;
  }

  void push(Instruction i, int layer) {
    i.layer = layer >= 0 ? layer + 1 : -1;
    out_.push_back(i);
  }
  void push_spill(Instruction i, int layer) {
    spill_refs_.push_back(out_.size());
    push(i, layer);
  }

  int alloc(int v, int len) {
    pinned_.push_back(v);
    for (;;) {
      const int64_t at = regs_.take(len);
      if (at >= 0) {
        values_[v].reg = static_cast<int>(at);
        return static_cast<int>(at);
      }
      evict();
    }
  }

  // First use at or after position `from`.
  static int next_use(ValueState& s, int from) {
    while (s.next < s.uses.size() && s.uses[s.next] < from) ++s.next;
    return s.next < s.uses.size() ? s.uses[s.next] : INT32_MAX;
  }

  void evict() {
    int victim = -1, far = -1;
    for (auto& [v, s] : values_) {
      if (s.reg < 0 || std::find(pinned_.begin(), pinned_.end(), v) != pinned_.end()) continue;
      const int nu = next_use(s, pos_);
      if (nu > far || (nu == far && v > victim)) {
        far = nu;
        victim = v;
      }
    }
    if (victim < 0) throw SpillOverflowError("register file too small for one instruction's operands");
    ValueState& s = values_[victim];
    const int len = g_.nodes[victim].len;
    if (s.slot < 0) {
      s.slot = spill_.take(len);
      push_spill(Instruction::store(static_cast<uint32_t>(s.slot), s.reg, len), g_.nodes[victim].layer);
      ++stats_.spills;
    }
    regs_.give(s.reg, len);
    s.reg = -1;
  }

  // Register holding value v for reading in this item.
  int operand(int v, int layer) {
    ValueState& s = values_.at(v);
    if (s.reg >= 0) return s.reg;
    const int r = kGeneralRegisterBase + opt_.registers - kReloadScratch + kBankSize * scratch_next_++;
    push_spill(Instruction::load(r, static_cast<uint32_t>(s.slot), g_.nodes[v].len), layer);
    ++stats_.reloads;
    return r;
  }

  // Copies value v into registers [dst, dst + count) starting at element off.
  void move_into(int dst, int v, int off, int count, int layer) {
    ValueState& s = values_.at(v);
    if (s.reg >= 0)
      push(Instruction::copy(dst, s.reg + off, count), layer);
    else
      push_spill(Instruction::load(dst, static_cast<uint32_t>(s.slot + off), count), layer);
  }

  void release_dead() {
    for (auto it = values_.begin(); it != values_.end();) {
      ValueState& s = it->second;
      if (next_use(s, pos_ + 1) != INT32_MAX) {
        ++it;
        continue;
      }
      const int len = g_.nodes[it->first].len;
      if (s.reg >= 0) regs_.give(s.reg, len);
      if (s.slot >= 0) spill_.give(s.slot, len);
      it = values_.erase(it);
    }
  }

  void emit_node(int id) {
    const PNode& n = g_.nodes[id];
    const IoMap& io = g_.io;
    const Topology& topo = g_.placement.topo;
    switch (n.kind) {
      case PKind::kLoad: {
        const uint32_t base = n.io == IoKind::kInput ? io.input_addr(n.sample) : io.label_addr(n.sample);
        const int dst = alloc(id, n.len);
        push(Instruction::load(dst, base + static_cast<uint32_t>(n.io_offset), n.len), n.layer);
        break;
      }
      case PKind::kStore:
        push(Instruction::store(io.logits_addr(n.sample), operand(n.inputs[0], n.layer), n.len), n.layer);
        break;
      case PKind::kAlu: {
        const int a = operand(n.inputs[0], n.layer);
        const int b = n.inputs.size() > 1 ? operand(n.inputs[1], n.layer) : 0;
        const int dst = alloc(id, n.len);
        push(Instruction::alu_op(n.alu, dst, a, b, n.len), n.layer);
        break;
      }
      case PKind::kGather: {
        const int dst = alloc(id, n.len);
        int off = 0;
        for (const auto& seg : n.segments) {
          if (seg.src < 0)
            push(Instruction::set(dst + off, 0, seg.count), n.layer);
          else
            move_into(dst + off, n.inputs[seg.src], seg.offset, seg.count, n.layer);
          off += seg.count;
        }
        break;
      }
      case PKind::kSend:
        push(Instruction::send(topo.tile_of(peer_[n.buffer]), n.buffer, operand(n.inputs[0], n.layer), n.len),
             n.layer);
        break;
      case PKind::kRecv: {
        const int dst = alloc(id, n.len);
        push(Instruction::recv(topo.tile_of(g_.nodes[n.inputs[0]].core), n.buffer, dst, n.len), n.layer);
        break;
      }
      default:
        throw Error("MCU operation outside a bundle");
    }
  }

  void emit_bundle(std::vector<int> ops) {
    std::sort(ops.begin(), ops.end(), [&](int a, int b) {
      return g_.placement.shards[g_.nodes[a].shard].mcu < g_.placement.shards[g_.nodes[b].shard].mcu;
    });
    std::array<OpMask, kMaxMcusPerCore> masks{};
    for (int id : ops) {
      const PNode& n = g_.nodes[id];
      const Shard& sh = g_.placement.shards[n.shard];
      const int in_len = g_.nodes[n.inputs[0]].len;
      switch (n.kind) {
        case PKind::kMvm:
          move_into(bank_register(sh.mcu, McuBank::kMvmIn), n.inputs[0], 0, in_len, n.layer);
          masks[sh.mcu].mvm = true;
          break;
        case PKind::kMtvm:
          move_into(bank_register(sh.mcu, McuBank::kMtvmIn), n.inputs[0], 0, in_len, n.layer);
          masks[sh.mcu].mtvm = true;
          break;
        default:
          move_into(bank_register(sh.mcu, McuBank::kOpaRow), n.inputs[0], 0, in_len, n.layer);
          move_into(bank_register(sh.mcu, McuBank::kOpaCol), n.inputs[1], 0, g_.nodes[n.inputs[1]].len, n.layer);
          masks[sh.mcu].opa = true;
          break;
      }
    }
    push(Instruction::mcu(masks), g_.nodes[ops.front()].layer);
    for (int id : ops) {
      const PNode& n = g_.nodes[id];
      if (n.kind == PKind::kOpa) continue;
      const Shard& sh = g_.placement.shards[n.shard];
      const int dst = alloc(id, n.len);
      const McuBank bank = n.kind == PKind::kMvm ? McuBank::kMvmOut : McuBank::kMtvmOut;
      push(Instruction::copy(dst, bank_register(sh.mcu, bank), n.len), n.layer);
    }
  }

  const PGraph& g_;
  const CompileOptions& opt_;
  int core_;
  const std::vector<int>& peer_;
  CompileStats& stats_;
  RangeAllocator regs_;
  RangeAllocator spill_;
  std::map<int, ValueState> values_;
  std::vector<int> pinned_;
  std::vector<Instruction> out_;
  std::vector<size_t> spill_refs_;
  int pos_ = 0;
  int scratch_next_ = 0;
};

}  // namespace

Compiled lower(PGraph g, Schedule s, const CompileOptions& opt) {
  if (opt.registers < kReloadScratch + kBankSize || kGeneralRegisterBase + opt.registers > kRegisterLimit)
    throw ConfigError("registers per core must be in [" + std::to_string(kReloadScratch + kBankSize) + ", " +
                      std::to_string(kRegisterLimit - kGeneralRegisterBase) + "]");
  Compiled c;
  c.options = opt;
  const Topology& topo = g.placement.topo;
  const int cores = g.placement.cores_used();
  const int n = static_cast<int>(g.nodes.size());

  // Phase order per core: bundle t, then the non-MCU nodes of level t.
  std::vector<std::vector<std::vector<int>>> bundles(cores, std::vector<std::vector<int>>(s.steps));
  std::vector<std::vector<std::vector<int>>> levels(cores, std::vector<std::vector<int>>(s.steps + 1));
  std::vector<int> peer(g.buffers, 0);
  for (int id = 0; id < n; ++id) {
    const PNode& p = g.nodes[id];
    if (is_mcu_kind(p.kind))
      bundles[p.core][s.step[id]].push_back(id);
    else
      levels[p.core][s.level[id] + 1].push_back(id);
    // A send names the receiver's tile and a recv the sender's.
    if (p.kind == PKind::kRecv) peer[p.buffer] = p.core;
  }

  c.program.mcus_per_core = topo.mcus_per_core;
  c.stats.spill_words.assign(cores, 0);
  std::vector<std::vector<size_t>> refs(cores);
  for (int core = 0; core < cores; ++core) {
    std::vector<Item> items;
    for (int t = -1; t < s.steps; ++t) {
      if (t >= 0 && !bundles[core][t].empty()) items.push_back({true, bundles[core][t]});
      for (int id : levels[core][t + 1]) items.push_back({false, {id}});
    }
    CoreLowering cl(g, opt, core, peer, c.stats);
    c.program.cores.push_back(cl.run(items));
    c.stats.spill_words[core] = cl.spill_words();
    refs[core] = cl.spill_refs();
  }

  // Shared memory per tile: I/O region, then each core's spill region; the
  // pending-update queue of deferred OPAs must fit beside them.
  std::map<int, int64_t> used;
  std::map<int, int64_t> pending;
  if (opt.variant != McuVariant::kV3) {
    std::vector<int> seen(g.placement.shards.size(), 0);
    for (const auto& p : g.nodes)
      if (p.kind == PKind::kOpa && seen[p.shard]++ > 0) {
        const Shard& sh = g.placement.shards[p.shard];
        pending[topo.tile_of(sh.core)] += sh.rows + sh.cols;
        c.stats.pending_words += sh.rows + sh.cols;
      }
  }
  for (int core = 0; core < cores; ++core) {
    const int tile = topo.tile_of(core);
    if (!used.count(tile)) used[tile] = g.io.words_on(tile);
    const int64_t base = used[tile];
    for (size_t at : refs[core]) c.program.cores[core].code[at].addr += static_cast<uint32_t>(base);
    used[tile] += c.stats.spill_words[core];
  }
  for (const auto& [tile, words] : used) {
    const int64_t need = words + (pending.count(tile) ? pending[tile] : 0);
    if (need > topo.memory_words)
      throw SpillOverflowError("tile " + std::to_string(tile) + " needs " + std::to_string(need) +
                               " words of shared memory, has " + std::to_string(topo.memory_words));
  }

  for (const auto& sh : g.placement.shards)
    c.mcus.push_back({sh.core, sh.mcu, static_cast<int>(&sh - g.placement.shards.data()), sh.layer});
  c.crs_program = c.program;
  for (auto& core : c.crs_program.cores) core.code.insert(core.code.end() - 1, Instruction::crs());
  validate(c.program);
  link_check(c.program);
  c.graph = std::move(g);
  c.schedule = std::move(s);
  return c;
}

Compiled compile(const ModelSpec& model, const CompileOptions& opt) {
  PGraph g = partition(build_graph(model, opt.batch), opt.topo);
  Schedule s = fuse(g, {opt.variant, opt.fusion});
  return lower(std::move(g), std::move(s), opt);
}

}  // namespace panther
