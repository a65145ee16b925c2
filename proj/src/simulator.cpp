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

#include "panther/simulator.hpp"

#include <algorithm>
#include <sstream>

#include "panther/errors.hpp"

namespace panther {

EnergySplit RunReport::total() const {
  EnergySplit t;
  for (const auto& [l, e] : layer_energy) t += e;
  return t;
}

RunReport& RunReport::operator+=(const RunReport& o) {
  for (const auto& [l, e] : o.layer_energy) layer_energy[l] += e;
  for (const auto& [l, c] : o.layer_cycles) layer_cycles[l] += c;
  cycles += o.cycles;
  mcu_timesteps += o.mcu_timesteps;
  instructions += o.instructions;
  spill_words = std::max(spill_words, o.spill_words);
  peak_pending_words = std::max(peak_pending_words, o.peak_pending_words);
  saturation_events += o.saturation_events;
  runs += o.runs;
  return *this;
}

RunReport RunReport::scaled(int64_t k) const {
  RunReport r = *this;
  for (auto& [l, e] : r.layer_energy) e = e.scaled(k);
  for (auto& [l, c] : r.layer_cycles) c *= k;
  r.cycles *= k;
  r.mcu_timesteps = static_cast<int>(r.mcu_timesteps * k);
  r.instructions *= k;
  r.saturation_events *= static_cast<uint64_t>(k);
  r.runs = static_cast<int>(r.runs * k);
  return r;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& [l, e] : layer_energy) {
    nlohmann::json j = e.to_json();
    j["cycles"] = layer_cycles.count(l) ? layer_cycles.at(l) : 0;
    layers[std::to_string(l)] = j;
  }
  return {{"layers", layers},
          {"total", total().to_json()},
          {"cycles", cycles},
          {"seconds", seconds()},
          {"mcu_timesteps", mcu_timesteps},
          {"instructions", instructions},
          {"spill_words", spill_words},
          {"peak_pending_words", peak_pending_words},
          {"peak_memory_words", peak_memory_words()},
          {"saturation_events", saturation_events},
          {"runs", runs}};
}

std::string RunReport::to_csv() const {
  std::ostringstream os;
  os << "layer,component,energy_pj\n";
  auto rows = [&](const std::string& layer, const EnergySplit& e) {
    const nlohmann::json j = e.to_json();
    for (const char* k : {"mvm_pj", "mtvm_pj", "opa_pj", "serial_rw_pj", "crs_pj", "vfu_pj", "memory_pj",
                          "network_pj", "total_pj"}) {
      std::string name = k;
      name.resize(name.size() - 3);
      os << layer << ',' << name << ',' << j[k].get<int64_t>() << '\n';
    }
  };
  for (const auto& [l, e] : layer_energy) rows(std::to_string(l), e);
  rows("all", total());
  return os.str();
}

Machine::Machine(const Compiled& compiled, const std::vector<SlicedMatrix>& shards, SimOptions opt)
    : compiled_(compiled), opt_(std::move(opt)) {
  const int cores = static_cast<int>(compiled.program.cores.size());
  if (shards.size() != compiled.mcus.size()) throw ShapeError("one weight shard per MCU expected");
  mcus_.resize(cores);
  for (auto& m : mcus_) m.resize(compiled.program.mcus_per_core);
  for (const auto& b : compiled.mcus) {
    McuParams p;
    p.variant = opt_.variant;
    p.baseline = opt_.baseline;
    p.adc_bits = opt_.adc_bits;
    p.lr_shift = opt_.lr_shift;
    p.layer = b.layer;
    mcus_[b.core][b.mcu] = std::make_unique<McuInstance>(p, shards[b.shard]);
  }
  regs_.assign(cores, std::vector<int16_t>(kRegisterLimit, 0));
  reg_tags_.assign(cores, std::vector<int32_t>(kRegisterLimit, -1));
}

Machine::Tile& Machine::tile(int t) {
  auto it = tiles_.find(t);
  if (it == tiles_.end()) {
    const auto words = static_cast<size_t>(compiled_.options.topo.memory_words);
    it = tiles_.emplace(t, Tile{std::vector<int16_t>(words, 0), std::vector<int32_t>(words, -1)}).first;
  }
  return it->second;
}

const Machine::Tile& Machine::tile(int t) const { return const_cast<Machine*>(this)->tile(t); }

void Machine::check_mem(int t, uint32_t addr, int len) const {
  if (static_cast<int64_t>(addr) + len > compiled_.options.topo.memory_words)
    throw MemoryError("shared memory access out of bounds on tile " + std::to_string(t) + " at " +
                      std::to_string(addr));
}

void Machine::write_memory(int t, uint32_t addr, std::span<const int16_t> data) {
  check_mem(t, addr, static_cast<int>(data.size()));
  Tile& m = tile(t);
  std::copy(data.begin(), data.end(), m.data.begin() + addr);
  std::fill(m.tags.begin() + addr, m.tags.begin() + addr + static_cast<int64_t>(data.size()), -1);
}

DataVector Machine::read_memory(int t, uint32_t addr, int len) const {
  check_mem(t, addr, len);
  const Tile& m = tile(t);
  return DataVector(m.data.begin() + addr, m.data.begin() + addr + len);
}

void Machine::load_batch(const std::vector<DataVector>& inputs, const std::vector<int>& labels) {
  const IoMap& io = compiled_.graph.io;
  if (static_cast<int>(inputs.size()) != io.batch || static_cast<int>(labels.size()) != io.batch)
    throw ShapeError("batch size does not match the compiled program");
  for (int k = 0; k < io.batch; ++k) {
    if (static_cast<int>(inputs[k].size()) != io.input_len) throw ShapeError("input length mismatch");
    write_memory(io.input_tile, io.input_addr(k), inputs[k]);
    write_memory(io.output_tile, io.label_addr(k), one_hot(labels[k], io.classes));
  }
}

std::vector<DataVector> Machine::read_logits() const {
  const IoMap& io = compiled_.graph.io;
  std::vector<DataVector> out;
  for (int k = 0; k < io.batch; ++k) out.push_back(read_memory(io.output_tile, io.logits_addr(k), io.classes));
  return out;
}

std::vector<SlicedMatrix> Machine::shard_state() const {
  std::vector<SlicedMatrix> out;
  for (const auto& b : compiled_.mcus) out.push_back(mcus_[b.core][b.mcu]->copy(0));
  return out;
}

void Machine::write_regs(int core, int r, std::span<const int16_t> v, int tag) {
  std::copy(v.begin(), v.end(), regs_[core].begin() + r);
  std::fill(reg_tags_[core].begin() + r, reg_tags_[core].begin() + r + static_cast<int64_t>(v.size()), tag);
  // Writes into an MCU bank mark it as holding a fresh operand.
  if (r < kGeneralRegisterBase) {
    const int k = r / kMcuRegisterSpan;
    const int bank = (r % kMcuRegisterSpan) / kBankSize;
    if (k < static_cast<int>(mcus_[core].size()) && mcus_[core][k]) {
      McuInstance& m = *mcus_[core][k];
      std::copy(v.begin(), v.end(), m.bank(static_cast<McuBank>(bank)).begin() + (r % kBankSize));
      m.mark_written(static_cast<McuBank>(bank));
    }
  }
}

int Machine::read_tag(int core, int r, int len) const {
  return *std::max_element(reg_tags_[core].begin() + r, reg_tags_[core].begin() + r + len);
}

RunReport Machine::run(const Program& p) {
  validate(p);
  const int ncores = static_cast<int>(p.cores.size());
  if (ncores != static_cast<int>(regs_.size())) throw ShapeError("program does not match the machine");
  const CostModel& cost = opt_.cost;
  RunReport rep;
  rep.runs = 1;
  rep.spill_words = 0;
  for (int64_t w : compiled_.stats.spill_words) rep.spill_words += w;

  for (auto& r : regs_) std::fill(r.begin(), r.end(), 0);
  for (auto& t : reg_tags_) std::fill(t.begin(), t.end(), -1);
  for (auto& [id, t] : tiles_) std::fill(t.tags.begin(), t.tags.end(), -1);

  struct CoreState {
    size_t pc = 0;
    int64_t time = 0;
    bool halted = false;
    int last_step = -1;
  };
  std::vector<CoreState> cs(ncores);
  std::map<int, Message> inbox;
  int64_t pending = 0;
  int max_step = -1;

  auto charge = [&](int layer_tag, const Charge& c) {
    rep.layer_energy[std::max(layer_tag, 0)] += c.energy;
  };

  for (;;) {
    int pick = -1;
    int64_t best = 0;
    bool any_live = false;
    for (int c = 0; c < ncores; ++c) {
      if (cs[c].halted) continue;
      any_live = true;
      const Instruction& ins = p.cores[c].code[cs[c].pc];
      int64_t t = cs[c].time;
      if (ins.op == Opcode::kRecv) {
        auto it = inbox.find(ins.buffer);
        if (it == inbox.end()) continue;
        t = std::max(t, it->second.arrival);
      }
      if (pick < 0 || t < best) {
        pick = c;
        best = t;
      }
    }
    if (!any_live) break;
    if (pick < 0) throw DeadlockError("every live core is blocked on recv");
    if (++rep.instructions > opt_.max_instructions) throw Error("instruction limit exceeded");

    CoreState& st = cs[pick];
    const Instruction& ins = p.cores[pick].code[st.pc];
    const int tag = ins.layer;
    auto& regs = regs_[pick];
    int64_t latency = 1;
    size_t next = st.pc + 1;
    auto range = [&](int r, int len) { return std::span<const int16_t>(regs.data() + r, static_cast<size_t>(len)); };

    switch (ins.op) {
      case Opcode::kMcu: {
        int in_tag = -1;
        for (int k = 0; k < kMaxMcusPerCore; ++k) {
          const OpMask m = ins.masks[k];
          if (m.empty()) continue;
          const int base = k * kMcuRegisterSpan;
          if (m.mvm) in_tag = std::max(in_tag, read_tag(pick, base + static_cast<int>(McuBank::kMvmIn) * kBankSize, kBankSize));
          if (m.mtvm) in_tag = std::max(in_tag, read_tag(pick, base + static_cast<int>(McuBank::kMtvmIn) * kBankSize, kBankSize));
          if (m.opa) {
            in_tag = std::max(in_tag, read_tag(pick, base + static_cast<int>(McuBank::kOpaRow) * kBankSize, kBankSize));
            in_tag = std::max(in_tag, read_tag(pick, base + static_cast<int>(McuBank::kOpaCol) * kBankSize, kBankSize));
          }
        }
        const int step = std::max(st.last_step + 1, in_tag + 1);
        st.last_step = step;
        max_step = std::max(max_step, step);
        latency = 0;
        for (int k = 0; k < kMaxMcusPerCore; ++k) {
          const OpMask m = ins.masks[k];
          if (m.empty()) continue;
          if (!mcus_[pick][k]) throw ValidationError("mcu instruction targets an unplaced MCU");
          McuInstance& mcu = *mcus_[pick][k];
          const int64_t before = mcu.pending_words();
          const McuResult r = mcu.execute_mask(m, cost);
          pending += mcu.pending_words() - before;
          rep.saturation_events += r.saturation_events;
          charge(mcu.params().layer + 1, r.charge);
          rep.layer_cycles[mcu.params().layer + 1] += r.charge.cycles;
          latency = std::max(latency, r.charge.cycles);
          const int base = k * kMcuRegisterSpan;
          if (m.mvm) {
            const auto& b = mcu.bank(McuBank::kMvmOut);
            std::copy(b.begin(), b.end(), regs.begin() + base + static_cast<int>(McuBank::kMvmOut) * kBankSize);
            std::fill_n(reg_tags_[pick].begin() + base + static_cast<int>(McuBank::kMvmOut) * kBankSize, kBankSize, step);
          }
          if (m.mtvm) {
            const auto& b = mcu.bank(McuBank::kMtvmOut);
            std::copy(b.begin(), b.end(), regs.begin() + base + static_cast<int>(McuBank::kMtvmOut) * kBankSize);
            std::fill_n(reg_tags_[pick].begin() + base + static_cast<int>(McuBank::kMtvmOut) * kBankSize, kBankSize, step);
          }
        }
        rep.peak_pending_words = std::max(rep.peak_pending_words, pending);
        latency = std::max<int64_t>(latency, 1);
        break;
      }
      case Opcode::kAlu: {
        const DataVector a(range(ins.src1, ins.len).begin(), range(ins.src1, ins.len).end());
        DataVector b;
        int t = read_tag(pick, ins.src1, ins.len);
        if (!alu_is_unary(ins.alu)) {
          b.assign(range(ins.src2, ins.len).begin(), range(ins.src2, ins.len).end());
          t = std::max(t, read_tag(pick, ins.src2, ins.len));
        }
        DataVector out(static_cast<size_t>(ins.len));
        alu_apply(ins.alu, a, b, out);
        write_regs(pick, ins.dst, out, t);
        const Charge c = cost.vfu(ins.len);
        charge(tag, c);
        latency = c.cycles;
        break;
      }
      case Opcode::kLoad: {
        const int tl = p.cores[pick].tile;
        check_mem(tl, ins.addr, ins.len);
        Tile& m = tile(tl);
        const DataVector v(m.data.begin() + ins.addr, m.data.begin() + ins.addr + ins.len);
        const int t = *std::max_element(m.tags.begin() + ins.addr, m.tags.begin() + ins.addr + ins.len);
        write_regs(pick, ins.dst, v, t);
        const Charge c = cost.memory(ins.len);
        charge(tag, c);
        latency = c.cycles;
        break;
      }
      case Opcode::kStore: {
        const int tl = p.cores[pick].tile;
        check_mem(tl, ins.addr, ins.len);
        Tile& m = tile(tl);
        std::copy_n(regs.begin() + ins.dst, ins.len, m.data.begin() + ins.addr);
        std::fill_n(m.tags.begin() + ins.addr, ins.len, read_tag(pick, ins.dst, ins.len));
        const Charge c = cost.memory(ins.len);
        charge(tag, c);
        latency = c.cycles;
        break;
      }
      case Opcode::kSet: {
        const DataVector v(static_cast<size_t>(ins.len), static_cast<int16_t>(ins.imm));
        write_regs(pick, ins.dst, v, -1);
        const Charge c = cost.reg_move(ins.len);
        charge(tag, c);
        latency = c.cycles;
        break;
      }
      case Opcode::kCopy: {
        const DataVector v(range(ins.src1, ins.len).begin(), range(ins.src1, ins.len).end());
        write_regs(pick, ins.dst, v, read_tag(pick, ins.src1, ins.len));
        const Charge c = cost.reg_move(ins.len);
        charge(tag, c);
        latency = c.cycles;
        break;
      }
      case Opcode::kSend: {
        if (inbox.count(ins.buffer)) throw ValidationError("buffer " + std::to_string(ins.buffer) + " sent twice");
        const Charge c = cost.network(ins.len, ins.tile == p.cores[pick].tile);
        charge(tag, c);
        const int64_t serial = (ins.len + cost.network_words_per_cycle - 1) / cost.network_words_per_cycle;
        Message msg;
        msg.arrival = st.time + c.cycles;
        msg.data.assign(range(ins.dst, ins.len).begin(), range(ins.dst, ins.len).end());
        msg.tag = read_tag(pick, ins.dst, ins.len);
        inbox.emplace(ins.buffer, std::move(msg));
        latency = std::max<int64_t>(serial, 1);
        break;
      }
      case Opcode::kRecv: {
        Message msg = std::move(inbox.at(ins.buffer));
        inbox.erase(ins.buffer);
        if (static_cast<int>(msg.data.size()) != ins.len) throw ValidationError("recv length differs from send");
        st.time = std::max(st.time, msg.arrival);
        write_regs(pick, ins.dst, msg.data, msg.tag);
        break;
      }
      case Opcode::kJmp:
        next = static_cast<size_t>(ins.target);
        break;
      case Opcode::kBeq:
        if (regs[ins.dst] == regs[ins.src1]) next = static_cast<size_t>(ins.target);
        break;
      case Opcode::kCrs:
      case Opcode::kHalt: {
        int64_t longest = 0;
        for (auto& m : mcus_[pick]) {
          if (!m) continue;
          const int64_t before = m->pending_words();
          const McuResult r = ins.op == Opcode::kCrs ? m->carry_resolve(cost) : m->halt_commit(cost);
          pending -= before - m->pending_words();
          rep.saturation_events += r.saturation_events;
          charge(m->params().layer + 1, r.charge);
          rep.layer_cycles[m->params().layer + 1] += r.charge.cycles;
          longest = std::max(longest, r.charge.cycles);
        }
        latency = std::max<int64_t>(longest, 1);
        if (ins.op == Opcode::kHalt) st.halted = true;
        break;
      }
    }
    if (ins.op != Opcode::kMcu && ins.op != Opcode::kCrs && ins.op != Opcode::kHalt)
      rep.layer_cycles[std::max(tag, 0)] += latency;
    st.time += latency;
    if (!st.halted) {
      if (next >= p.cores[pick].code.size()) throw ValidationError("fell off the end of a core's program");
      st.pc = next;
    }
  }
  for (const auto& c : cs) rep.cycles = std::max(rep.cycles, c.time);
  rep.mcu_timesteps = max_step + 1;
  if (!inbox.empty()) throw ValidationError("messages left undelivered at halt");
  return rep;
}

}  // namespace panther
