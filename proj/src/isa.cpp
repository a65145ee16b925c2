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

#include "panther/isa.hpp"

#include <array>
#include <charconv>
#include <map>
#include <sstream>

#include "panther/errors.hpp"

namespace panther {
namespace {

constexpr std::array<std::string_view, 12> kOpNames = {"mcu",  "alu",  "load", "store", "set", "copy",
                                                       "send", "recv", "jmp",  "beq",   "crs", "halt"};

constexpr uint32_t kMagic = 0x52544e50;  // "PNTR"
constexpr uint32_t kVersion = 1;

uint64_t field(uint64_t v, int lo, int width) { return (v & ((uint64_t{1} << width) - 1)) << lo; }
uint64_t extract(uint64_t w, int lo, int width) { return (w >> lo) & ((uint64_t{1} << width) - 1); }

// Minimal positioned scanner over one line.
class Cursor {
 public:
  Cursor(std::string_view s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_, static_cast<int>(pos_) + 1, what);
  }
  std::string_view word() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '.'))
      ++pos_;
    if (start == pos_) fail("expected a word");
    return s_.substr(start, pos_ - start);
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  int64_t number() {
    skip_ws();
    int64_t v = 0;
    const char* first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("expected a number");
    pos_ += static_cast<size_t>(ptr - first);
    return v;
  }
  int64_t bounded(int64_t lo, int64_t hi, const char* what) {
    skip_ws();
    const size_t at = pos_;
    const int64_t v = number();
    if (v < lo || v > hi) {
      pos_ = at;
      fail(std::string(what) + " out of range");
    }
    return v;
  }
  int64_t prefixed(char prefix, int64_t lo, int64_t hi, const char* what) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != prefix) fail(std::string("expected '") + prefix + "'");
    ++pos_;
    return bounded(lo, hi, what);
  }
  int reg() { return static_cast<int>(prefixed('r', 0, kRegisterLimit - 1, "register")); }
  int len() { return static_cast<int>(bounded(1, kMaxLen, "length")); }

 private:
  std::string_view s_;
  int line_;
  size_t pos_ = 0;
};

Instruction parse_instruction(Cursor& c) {
  const std::string_view name = c.word();
  Instruction ins;
  if (name == "mcu") {
    std::array<OpMask, kMaxMcusPerCore> masks{};
    std::array<bool, kMaxMcusPerCore> seen{};
    while (!c.at_end()) {
      const int k = static_cast<int>(c.prefixed('m', 0, kMaxMcusPerCore - 1, "mcu index"));
      if (seen[k]) c.fail("duplicate mask for m" + std::to_string(k));
      seen[k] = true;
      c.expect('=');
      const std::string_view bits = c.word();
      if (bits.size() != 3 || bits.find_first_not_of("01") != std::string_view::npos)
        c.fail("mask must be three binary digits");
      masks[k] = OpMask::parse(bits);
    }
    return Instruction::mcu(masks);
  }
  if (name == "alu") {
    const std::string_view opname = c.word();
    const auto op = parse_alu(opname);
    if (!op) c.fail("unknown alu op '" + std::string(opname) + "'");
    const int d = c.reg();
    c.expect(',');
    const int s1 = c.reg();
    c.expect(',');
    const int s2 = c.reg();
    c.expect(',');
    return Instruction::alu_op(*op, d, s1, s2, c.len());
  }
  if (name == "load") {
    const int d = c.reg();
    c.expect(',');
    const auto a = static_cast<uint32_t>(c.prefixed('@', 0, UINT32_MAX, "address"));
    c.expect(',');
    return Instruction::load(d, a, c.len());
  }
  if (name == "store") {
    const auto a = static_cast<uint32_t>(c.prefixed('@', 0, UINT32_MAX, "address"));
    c.expect(',');
    const int s = c.reg();
    c.expect(',');
    return Instruction::store(a, s, c.len());
  }
  if (name == "set") {
    const int d = c.reg();
    c.expect(',');
    const int imm = static_cast<int>(c.bounded(INT16_MIN, INT16_MAX, "immediate"));
    c.expect(',');
    return Instruction::set(d, imm, c.len());
  }
  if (name == "copy") {
    const int d = c.reg();
    c.expect(',');
    const int s = c.reg();
    c.expect(',');
    return Instruction::copy(d, s, c.len());
  }
  if (name == "send" || name == "recv") {
    const int t = static_cast<int>(c.prefixed('t', 0, kMaxTile, "tile"));
    c.expect(',');
    const int b = static_cast<int>(c.prefixed('b', 0, kMaxBuffer, "buffer"));
    c.expect(',');
    const int r = c.reg();
    c.expect(',');
    const int n = c.len();
    return name == "send" ? Instruction::send(t, b, r, n) : Instruction::recv(t, b, r, n);
  }
  if (name == "jmp") return Instruction::jmp(static_cast<int>(c.bounded(0, kMaxTarget, "target")));
  if (name == "beq") {
    const int a = c.reg();
    c.expect(',');
    const int b = c.reg();
    c.expect(',');
    return Instruction::beq(a, b, static_cast<int>(c.bounded(0, kMaxTarget, "target")));
  }
  if (name == "crs") return Instruction::crs();
  if (name == "halt") return Instruction::halt();
  c.fail("unknown mnemonic '" + std::string(name) + "'");
}

}  // namespace

std::string_view opcode_name(Opcode op) { return kOpNames.at(static_cast<size_t>(op)); }

Instruction Instruction::mcu(std::array<OpMask, kMaxMcusPerCore> masks) {
  Instruction i;
  i.op = Opcode::kMcu;
  i.masks = masks;
  return i;
}

Instruction Instruction::alu_op(AluOp op, int dst, int src1, int src2, int len) {
  Instruction i;
  i.op = Opcode::kAlu;
  i.alu = op;
  i.dst = dst;
  i.src1 = src1;
  i.src2 = src2;
  i.len = len;
  return i;
}

Instruction Instruction::load(int dst, uint32_t addr, int len) {
  Instruction i;
  i.op = Opcode::kLoad;
  i.dst = dst;
  i.addr = addr;
  i.len = len;
  return i;
}

Instruction Instruction::store(uint32_t addr, int src, int len) {
  Instruction i = load(src, addr, len);
  i.op = Opcode::kStore;
  return i;
}

Instruction Instruction::set(int dst, int imm, int len) {
  Instruction i;
  i.op = Opcode::kSet;
  i.dst = dst;
  i.imm = imm;
  i.len = len;
  return i;
}

Instruction Instruction::copy(int dst, int src, int len) {
  Instruction i;
  i.op = Opcode::kCopy;
  i.dst = dst;
  i.src1 = src;
  i.len = len;
  return i;
}

Instruction Instruction::send(int tile, int buffer, int src, int len) {
  Instruction i;
  i.op = Opcode::kSend;
  i.tile = tile;
  i.buffer = buffer;
  i.dst = src;
  i.len = len;
  return i;
}

Instruction Instruction::recv(int tile, int buffer, int dst, int len) {
  Instruction i = send(tile, buffer, dst, len);
  i.op = Opcode::kRecv;
  return i;
}

Instruction Instruction::jmp(int target) {
  Instruction i;
  i.op = Opcode::kJmp;
  i.target = target;
  return i;
}

Instruction Instruction::beq(int a, int b, int target) {
  Instruction i;
  i.op = Opcode::kBeq;
  i.dst = a;
  i.src1 = b;
  i.target = target;
  return i;
}

Instruction Instruction::crs() {
  Instruction i;
  i.op = Opcode::kCrs;
  return i;
}

Instruction Instruction::halt() { return Instruction{}; }

uint64_t encode(const Instruction& ins) {
  uint64_t w = field(static_cast<uint64_t>(ins.op), 0, 4) | field(static_cast<uint64_t>(ins.layer + 1), 57, 7);
  switch (ins.op) {
    case Opcode::kMcu:
      for (int k = 0; k < kMaxMcusPerCore; ++k) w |= field(ins.masks[k].bits(), 4 + 3 * k, 3);
      break;
    case Opcode::kAlu:
      w |= field(static_cast<uint64_t>(ins.alu), 4, 4) | field(ins.dst, 8, 13) | field(ins.src1, 21, 13) |
           field(ins.src2, 34, 13) | field(ins.len, 47, 8);
      break;
    case Opcode::kLoad:
    case Opcode::kStore:
      w |= field(ins.dst, 4, 13) | field(ins.addr, 17, 32) | field(ins.len, 49, 8);
      break;
    case Opcode::kSet:
      w |= field(ins.dst, 4, 13) | field(static_cast<uint16_t>(ins.imm), 17, 16) | field(ins.len, 33, 8);
      break;
    case Opcode::kCopy:
      w |= field(ins.dst, 4, 13) | field(ins.src1, 17, 13) | field(ins.len, 30, 8);
      break;
    case Opcode::kSend:
    case Opcode::kRecv:
      w |= field(ins.tile, 4, 10) | field(ins.buffer, 14, 16) | field(ins.dst, 30, 13) | field(ins.len, 43, 8);
      break;
    case Opcode::kJmp:
      w |= field(ins.target, 4, 24);
      break;
    case Opcode::kBeq:
      w |= field(ins.dst, 4, 13) | field(ins.src1, 17, 13) | field(ins.target, 30, 24);
      break;
    case Opcode::kCrs:
    case Opcode::kHalt:
      break;
  }
  return w;
}

Instruction decode(uint64_t w) {
  const auto opv = extract(w, 0, 4);
  if (opv >= kOpNames.size()) throw ValidationError("bad opcode " + std::to_string(opv));
  Instruction i;
  i.op = static_cast<Opcode>(opv);
  i.layer = static_cast<int>(extract(w, 57, 7)) - 1;
  switch (i.op) {
    case Opcode::kMcu:
      for (int k = 0; k < kMaxMcusPerCore; ++k) i.masks[k] = OpMask::from_bits(static_cast<uint8_t>(extract(w, 4 + 3 * k, 3)));
      break;
    case Opcode::kAlu: {
      const auto a = extract(w, 4, 4);
      if (a >= static_cast<uint64_t>(kAluOpCount)) throw ValidationError("bad alu op");
      i.alu = static_cast<AluOp>(a);
      i.dst = static_cast<int>(extract(w, 8, 13));
      i.src1 = static_cast<int>(extract(w, 21, 13));
      i.src2 = static_cast<int>(extract(w, 34, 13));
      i.len = static_cast<int>(extract(w, 47, 8));
      break;
    }
    case Opcode::kLoad:
    case Opcode::kStore:
      i.dst = static_cast<int>(extract(w, 4, 13));
      i.addr = static_cast<uint32_t>(extract(w, 17, 32));
      i.len = static_cast<int>(extract(w, 49, 8));
      break;
    case Opcode::kSet:
      i.dst = static_cast<int>(extract(w, 4, 13));
      i.imm = static_cast<int16_t>(extract(w, 17, 16));
      i.len = static_cast<int>(extract(w, 33, 8));
      break;
    case Opcode::kCopy:
      i.dst = static_cast<int>(extract(w, 4, 13));
      i.src1 = static_cast<int>(extract(w, 17, 13));
      i.len = static_cast<int>(extract(w, 30, 8));
      break;
    case Opcode::kSend:
    case Opcode::kRecv:
      i.tile = static_cast<int>(extract(w, 4, 10));
      i.buffer = static_cast<int>(extract(w, 14, 16));
      i.dst = static_cast<int>(extract(w, 30, 13));
      i.len = static_cast<int>(extract(w, 43, 8));
      break;
    case Opcode::kJmp:
      i.target = static_cast<int>(extract(w, 4, 24));
      break;
    case Opcode::kBeq:
      i.dst = static_cast<int>(extract(w, 4, 13));
      i.src1 = static_cast<int>(extract(w, 17, 13));
      i.target = static_cast<int>(extract(w, 30, 24));
      break;
    case Opcode::kCrs:
    case Opcode::kHalt:
      break;
  }
  return i;
}

std::vector<uint8_t> encode_program(const Program& p) {
  std::vector<uint8_t> out;
  auto put = [&](uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out.push_back(static_cast<uint8_t>(v >> (8 * b)));
  };
  put(kMagic, 4);
  put(kVersion, 4);
  put(static_cast<uint32_t>(p.mcus_per_core), 4);
  put(static_cast<uint32_t>(p.cores.size()), 4);
  for (const auto& c : p.cores) {
    put(static_cast<uint32_t>(c.tile), 4);
    put(static_cast<uint32_t>(c.code.size()), 4);
    for (const auto& i : c.code) put(encode(i), 8);
  }
  return out;
}

Program decode_program(std::span<const uint8_t> bytes) {
  size_t pos = 0;
  auto get = [&](int n) {
    if (pos + static_cast<size_t>(n) > bytes.size()) throw ValidationError("truncated program image");
    uint64_t v = 0;
    for (int b = 0; b < n; ++b) v |= static_cast<uint64_t>(bytes[pos + b]) << (8 * b);
    pos += static_cast<size_t>(n);
    return v;
  };
  if (get(4) != kMagic) throw ValidationError("not a program image");
  if (get(4) != kVersion) throw ValidationError("unsupported program image version");
  Program p;
  p.mcus_per_core = static_cast<int>(get(4));
  const auto ncores = get(4);
  for (uint64_t k = 0; k < ncores; ++k) {
    CoreProgram c;
    c.tile = static_cast<int>(get(4));
    const auto n = get(4);
    if (n > bytes.size()) throw ValidationError("truncated program image");
    for (uint64_t j = 0; j < n; ++j) c.code.push_back(decode(get(8)));
    p.cores.push_back(std::move(c));
  }
  if (pos != bytes.size()) throw ValidationError("trailing bytes in program image");
  return p;
}

Program assemble(std::string_view text) {
  Program p;
  bool explicit_cores = false;
  int line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    int layer = -1;
    const size_t hash = line.find('#');
    if (hash != std::string_view::npos) {
      std::string_view comment = line.substr(hash + 1);
      while (!comment.empty() && (comment.back() == ' ' || comment.back() == '\t')) comment.remove_suffix(1);
      constexpr std::string_view kTag = "@layer=";
      if (comment.substr(0, kTag.size()) == kTag) {
        int64_t v = 0;
        const char* first = comment.data() + kTag.size();
        const auto [ptr, ec] = std::from_chars(first, comment.data() + comment.size(), v);
        if (ec != std::errc() || v < 0 || v > kMaxLayerTag || ptr != comment.data() + comment.size())
          throw ParseError(line_no, static_cast<int>(hash + kTag.size()) + 2, "bad layer tag");
        layer = static_cast<int>(v);
      }
      line = line.substr(0, hash);
    }
    Cursor c(line, line_no);
    if (c.at_end()) continue;

    if (line[line.find_first_not_of(" \t")] == '.') {
      const std::string_view dir = c.word();
      if (dir == ".mcus") {
        p.mcus_per_core = static_cast<int>(c.bounded(1, kMaxMcusPerCore, "mcu count"));
      } else if (dir == ".core") {
        const int id = static_cast<int>(c.bounded(0, 1 << 20, "core id"));
        if (id != static_cast<int>(p.cores.size()) || (!explicit_cores && !p.cores.empty()))
          c.fail("cores must be declared in order starting at 0");
        explicit_cores = true;
        CoreProgram core;
        if (!c.at_end()) {
          if (c.word() != "tile") c.fail("expected tile=");
          c.expect('=');
          core.tile = static_cast<int>(c.bounded(0, kMaxTile, "tile"));
        }
        p.cores.push_back(std::move(core));
      } else {
        c.fail("unknown directive '" + std::string(dir) + "'");
      }
      if (!c.at_end()) c.fail("unexpected trailing text");
      continue;
    }
    if (p.cores.empty()) p.cores.emplace_back();
    Instruction ins = parse_instruction(c);
    if (!c.at_end()) c.fail("unexpected trailing text");
    ins.layer = layer;
    p.cores.back().code.push_back(ins);
  }
  validate(p);
  return p;
}

std::string disassemble(const Instruction& i) {
  std::ostringstream os;
  os << opcode_name(i.op);
  switch (i.op) {
    case Opcode::kMcu:
      for (int k = 0; k < kMaxMcusPerCore; ++k)
        if (!i.masks[k].empty()) os << " m" << k << '=' << i.masks[k].str();
      break;
    case Opcode::kAlu:
      os << ' ' << alu_name(i.alu) << " r" << i.dst << ",r" << i.src1 << ",r" << i.src2 << ',' << i.len;
      break;
    case Opcode::kLoad:
      os << " r" << i.dst << ",@" << i.addr << ',' << i.len;
      break;
    case Opcode::kStore:
      os << " @" << i.addr << ",r" << i.dst << ',' << i.len;
      break;
    case Opcode::kSet:
      os << " r" << i.dst << ',' << i.imm << ',' << i.len;
      break;
    case Opcode::kCopy:
      os << " r" << i.dst << ",r" << i.src1 << ',' << i.len;
      break;
    case Opcode::kSend:
    case Opcode::kRecv:
      os << " t" << i.tile << ",b" << i.buffer << ",r" << i.dst << ',' << i.len;
      break;
    case Opcode::kJmp:
      os << ' ' << i.target;
      break;
    case Opcode::kBeq:
      os << " r" << i.dst << ",r" << i.src1 << ',' << i.target;
      break;
    case Opcode::kCrs:
    case Opcode::kHalt:
      break;
  }
  if (i.layer >= 0) os << "  #@layer=" << i.layer;
  return os.str();
}

std::string disassemble(const Program& p) {
  std::ostringstream os;
  os << ".mcus " << p.mcus_per_core << '\n';
  for (size_t k = 0; k < p.cores.size(); ++k) {
    os << ".core " << k << " tile=" << p.cores[k].tile << '\n';
    for (const auto& i : p.cores[k].code) os << "  " << disassemble(i) << '\n';
  }
  return os.str();
}

void validate(const Program& p) {
  if (p.mcus_per_core < 1 || p.mcus_per_core > kMaxMcusPerCore)
    throw ValidationError("mcus per core must be in [1, 6]");
  if (p.cores.empty()) throw ValidationError("missing HALT: program is empty");
  for (size_t k = 0; k < p.cores.size(); ++k) {
    const auto& code = p.cores[k].code;
    const std::string where = "core " + std::to_string(k);
    if (code.empty() || code.back().op != Opcode::kHalt) throw ValidationError(where + ": missing HALT");
    if (p.cores[k].tile < 0 || p.cores[k].tile > kMaxTile) throw ValidationError(where + ": tile out of range");
    for (size_t n = 0; n < code.size(); ++n) {
      const Instruction& i = code[n];
      const std::string at = where + ", instruction " + std::to_string(n) + ": ";
      auto range = [&](int r, int len) {
        if (r < 0 || r + len > kRegisterLimit) throw ValidationError(at + "register range out of bounds");
      };
      if (i.layer < -1 || i.layer > kMaxLayerTag) throw ValidationError(at + "layer tag out of range");
      switch (i.op) {
        case Opcode::kMcu:
          for (int m = p.mcus_per_core; m < kMaxMcusPerCore; ++m)
            if (!i.masks[m].empty()) throw ValidationError(at + "mask for nonexistent MCU m" + std::to_string(m));
          break;
        case Opcode::kJmp:
        case Opcode::kBeq:
          if (i.target < 0 || i.target >= static_cast<int>(code.size()))
            throw ValidationError(at + "jump target out of range");
          if (i.op == Opcode::kBeq) {
            range(i.dst, 1);
            range(i.src1, 1);
          }
          break;
        case Opcode::kCrs:
        case Opcode::kHalt:
          break;
        default:
          if (i.len < 1 || i.len > kMaxLen) throw ValidationError(at + "length out of range");
          range(i.dst, i.len);
          if (i.op == Opcode::kAlu) {
            range(i.src1, i.len);
            if (!alu_is_unary(i.alu)) range(i.src2, i.len);
          }
          if (i.op == Opcode::kCopy) range(i.src1, i.len);
          if (i.op == Opcode::kSet && (i.imm < INT16_MIN || i.imm > INT16_MAX))
            throw ValidationError(at + "immediate out of range");
          if ((i.op == Opcode::kSend || i.op == Opcode::kRecv) &&
              (i.tile < 0 || i.tile > kMaxTile || i.buffer < 0 || i.buffer > kMaxBuffer))
            throw ValidationError(at + "tile or buffer out of range");
          break;
      }
    }
  }
}

void link_check(const Program& p) {
  struct End {
    int core;
    const Instruction* ins;
  };
  std::map<int, std::vector<End>> sends, recvs;
  for (size_t k = 0; k < p.cores.size(); ++k)
    for (const auto& i : p.cores[k].code) {
      if (i.op == Opcode::kSend) sends[i.buffer].push_back({static_cast<int>(k), &i});
      if (i.op == Opcode::kRecv) recvs[i.buffer].push_back({static_cast<int>(k), &i});
    }
  for (const auto& [buf, s] : sends) {
    const std::string b = "buffer " + std::to_string(buf);
    const auto it = recvs.find(buf);
    if (s.size() != 1) throw ValidationError(b + ": sent more than once");
    if (it == recvs.end()) throw ValidationError(b + ": send without matching recv");
    if (it->second.size() != 1) throw ValidationError(b + ": received more than once");
    const End& snd = s.front();
    const End& rcv = it->second.front();
    if (snd.ins->len != rcv.ins->len) throw ValidationError(b + ": length mismatch");
    if (snd.ins->tile != p.cores[rcv.core].tile || rcv.ins->tile != p.cores[snd.core].tile)
      throw ValidationError(b + ": tile fields do not match the endpoints");
  }
  for (const auto& [buf, r] : recvs)
    if (!sends.count(buf)) throw ValidationError("buffer " + std::to_string(buf) + ": recv without matching send");
}

}  // namespace panther
