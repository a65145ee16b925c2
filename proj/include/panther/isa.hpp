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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panther/mcu.hpp"
#include "panther/vfu.hpp"

namespace panther {

enum class Opcode : uint8_t { kMcu, kAlu, kLoad, kStore, kSet, kCopy, kSend, kRecv, kJmp, kBeq, kCrs, kHalt };

inline constexpr int kMaxMcusPerCore = 6;
inline constexpr int kRegisterLimit = 1 << 13;
inline constexpr int kMaxLen = 255;
inline constexpr int kMaxTile = (1 << 10) - 1;
inline constexpr int kMaxBuffer = (1 << 16) - 1;
inline constexpr int kMaxTarget = (1 << 24) - 1;
inline constexpr int kMaxLayerTag = 126;

std::string_view opcode_name(Opcode op);

/// One decoded instruction. Fields an opcode does not use stay zero so that
/// equality is structural.
struct Instruction {
  Opcode op = Opcode::kHalt;
  std::array<OpMask, kMaxMcusPerCore> masks{};
  AluOp alu = AluOp::kAdd;
  int dst = 0;  // also the register of load/store/send/recv and the first beq operand
  int src1 = 0;
  int src2 = 0;
  int len = 0;
  uint32_t addr = 0;
  int tile = 0;
  int buffer = 0;
  int imm = 0;     // set: signed 16-bit value
  int target = 0;  // jmp/beq: instruction index within the core
  int layer = -1;  // energy attribution tag, not semantics

  friend bool operator==(const Instruction&, const Instruction&) = default;

  static Instruction mcu(std::array<OpMask, kMaxMcusPerCore> masks);
  static Instruction alu_op(AluOp op, int dst, int src1, int src2, int len);
  static Instruction load(int dst, uint32_t addr, int len);
  static Instruction store(uint32_t addr, int src, int len);
  static Instruction set(int dst, int imm, int len);
  static Instruction copy(int dst, int src, int len);
  static Instruction send(int tile, int buffer, int src, int len);
  static Instruction recv(int tile, int buffer, int dst, int len);
  static Instruction jmp(int target);
  static Instruction beq(int a, int b, int target);
  static Instruction crs();
  static Instruction halt();
};

struct CoreProgram {
  int tile = 0;
  std::vector<Instruction> code;
  friend bool operator==(const CoreProgram&, const CoreProgram&) = default;
};

/// Instruction streams for every core of a run; core ids are list indices.
struct Program {
  int mcus_per_core = 2;
  std::vector<CoreProgram> cores;
  friend bool operator==(const Program&, const Program&) = default;
};

/// Fixed 64-bit layout; opcode in bits 0-3, layer tag + 1 in bits 57-63.
uint64_t encode(const Instruction& ins);
Instruction decode(uint64_t word);

/// Binary image: magic, mcus per core, core count, then per core its tile,
/// length and words. Little-endian.
std::vector<uint8_t> encode_program(const Program& p);
Program decode_program(std::span<const uint8_t> bytes);

Program assemble(std::string_view text);
std::string disassemble(const Program& p);
std::string disassemble(const Instruction& ins);

/// Field ranges, mask targets, jump targets and the terminal HALT.
void validate(const Program& p);
/// Every send has exactly one recv with the same buffer and length, and the
/// tile fields name each other's tiles.
void link_check(const Program& p);

}  // namespace panther
