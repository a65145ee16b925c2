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
#include "panther/isa.hpp"

using namespace panther;

namespace {

Instruction random_instruction(std::mt19937_64& rng, int mcus, int code_size) {
  auto reg = [&](int len) { return static_cast<int>(rng() % static_cast<uint64_t>(kRegisterLimit - len)); };
  const int len = 1 + static_cast<int>(rng() % kMaxLen);
  Instruction i;
  switch (rng() % 11) {
    case 0: {
      std::array<OpMask, kMaxMcusPerCore> m{};
      for (int k = 0; k < mcus; ++k) m[k] = OpMask::from_bits(static_cast<uint8_t>(rng() % 8));
      i = Instruction::mcu(m);
      break;
    }
    case 1: i = Instruction::alu_op(static_cast<AluOp>(rng() % kAluOpCount), reg(len), reg(len), reg(len), len); break;
    case 2: i = Instruction::load(reg(len), static_cast<uint32_t>(rng()), len); break;
    case 3: i = Instruction::store(static_cast<uint32_t>(rng()), reg(len), len); break;
    case 4: i = Instruction::set(reg(len), static_cast<int16_t>(rng()), len); break;
    case 5: i = Instruction::copy(reg(len), reg(len), len); break;
    case 6: i = Instruction::send(static_cast<int>(rng() % 1024), static_cast<int>(rng() % 65536), reg(len), len); break;
    case 7: i = Instruction::recv(static_cast<int>(rng() % 1024), static_cast<int>(rng() % 65536), reg(len), len); break;
    case 8: i = Instruction::jmp(static_cast<int>(rng() % code_size)); break;
    case 9: i = Instruction::beq(reg(1), reg(1), static_cast<int>(rng() % code_size)); break;
    default: i = Instruction::crs(); break;
  }
  if (rng() % 3 == 0) i.layer = static_cast<int>(rng() % (kMaxLayerTag + 1));
  return i;
}

Program random_program(std::mt19937_64& rng) {
  Program p;
  p.mcus_per_core = 1 + static_cast<int>(rng() % kMaxMcusPerCore);
  const int cores = 1 + static_cast<int>(rng() % 3);
  for (int k = 0; k < cores; ++k) {
    CoreProgram c;
    c.tile = static_cast<int>(rng() % 4);
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int j = 0; j < n - 1; ++j) c.code.push_back(random_instruction(rng, p.mcus_per_core, n));
    c.code.push_back(Instruction::halt());
    p.cores.push_back(std::move(c));
  }
  return p;
}

}  // namespace

TEST_CASE("mcu masks from text") {
  const Program p = assemble("mcu m0=110 m1=011\nhalt\n");
  REQUIRE(p.cores.size() == 1);
  const Instruction& i = p.cores[0].code[0];
  CHECK(i.op == Opcode::kMcu);
  CHECK(i.masks[0] == OpMask{true, true, false});
  CHECK(i.masks[1] == OpMask{false, true, true});
}

TEST_CASE("empty program lacks halt") {
  CHECK_THROWS_AS(assemble(""), ValidationError);
  CHECK_THROWS_AS(assemble("crs\n"), ValidationError);
}

TEST_CASE("mask for an absent mcu") {
  CHECK_THROWS_AS(assemble(".mcus 2\nmcu m2=100\nhalt\n"), ValidationError);
  CHECK_NOTHROW(assemble(".mcus 3\nmcu m2=100\nhalt\n"));
}

TEST_CASE("parse errors carry positions") {
  try {
    assemble("halt\nload r1,@5\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 11);
  }
  CHECK_THROWS_AS(assemble("frob r1\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("alu pow r1,r2,r3,4\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("mcu m0=12\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("mcu m0=100 m0=010\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("copy r1,r2,0\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("copy r1,r2,3 extra\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("set r1,40000,1\nhalt\n"), ParseError);
  CHECK_THROWS_AS(assemble("load r9000,@0,1\nhalt\n"), ParseError);
}

TEST_CASE("comments and layer tags") {
  const Program p = assemble("# header\nalu add r1,r2,r3,4  #@layer=2\nhalt # done\n");
  CHECK(p.cores[0].code[0].layer == 2);
  CHECK(p.cores[0].code[1].layer == -1);
}

TEST_CASE("text round trip over random programs") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const Program p = random_program(rng);
    validate(p);
    const std::string text = disassemble(p);
    const Program back = assemble(text);
    REQUIRE(back == p);
    CHECK(disassemble(back) == text);
  }
}

TEST_CASE("binary round trip over random programs") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    const Program p = random_program(rng);
    for (const auto& c : p.cores)
      for (const auto& i : c.code) REQUIRE(decode(encode(i)) == i);
    CHECK(decode_program(encode_program(p)) == p);
  }
}

TEST_CASE("corrupt binary") {
  std::vector<uint8_t> bytes = encode_program(assemble("halt\n"));
  bytes.pop_back();
  CHECK_THROWS_AS(decode_program(bytes), ValidationError);
  CHECK_THROWS_AS(decode(15), ValidationError);
}

TEST_CASE("multi core link check") {
  const char* ok =
      ".core 0 tile=0\n  send t1,b7,r4608,16\n  halt\n"
      ".core 1 tile=1\n  recv t0,b7,r4608,16\n  halt\n";
  CHECK_NOTHROW(link_check(assemble(ok)));
  const char* unmatched = ".core 0 tile=0\n  send t1,b7,r4608,16\n  halt\n";
  CHECK_THROWS_AS(link_check(assemble(unmatched)), ValidationError);
  const char* wrong_len =
      ".core 0 tile=0\n  send t1,b7,r4608,16\n  halt\n"
      ".core 1 tile=1\n  recv t0,b7,r4608,8\n  halt\n";
  CHECK_THROWS_AS(link_check(assemble(wrong_len)), ValidationError);
  const char* wrong_tile =
      ".core 0 tile=0\n  send t2,b7,r4608,16\n  halt\n"
      ".core 1 tile=1\n  recv t0,b7,r4608,16\n  halt\n";
  CHECK_THROWS_AS(link_check(assemble(wrong_tile)), ValidationError);
  CHECK_THROWS_AS(assemble(".core 1\nhalt\n"), ParseError);
}

TEST_CASE("jump targets are checked") {
  CHECK_THROWS_AS(assemble("jmp 5\nhalt\n"), ValidationError);
  CHECK_NOTHROW(assemble("jmp 1\nhalt\n"));
}
