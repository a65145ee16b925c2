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

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "panther/fixed_point.hpp"

namespace panther {

/// Element-wise vector operations of the VFU. All operate on Q8.8 vectors.
enum class AluOp : uint8_t {
  kAdd,
  kSub,
  kMul,
  kRelu,
  kReluGrad,     // a where b > 0, else 0 (b is the activation output)
  kSigmoid,
  kSigmoidGrad,  // a * b * (1 - b) (b is the activation output)
  kLossGrad,     // b - softmax(a): descent direction for cross-entropy
};

inline constexpr int kAluOpCount = 8;

std::string_view alu_name(AluOp op);
std::optional<AluOp> parse_alu(std::string_view name);
bool alu_is_unary(AluOp op);

int16_t sat_add(int16_t a, int16_t b);
int16_t sat_sub(int16_t a, int16_t b);
int16_t q_mul(int16_t a, int16_t b);
int16_t q_sigmoid(int16_t a);

/// out = op(a, b). `out` may alias `a` or `b`; `b` is ignored by unary ops.
void alu_apply(AluOp op, std::span<const int16_t> a, std::span<const int16_t> b, std::span<int16_t> out);

/// Pairwise saturating sum: adjacent pairs at each level, an odd tail is
/// carried up unchanged. The compiler emits exactly this order.
DataVector reduce_tree(std::vector<DataVector> parts);

/// Pairs (indices into the working list) summed at each level of reduce_tree;
/// sums are placed first, an odd tail follows.
std::vector<std::vector<std::pair<int, int>>> reduction_plan(int parts);

/// Softmax cross-entropy of Q8.8 logits against a class index.
double softmax_cross_entropy(std::span<const int16_t> logits, int label);
/// Real-valued softmax of Q8.8 logits.
std::vector<double> softmax(std::span<const int16_t> logits);

}  // namespace panther
