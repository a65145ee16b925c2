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

#include "panther/vfu.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "panther/errors.hpp"

namespace panther {
namespace {

constexpr std::array<std::string_view, kAluOpCount> kNames = {
    "add", "sub", "mul", "relu", "relu_grad", "sigmoid", "sigmoid_grad", "loss_grad"};

}  // namespace

std::string_view alu_name(AluOp op) { return kNames.at(static_cast<size_t>(op)); }

std::optional<AluOp> parse_alu(std::string_view name) {
  for (size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<AluOp>(i);
  return std::nullopt;
}

bool alu_is_unary(AluOp op) { return op == AluOp::kRelu || op == AluOp::kSigmoid; }

int16_t sat_add(int16_t a, int16_t b) { return saturate16(int64_t{a} + b); }
int16_t sat_sub(int16_t a, int16_t b) { return saturate16(int64_t{a} - b); }

int16_t q_mul(int16_t a, int16_t b) {
  return saturate16(round_shift_right(int64_t{a} * b, kDataFormat.frac_bits));
}

int16_t q_sigmoid(int16_t a) {
  const double x = data_to_double(a);
  return static_cast<int16_t>(quantize(1.0 / (1.0 + std::exp(-x)), kDataFormat));
}

std::vector<double> softmax(std::span<const int16_t> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  double top = data_to_double(*std::max_element(logits.begin(), logits.end()));
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(data_to_double(logits[i]) - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double softmax_cross_entropy(std::span<const int16_t> logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) throw ShapeError("label out of range");
  double top = data_to_double(*std::max_element(logits.begin(), logits.end()));
  double sum = 0.0;
  for (int16_t z : logits) sum += std::exp(data_to_double(z) - top);
  return std::log(sum) - (data_to_double(logits[label]) - top);
}

void alu_apply(AluOp op, std::span<const int16_t> a, std::span<const int16_t> b, std::span<int16_t> out) {
  const size_t n = out.size();
  if (a.size() != n || (!alu_is_unary(op) && b.size() != n)) throw DimensionError("ALU operand length mismatch");
  switch (op) {
    case AluOp::kAdd:
      for (size_t i = 0; i < n; ++i) out[i] = sat_add(a[i], b[i]);
      break;
    case AluOp::kSub:
      for (size_t i = 0; i < n; ++i) out[i] = sat_sub(a[i], b[i]);
      break;
    case AluOp::kMul:
      for (size_t i = 0; i < n; ++i) out[i] = q_mul(a[i], b[i]);
      break;
    case AluOp::kRelu:
      for (size_t i = 0; i < n; ++i) out[i] = std::max<int16_t>(a[i], 0);
      break;
    case AluOp::kReluGrad:
      for (size_t i = 0; i < n; ++i) out[i] = b[i] > 0 ? a[i] : 0;
      break;
    case AluOp::kSigmoid:
      for (size_t i = 0; i < n; ++i) out[i] = q_sigmoid(a[i]);
      break;
    case AluOp::kSigmoidGrad:
      for (size_t i = 0; i < n; ++i) {
        const int16_t slope = q_mul(b[i], sat_sub(int16_t{1} << kDataFormat.frac_bits, b[i]));
        out[i] = q_mul(a[i], slope);
      }
      break;
    case AluOp::kLossGrad: {
      const std::vector<double> p = softmax(a);
      for (size_t i = 0; i < n; ++i)
        out[i] = static_cast<int16_t>(quantize(data_to_double(b[i]) - p[i], kDataFormat));
      break;
    }
  }
}

std::vector<std::vector<std::pair<int, int>>> reduction_plan(int parts) {
  std::vector<std::vector<std::pair<int, int>>> levels;
  int width = parts;
  while (width > 1) {
    std::vector<std::pair<int, int>> level;
    for (int k = 0; k + 1 < width; k += 2) level.emplace_back(k, k + 1);
    levels.push_back(std::move(level));
    width = (width + 1) / 2;
  }
  return levels;
}

DataVector reduce_tree(std::vector<DataVector> parts) {
  if (parts.empty()) throw DimensionError("nothing to reduce");
  for (const auto& level : reduction_plan(static_cast<int>(parts.size()))) {
    std::vector<DataVector> next;
    for (auto [l, r] : level) {
      DataVector sum(parts[l].size());
      alu_apply(AluOp::kAdd, parts[l], parts[r], sum);
      next.push_back(std::move(sum));
    }
    if (parts.size() % 2) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

}  // namespace panther
