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
#include <deque>
#include <string_view>
#include <vector>

#include "panther/cost_model.hpp"
#include "panther/sliced_matrix.hpp"

namespace panther {

/// Three operation bits of one MCU inside an `mcu` instruction.
struct OpMask {
  bool mvm = false;
  bool mtvm = false;
  bool opa = false;

  bool empty() const { return !mvm && !mtvm && !opa; }
  uint8_t bits() const { return static_cast<uint8_t>((mvm ? 4 : 0) | (mtvm ? 2 : 0) | (opa ? 1 : 0)); }
  static OpMask from_bits(uint8_t b) { return {(b & 4) != 0, (b & 2) != 0, (b & 1) != 0}; }
  /// "110" style text, MVM first.
  static OpMask parse(std::string_view text);
  std::string str() const;
  friend bool operator==(const OpMask&, const OpMask&) = default;
};

/// Operand/result register banks of an MCU, each 128 entries.
enum class McuBank : int { kMvmIn = 0, kMvmOut, kMtvmIn, kMtvmOut, kOpaRow, kOpaCol };
inline constexpr int kMcuBanks = 6;
inline constexpr int kBankSize = 128;
inline constexpr int kMcuRegisterSpan = kMcuBanks * kBankSize;

struct McuParams {
  McuVariant variant = McuVariant::kV1;
  Baseline baseline = Baseline::kPantherV1;
  int adc_bits = 0;  // 0 selects the lossless resolution
  int lr_shift = 0;  // negative disables updates
  int layer = -1;    // for energy attribution
};

struct McuResult {
  Charge charge;
  uint64_t saturation_events = 0;
};

/// One matrix-computation unit holding 1-3 copies of a weight shard.
class McuInstance {
 public:
  McuInstance(McuParams params, const SlicedMatrix& weights);

  const McuParams& params() const { return params_; }
  int rows() const { return copies_.front().rows(); }
  int cols() const { return copies_.front().cols(); }
  const SliceConfig& config() const { return copies_.front().config(); }
  int copy_count() const { return static_cast<int>(copies_.size()); }
  const SlicedMatrix& copy(int k) const { return copies_.at(k); }
  SlicedMatrix& mutable_copy(int k) { return copies_.at(k); }

  std::array<int16_t, kBankSize>& bank(McuBank b) { return banks_[static_cast<int>(b)]; }
  const std::array<int16_t, kBankSize>& bank(McuBank b) const { return banks_[static_cast<int>(b)]; }
  /// Marks a bank as holding a fresh operand.
  void mark_written(McuBank b) { valid_[static_cast<int>(b)] = true; }
  bool bank_valid(McuBank b) const { return valid_[static_cast<int>(b)]; }

  size_t pending() const { return pending_.size(); }
  /// Shared-memory words held by the pending-OPA queue (all entries but the
  /// first, which stays in the OPA banks).
  int64_t pending_words() const { return pending_words_; }

  McuResult execute_mask(OpMask mask, const CostModel& cost);
  McuResult halt_commit(const CostModel& cost);
  /// Commit, then resolve carries on every copy.
  McuResult carry_resolve(const CostModel& cost);

 private:
  void consume(McuBank b);
  McuResult apply_opa(SlicedMatrix& target, const DataVector& x, const DataVector& d);

  McuParams params_;
  std::vector<SlicedMatrix> copies_;
  std::array<std::array<int16_t, kBankSize>, kMcuBanks> banks_{};
  std::array<bool, kMcuBanks> valid_{};
  std::deque<std::pair<DataVector, DataVector>> pending_;
  int64_t pending_words_ = 0;
  bool eager_dirty_ = false;
  int adc_bits_ = 0;
};

}  // namespace panther
