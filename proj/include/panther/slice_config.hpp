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

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace panther {

/// One weight slice: `nominal_bits` of the logical weight plus `carry_bits`
/// of headroom. A negative carry models a slice stored narrower than the
/// bit field it is responsible for (the "3 bits per slice" sweep point).
struct SliceSpec {
  int nominal_bits = 4;
  int carry_bits = 0;

  int stored_bits() const { return nominal_bits + carry_bits; }
  friend bool operator==(const SliceSpec&, const SliceSpec&) = default;
};

/// Bit layout of a weight across crossbar slices, most significant first.
class SliceConfig {
 public:
  static constexpr int kMaxNominalBits = 6;
  static constexpr int kMaxStoredBits = 15;

  SliceConfig(std::vector<SliceSpec> msb_to_lsb, int weight_bits = 32, int p = 0, int m = 1);

  /// Accepts "44466555" (stored width per slice, MSB first), "uniform:<k>",
  /// "16x2", "fig3f", or a path to a JSON document.
  static SliceConfig parse(std::string_view text);
  static SliceConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  int size() const { return static_cast<int>(slices_.size()); }
  const SliceSpec& slice(int s) const { return slices_.at(s); }
  const std::vector<SliceSpec>& slices() const { return slices_; }

  int weight_bits() const { return weight_bits_; }
  int column_input_bits() const { return p_; }
  int row_stream_bits() const { return m_; }
  /// Streaming cycles for a 16-bit row operand.
  int stream_cycles() const { return 16 / m_; }

  int stored_bits(int s) const { return slices_.at(s).stored_bits(); }
  int total_stored_bits() const;
  /// Bit offset of slice `s` inside the logical weight.
  int position(int s) const { return positions_.at(s); }
  uint32_t zero_point(int s) const { return uint32_t{1} << (stored_bits(s) - 1); }
  uint32_t max_stored(int s) const { return (uint32_t{1} << stored_bits(s)) - 1; }
  int64_t digit_min(int s) const { return -static_cast<int64_t>(zero_point(s)); }
  int64_t digit_max(int s) const { return static_cast<int64_t>(zero_point(s)) - 1; }

  /// Weight range the canonical encoding holds exactly. Slices without carry
  /// use balanced digits, so this can be narrower than weight_bits allows.
  int64_t min_weight() const { return min_weight_; }
  int64_t max_weight() const { return max_weight_; }

  /// Storage index of the slice with significance rank `rank` (0 = lowest order).
  int by_significance(int rank) const { return size() - 1 - rank; }

  /// Compact label, e.g. "44466555" or "2x16:c30".
  std::string name() const;

  friend bool operator==(const SliceConfig& a, const SliceConfig& b) {
    return a.slices_ == b.slices_ && a.weight_bits_ == b.weight_bits_ && a.p_ == b.p_ && a.m_ == b.m_;
  }

 private:
  std::vector<SliceSpec> slices_;
  std::vector<int> positions_;
  int weight_bits_;
  int p_;
  int m_;
  int64_t min_weight_ = 0;
  int64_t max_weight_ = 0;
};

/// Stored widths given most significant first, nominal bits split evenly.
SliceConfig heterogeneous_config(std::string_view stored_widths, int weight_bits = 32);
/// Eight 4-bit fields each stored in `stored_bits` cells.
SliceConfig uniform_config(int stored_bits);
/// Sixteen 2-bit slices with carry headroom totalling 62 stored bits.
SliceConfig fig3f_config();
/// Sixteen 2-bit slices with no headroom (MVM-only bit slicing).
SliceConfig mvm_only_config();

}  // namespace panther
