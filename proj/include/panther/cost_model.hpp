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

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "panther/slice_config.hpp"

namespace panther {

enum class McuVariant : uint8_t { kV1 = 1, kV2 = 2, kV3 = 3 };

inline int copies_for(McuVariant v) { return static_cast<int>(v); }
McuVariant parse_variant(std::string_view text);
std::string_view variant_name(McuVariant v);

/// Which hardware's cost path a run is charged against. Functional results do
/// not depend on it.
enum class Baseline : uint8_t { kPantherV1, kPantherV2, kPantherV3, kBaseDigital, kBaseMvm, kBaseOpaMvm };

Baseline parse_baseline(std::string_view text);
std::string_view baseline_name(Baseline b);
bool is_panther(Baseline b);

/// Energy in integer picojoules, split by where it was spent.
struct EnergySplit {
  int64_t mvm = 0;
  int64_t mtvm = 0;
  int64_t opa = 0;
  int64_t serial_rw = 0;
  int64_t crs = 0;
  int64_t vfu = 0;
  int64_t memory = 0;
  int64_t network = 0;

  int64_t total() const { return mvm + mtvm + opa + serial_rw + crs + vfu + memory + network; }
  EnergySplit& operator+=(const EnergySplit& o);
  EnergySplit scaled(int64_t k) const;
  friend bool operator==(const EnergySplit&, const EnergySplit&) = default;
  nlohmann::json to_json() const;
};

struct Charge {
  EnergySplit energy;
  int64_t cycles = 0;
};

/// Per-primitive energy and latency constants. Matrix-op energies are for a
/// fully active 128x128 crossbar operation and scale with the active fraction.
struct CostModel {
  // Energy, pJ per 128x128 operation.
  int64_t reram_mvm_pj = 35100;
  int64_t cmos_mvm_pj = 365040;  // 10.4x the crossbar MVM
  int64_t cmos_opa_pj = 37280;
  int64_t reram_opa_pj = 11370;
  // PANTHER's default slicing pays this factor on MVM/MTVM over 16x2-bit
  // MVM-only slicing because of its wider ADCs.
  double slicing_mvm_premium = 1.175;

  // Latency, cycles at 1 GHz.
  int64_t reram_mvm_cycles = 128;   // 16 streaming cycles x 8
  int64_t cmos_mvm_cycles = 1139;   // ~8.9x
  int64_t reram_opa_cycles = 32;    // 16 streaming cycles x 2, no ADC
  int64_t cmos_opa_cycles = 410;    // ~12.8x

  // Serial row-at-a-time crossbar access, femtojoules per cell.
  int64_t serial_write_fj_per_cell = 8900;
  int64_t serial_read_fj_per_cell = 700;
  int64_t serial_write_row_cycles = 200;
  int64_t serial_read_row_cycles = 20;

  // Digital side.
  int64_t vfu_pj_per_elem = 1;
  int64_t reg_fj_per_word = 100;
  int64_t vfu_lanes = 16;
  int64_t memory_fj_per_word = 1000;
  int64_t memory_words_per_cycle = 8;
  int64_t network_fj_per_word = 1000;
  int64_t network_words_per_cycle = 8;
  int64_t hop_latency = 4;
  int64_t local_latency = 1;

  // DAC power, P = beta * (2^N / (N + 1)) * V^2 * f.
  double dac_beta = 1e-14;
  double dac_volts = 1.0;
  double dac_f_clk = 1e9;
  int dac_bits = 1;

  static CostModel from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Exponent g in the per-slice ADC cost 2^(g * stored_bits), chosen so the
  /// default slicing costs `slicing_mvm_premium` times the 16x2 slicing.
  double adc_exponent() const;
  /// Relative ADC energy per conversion at `bits` resolution.
  double adc_energy(int bits) const;
  /// MVM energy factor of `cfg` relative to the default slicing.
  double slicing_factor(const SliceConfig& cfg) const;
  double dac_power_watts(int bits) const;

  Charge matvec(Baseline b, const SliceConfig& cfg, int rows, int cols, bool transpose) const;
  /// OPA charged at issue time.
  Charge opa_issue(Baseline b, const SliceConfig& cfg, int rows, int cols) const;
  /// One deferred OPA replayed onto one crossbar copy at commit.
  Charge opa_replay(Baseline b, const SliceConfig& cfg, int rows, int cols) const;
  /// End-of-batch commit besides OPA replay (serial copies and rewrites).
  Charge commit(Baseline b, McuVariant v, const SliceConfig& cfg, int rows, int cols, bool had_updates) const;
  Charge crs(Baseline b, McuVariant v, const SliceConfig& cfg, int rows, int cols) const;
  Charge serial_rw(int64_t cells_read, int64_t cells_written, int rows_read, int rows_written) const;

  Charge vfu(int len) const;
  Charge reg_move(int len) const;
  Charge memory(int words) const;
  Charge network(int words, bool same_tile) const;
};

/// Stored width layout used for cost purposes by the given baseline.
SliceConfig cost_slicing(Baseline b, const SliceConfig& functional);

}  // namespace panther
