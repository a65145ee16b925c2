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

#include "panther/cost_model.hpp"

#include <cmath>

#include "panther/errors.hpp"

namespace panther {
namespace {

int64_t pj(double v) { return std::llround(v); }

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

int64_t fj_to_pj(int64_t fj) { return (fj + 500) / 1000; }

double active_fraction(int rows, int cols) {
  return static_cast<double>(rows) * cols / (128.0 * 128.0);
}

double adc_sum(const SliceConfig& cfg, double g) {
  double a = 0.0;
  for (int s = 0; s < cfg.size(); ++s) a += std::exp2(g * cfg.stored_bits(s));
  return a;
}

const SliceConfig& reference_slicing() {
  static const SliceConfig ref = SliceConfig::parse("44466555");
  return ref;
}

}  // namespace

McuVariant parse_variant(std::string_view text) {
  if (text == "v1") return McuVariant::kV1;
  if (text == "v2") return McuVariant::kV2;
  if (text == "v3") return McuVariant::kV3;
  throw ConfigError("unknown MCU variant: " + std::string(text));
}

std::string_view variant_name(McuVariant v) {
  switch (v) {
    case McuVariant::kV1: return "v1";
    case McuVariant::kV2: return "v2";
    case McuVariant::kV3: return "v3";
  }
  return "?";
}

Baseline parse_baseline(std::string_view text) {
  if (text == "panther_v1") return Baseline::kPantherV1;
  if (text == "panther_v2") return Baseline::kPantherV2;
  if (text == "panther_v3") return Baseline::kPantherV3;
  if (text == "base_digital") return Baseline::kBaseDigital;
  if (text == "base_mvm") return Baseline::kBaseMvm;
  if (text == "base_opa_mvm") return Baseline::kBaseOpaMvm;
  throw ConfigError("unknown baseline: " + std::string(text));
}

std::string_view baseline_name(Baseline b) {
  switch (b) {
    case Baseline::kPantherV1: return "panther_v1";
    case Baseline::kPantherV2: return "panther_v2";
    case Baseline::kPantherV3: return "panther_v3";
    case Baseline::kBaseDigital: return "base_digital";
    case Baseline::kBaseMvm: return "base_mvm";
    case Baseline::kBaseOpaMvm: return "base_opa_mvm";
  }
  return "?";
}

bool is_panther(Baseline b) {
  return b == Baseline::kPantherV1 || b == Baseline::kPantherV2 || b == Baseline::kPantherV3;
}

EnergySplit& EnergySplit::operator+=(const EnergySplit& o) {
  mvm += o.mvm;
  mtvm += o.mtvm;
  opa += o.opa;
  serial_rw += o.serial_rw;
  crs += o.crs;
  vfu += o.vfu;
  memory += o.memory;
  network += o.network;
  return *this;
}

EnergySplit EnergySplit::scaled(int64_t k) const {
  return {mvm * k, mtvm * k, opa * k, serial_rw * k, crs * k, vfu * k, memory * k, network * k};
}

nlohmann::json EnergySplit::to_json() const {
  return {{"mvm_pj", mvm},   {"mtvm_pj", mtvm},     {"opa_pj", opa},         {"serial_rw_pj", serial_rw},
          {"crs_pj", crs},   {"vfu_pj", vfu},       {"memory_pj", memory},   {"network_pj", network},
          {"total_pj", total()}};
}

SliceConfig cost_slicing(Baseline b, const SliceConfig& functional) {
  return is_panther(b) ? functional : mvm_only_config();
}

#define PANTHER_COST_FIELDS(X)                                                                        \
  X(reram_mvm_pj) X(cmos_mvm_pj) X(cmos_opa_pj) X(reram_opa_pj) X(slicing_mvm_premium)                \
  X(reram_mvm_cycles) X(cmos_mvm_cycles) X(reram_opa_cycles) X(cmos_opa_cycles)                       \
  X(serial_write_fj_per_cell) X(serial_read_fj_per_cell) X(serial_write_row_cycles)                   \
  X(serial_read_row_cycles) X(vfu_pj_per_elem) X(reg_fj_per_word) X(vfu_lanes) X(memory_fj_per_word)  \
  X(memory_words_per_cycle) X(network_fj_per_word) X(network_words_per_cycle) X(hop_latency)          \
  X(local_latency) X(dac_beta) X(dac_volts) X(dac_f_clk) X(dac_bits)

CostModel CostModel::from_json(const nlohmann::json& doc) {
  CostModel c;
  try {
#define READ_FIELD(name) c.name = doc.value(#name, c.name);
    PANTHER_COST_FIELDS(READ_FIELD)
#undef READ_FIELD
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad cost model: ") + e.what());
  }
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!c.to_json().contains(it.key())) throw ConfigError("unknown cost model key: " + it.key());
  if (c.vfu_lanes <= 0 || c.memory_words_per_cycle <= 0 || c.network_words_per_cycle <= 0)
    throw ConfigError("throughput constants must be positive");
  if (c.slicing_mvm_premium <= 0.5) throw ConfigError("slicing_mvm_premium must exceed 0.5");
  return c;
}

nlohmann::json CostModel::to_json() const {
  nlohmann::json doc;
#define WRITE_FIELD(name) doc[#name] = name;
  PANTHER_COST_FIELDS(WRITE_FIELD)
#undef WRITE_FIELD
  return doc;
}

#undef PANTHER_COST_FIELDS

double CostModel::adc_exponent() const {
  const SliceConfig base = mvm_only_config();
  double lo = 0.0, hi = 8.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (adc_sum(reference_slicing(), mid) / adc_sum(base, mid) < slicing_mvm_premium)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double CostModel::adc_energy(int bits) const { return std::exp2(adc_exponent() * bits); }

double CostModel::slicing_factor(const SliceConfig& cfg) const {
  const double g = adc_exponent();
  return adc_sum(cfg, g) / adc_sum(reference_slicing(), g);
}

double CostModel::dac_power_watts(int bits) const {
  return dac_beta * (std::exp2(bits) / (bits + 1)) * dac_volts * dac_volts * dac_f_clk;
}

Charge CostModel::matvec(Baseline b, const SliceConfig& cfg, int rows, int cols, bool transpose) const {
  Charge c;
  const double act = active_fraction(rows, cols);
  int64_t e;
  if (b == Baseline::kBaseDigital) {
    e = pj(cmos_mvm_pj * act);
    c.cycles = cmos_mvm_cycles;
  } else {
    e = pj(reram_mvm_pj * slicing_factor(cost_slicing(b, cfg)) * act);
    c.cycles = reram_mvm_cycles;
  }
  (transpose ? c.energy.mtvm : c.energy.mvm) = e;
  return c;
}

Charge CostModel::serial_rw(int64_t cells_read, int64_t cells_written, int rows_read, int rows_written) const {
  Charge c;
  c.energy.serial_rw = fj_to_pj(cells_read * serial_read_fj_per_cell + cells_written * serial_write_fj_per_cell);
  c.cycles = rows_read * serial_read_row_cycles + rows_written * serial_write_row_cycles;
  return c;
}

Charge CostModel::opa_issue(Baseline b, const SliceConfig& cfg, int rows, int cols) const {
  const double act = active_fraction(rows, cols);
  Charge c;
  switch (b) {
    case Baseline::kPantherV1:
    case Baseline::kPantherV2:
      c.cycles = 1;  // operands latched; the crossbar update waits for halt
      return c;
    case Baseline::kPantherV3:
      c.energy.opa = pj(reram_opa_pj * act * cfg.size() / 8.0);
      c.cycles = reram_opa_cycles;
      return c;
    case Baseline::kBaseDigital:
    case Baseline::kBaseMvm:
      c.energy.opa = pj(cmos_opa_pj * act);
      c.cycles = cmos_opa_cycles;
      return c;
    case Baseline::kBaseOpaMvm: {
      // Gradient computed with a crossbar MVM after serially writing the
      // streamed operand into a scratch crossbar.
      const SliceConfig mvm_cfg = mvm_only_config();
      c.energy.opa = pj(reram_mvm_pj * slicing_factor(mvm_cfg) * act);
      const Charge w = serial_rw(0, static_cast<int64_t>(rows) * mvm_cfg.size(), 0, 1);
      c.energy.serial_rw = w.energy.serial_rw;
      c.cycles = reram_mvm_cycles + w.cycles;
      return c;
    }
  }
  return c;
}

Charge CostModel::opa_replay(Baseline b, const SliceConfig& cfg, int rows, int cols) const {
  Charge c;
  if (b != Baseline::kPantherV1 && b != Baseline::kPantherV2) return c;
  c.energy.opa = pj(reram_opa_pj * active_fraction(rows, cols) * cfg.size() / 8.0);
  c.cycles = reram_opa_cycles;
  return c;
}

Charge CostModel::commit(Baseline b, McuVariant v, const SliceConfig& cfg, int rows, int cols, bool had_updates) const {
  if (!had_updates) return {};
  const int64_t cells = static_cast<int64_t>(rows) * cols;
  switch (b) {
    case Baseline::kPantherV3:
      // Copy the eagerly updated crossbar into the two compute copies.
      return serial_rw(cells * cfg.size(), 2 * cells * cfg.size(), rows, rows);
    case Baseline::kBaseMvm:
    case Baseline::kBaseOpaMvm: {
      const int64_t n = cells * mvm_only_config().size() * copies_for(v);
      return serial_rw(n, n, rows, rows);
    }
    default:
      return {};
  }
}

Charge CostModel::crs(Baseline b, McuVariant v, const SliceConfig& cfg, int rows, int cols) const {
  if (!is_panther(b)) return {};
  const int64_t n = static_cast<int64_t>(rows) * cols * cfg.size() * copies_for(v);
  Charge c = serial_rw(n, n, rows, rows);
  c.energy.crs = c.energy.serial_rw;
  c.energy.serial_rw = 0;
  return c;
}

Charge CostModel::vfu(int len) const {
  Charge c;
  c.energy.vfu = len * vfu_pj_per_elem;
  c.cycles = ceil_div(len, vfu_lanes);
  return c;
}

Charge CostModel::reg_move(int len) const {
  Charge c;
  c.energy.vfu = fj_to_pj(len * reg_fj_per_word);
  c.cycles = ceil_div(len, vfu_lanes);
  return c;
}

Charge CostModel::memory(int words) const {
  Charge c;
  c.energy.memory = fj_to_pj(words * memory_fj_per_word);
  c.cycles = 1 + ceil_div(words, memory_words_per_cycle);
  return c;
}

Charge CostModel::network(int words, bool same_tile) const {
  Charge c;
  c.energy.network = fj_to_pj(words * network_fj_per_word);
  c.cycles = (same_tile ? local_latency : hop_latency) + ceil_div(words, network_words_per_cycle);
  return c;
}

}  // namespace panther
