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

#include "panther/mcu.hpp"

#include <algorithm>

#include "panther/errors.hpp"

namespace panther {

OpMask OpMask::parse(std::string_view text) {
  if (text.size() != 3 || text.find_first_not_of("01") != std::string_view::npos)
    throw ConfigError("mask must be three binary digits: " + std::string(text));
  return {text[0] == '1', text[1] == '1', text[2] == '1'};
}

std::string OpMask::str() const { return {mvm ? '1' : '0', mtvm ? '1' : '0', opa ? '1' : '0'}; }

McuInstance::McuInstance(McuParams params, const SlicedMatrix& weights) : params_(params) {
  copies_.assign(copies_for(params.variant), weights);
  adc_bits_ = params.adc_bits > 0 ? params.adc_bits
                                  : lossless_adc_bits(weights.config(), std::max(weights.rows(), weights.cols()));
}

void McuInstance::consume(McuBank b) {
  if (!valid_[static_cast<int>(b)]) throw MissingOperandError("MCU operand bank was not written before use");
  valid_[static_cast<int>(b)] = false;
}

McuResult McuInstance::apply_opa(SlicedMatrix& target, const DataVector& x, const DataVector& d) {
  McuResult r;
  r.saturation_events = opa_bitsliced(target, x, d, params_.lr_shift).saturation_events;
  return r;
}

McuResult McuInstance::execute_mask(OpMask mask, const CostModel& cost) {
  McuResult out;
  if (mask.empty()) return out;
  const int r = rows(), c = cols();
  const SliceConfig& cfg = config();
  const Baseline b = params_.baseline;
  // Read every operand before any output bank is written.
  DataVector mvm_in, mtvm_in, opa_row, opa_col;
  if (mask.mvm) {
    consume(McuBank::kMvmIn);
    mvm_in.assign(bank(McuBank::kMvmIn).begin(), bank(McuBank::kMvmIn).begin() + r);
  }
  if (mask.mtvm) {
    consume(McuBank::kMtvmIn);
    mtvm_in.assign(bank(McuBank::kMtvmIn).begin(), bank(McuBank::kMtvmIn).begin() + c);
  }
  if (mask.opa) {
    consume(McuBank::kOpaRow);
    consume(McuBank::kOpaCol);
    opa_row.assign(bank(McuBank::kOpaRow).begin(), bank(McuBank::kOpaRow).begin() + r);
    opa_col.assign(bank(McuBank::kOpaCol).begin(), bank(McuBank::kOpaCol).begin() + c);
  }

  int64_t mvm_cycles = 0, mtvm_cycles = 0, opa_cycles = 0;
  if (mask.mvm) {
    const DataVector y = mvm_bitsliced(copies_[0], mvm_in, adc_bits_);
    std::copy(y.begin(), y.end(), bank(McuBank::kMvmOut).begin());
    const Charge ch = cost.matvec(b, cfg, r, c, false);
    out.charge.energy += ch.energy;
    mvm_cycles = ch.cycles;
  }
  if (mask.mtvm) {
    // Variant 1 shares its only crossbar; the others use copy 1.
    const SlicedMatrix& m = copies_.size() > 1 ? copies_[1] : copies_[0];
    const DataVector y = mtvm_bitsliced(m, mtvm_in, adc_bits_);
    std::copy(y.begin(), y.end(), bank(McuBank::kMtvmOut).begin());
    const Charge ch = cost.matvec(b, cfg, r, c, true);
    out.charge.energy += ch.energy;
    mtvm_cycles = ch.cycles;
  }
  if (mask.opa) {
    Charge ch = cost.opa_issue(b, cfg, r, c);
    if (params_.variant == McuVariant::kV3) {
      out.saturation_events += apply_opa(copies_[2], opa_row, opa_col).saturation_events;
      eager_dirty_ = true;
    } else {
      // The first deferred update stays latched in the OPA banks; later ones
      // are parked in shared memory.
      if (!pending_.empty()) {
        const Charge park = cost.memory(r + c);
        ch.energy += park.energy;
        ch.cycles = std::max(ch.cycles, park.cycles);
        pending_words_ += r + c;
      }
      pending_.emplace_back(std::move(opa_row), std::move(opa_col));
    }
    out.charge.energy += ch.energy;
    opa_cycles = ch.cycles;
  }
  if (params_.variant == McuVariant::kV1)
    out.charge.cycles = mvm_cycles + mtvm_cycles + opa_cycles;
  else
    out.charge.cycles = std::max({mvm_cycles, mtvm_cycles, opa_cycles});
  return out;
}

McuResult McuInstance::halt_commit(const CostModel& cost) {
  McuResult out;
  const int r = rows(), c = cols();
  const SliceConfig& cfg = config();
  const Baseline b = params_.baseline;
  bool updated = false;
  if (params_.variant == McuVariant::kV3) {
    if (eager_dirty_) {
      copies_[0] = copies_[2];
      copies_[1] = copies_[2];
      updated = true;
      eager_dirty_ = false;
    }
  } else {
    for (bool first = true; !pending_.empty(); first = false) {
      const auto [x, d] = std::move(pending_.front());
      pending_.pop_front();
      if (!first) {
        const Charge fetch = cost.memory(r + c);
        out.charge.energy += fetch.energy;
        out.charge.cycles += fetch.cycles;
      }
      for (size_t k = 0; k < copies_.size(); ++k) {
        // Saturation is counted once per logical update, on the first copy.
        const McuResult rr = apply_opa(copies_[k], x, d);
        if (k == 0) out.saturation_events += rr.saturation_events;
        const Charge ch = cost.opa_replay(b, cfg, r, c);
        out.charge.energy += ch.energy;
        out.charge.cycles += ch.cycles;
      }
      updated = true;
    }
    pending_words_ = 0;
  }
  const Charge ch = cost.commit(b, params_.variant, cfg, r, c, updated);
  out.charge.energy += ch.energy;
  out.charge.cycles += ch.cycles;
  return out;
}

McuResult McuInstance::carry_resolve(const CostModel& cost) {
  McuResult out = halt_commit(cost);
  for (auto& m : copies_) crs(m);
  const Charge ch = cost.crs(params_.baseline, params_.variant, config(), rows(), cols());
  out.charge.energy += ch.energy;
  out.charge.cycles += ch.cycles;
  return out;
}

}  // namespace panther
