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

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "panther/compiler.hpp"
#include "panther/cost_model.hpp"
#include "panther/isa.hpp"
#include "panther/mcu.hpp"

namespace panther {

struct SimOptions {
  McuVariant variant = McuVariant::kV1;
  Baseline baseline = Baseline::kPantherV1;
  CostModel cost;
  int adc_bits = 0;
  int lr_shift = 0;
  int64_t max_instructions = 2'000'000'000;
};

/// Energy and time of one or more program runs.
struct RunReport {
  std::map<int, EnergySplit> layer_energy;  // layer tag (1-based); 0 = untagged
  std::map<int, int64_t> layer_cycles;      // busy cycles per layer tag
  int64_t cycles = 0;                       // makespan, summed over runs
  int mcu_timesteps = 0;                    // summed over runs
  int64_t instructions = 0;
  int64_t spill_words = 0;
  int64_t peak_pending_words = 0;
  uint64_t saturation_events = 0;
  int runs = 0;

  EnergySplit total() const;
  int64_t peak_memory_words() const { return spill_words + peak_pending_words; }
  double seconds() const { return static_cast<double>(cycles) * 1e-9; }
  RunReport& operator+=(const RunReport& o);
  /// `k` copies of this report (energy, time and counts scale; peaks do not).
  RunReport scaled(int64_t k) const;
  nlohmann::json to_json() const;
  /// Tidy rows: layer, component, energy_pj.
  std::string to_csv() const;
};

/// Tiles, cores and MCUs of a compiled model, with shared memory and
/// registers. MCU crossbar state persists across runs.
class Machine {
 public:
  Machine(const Compiled& compiled, const std::vector<SlicedMatrix>& shards, SimOptions opt);

  const SimOptions& options() const { return opt_; }
  void write_memory(int tile, uint32_t addr, std::span<const int16_t> data);
  DataVector read_memory(int tile, uint32_t addr, int len) const;

  /// Writes a batch's inputs and one-hot labels to the I/O region.
  void load_batch(const std::vector<DataVector>& inputs, const std::vector<int>& labels);
  std::vector<DataVector> read_logits() const;

  /// Runs every core to halt.
  RunReport run(const Program& p);
  RunReport run(bool with_crs = false) { return run(with_crs ? compiled_.crs_program : compiled_.program); }

  McuInstance& mcu(int core, int k) { return *mcus_.at(core).at(k); }
  std::vector<SlicedMatrix> shard_state() const;
  int16_t reg(int core, int r) const { return regs_.at(core).at(r); }

 private:
  struct Message {
    int64_t arrival = 0;
    DataVector data;
    int tag = -1;
  };
  struct Tile {
    std::vector<int16_t> data;
    std::vector<int32_t> tags;
  };

  Tile& tile(int t);
  const Tile& tile(int t) const;
  void write_regs(int core, int r, std::span<const int16_t> v, int tag);
  int read_tag(int core, int r, int len) const;
  void check_mem(int t, uint32_t addr, int len) const;

  const Compiled& compiled_;
  SimOptions opt_;
  std::map<int, Tile> tiles_;
  std::vector<std::vector<std::unique_ptr<McuInstance>>> mcus_;
  std::vector<std::vector<int16_t>> regs_;
  std::vector<std::vector<int32_t>> reg_tags_;
};

}  // namespace panther
