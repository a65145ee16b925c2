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
#include <span>
#include <string>
#include <vector>

#include "panther/fixed_point.hpp"
#include "panther/slice_config.hpp"

namespace panther {

inline constexpr int kCrossbarDim = 128;

/// How slicing treats a value a slice cannot hold.
enum class SlicePolicy {
  kStrict,    // raise RangeError
  kSaturate,  // clip the digit and count the cell as clipped
};

struct SliceStats {
  std::vector<uint64_t> saturation_events;  // per slice, storage order
  uint64_t opa_count = 0;
  uint64_t crs_count = 0;
  uint64_t clipped_cells = 0;  // digits clipped while slicing or resolving carries
};

/// A weight matrix held as per-slice arrays of biased unsigned cells.
class SlicedMatrix {
 public:
  SlicedMatrix(SliceConfig cfg, int rows, int cols);

  const SliceConfig& config() const { return cfg_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const SliceStats& stats() const { return stats_; }
  SliceStats& mutable_stats() { return stats_; }

  uint16_t stored(int s, int i, int j) const { return cells_[s][index(i, j)]; }
  void set_stored(int s, int i, int j, uint16_t v) { cells_[s][index(i, j)] = v; }
  int64_t digit(int s, int i, int j) const {
    return static_cast<int64_t>(stored(s, i, j)) - cfg_.zero_point(s);
  }
  const std::vector<uint16_t>& slice_cells(int s) const { return cells_[s]; }
  std::vector<uint16_t>& slice_cells(int s) { return cells_[s]; }

  /// Unclamped value the slices currently encode.
  int64_t effective(int i, int j) const;

  /// Per-cell write counters (one per slice cell). Off unless enabled.
  void enable_write_tracking();
  bool tracks_writes() const { return !writes_.empty(); }
  const std::vector<uint32_t>& writes(int s) const { return writes_.at(s); }
  void note_write(int s, size_t idx) {
    if (!writes_.empty()) ++writes_[s][idx];
  }

  size_t index(int i, int j) const { return static_cast<size_t>(i) * cols_ + j; }

  /// Cells equal and configs equal; statistics are ignored.
  bool same_cells(const SlicedMatrix& o) const { return cfg_ == o.cfg_ && cells_ == o.cells_; }

 private:
  SliceConfig cfg_;
  int rows_;
  int cols_;
  std::vector<std::vector<uint16_t>> cells_;
  std::vector<std::vector<uint32_t>> writes_;
  SliceStats stats_;
};

SlicedMatrix slice_weights(const WeightMatrix& w, const SliceConfig& cfg,
                           SlicePolicy policy = SlicePolicy::kStrict);

WeightMatrix reconstruct(const SlicedMatrix& m);

/// True when every slice holds its canonical digit for the encoded value,
/// i.e. no carry has accumulated since the last slicing or CRS.
bool is_canonical(const SlicedMatrix& m);

struct OpaOutcome {
  uint64_t saturation_events = 0;
  int cycles = 0;
};

/// W += x * d^T with |d| right-shifted by `lr_shift`, streamed bit-serially.
/// A negative `lr_shift` disables the update entirely (zero learning rate).
OpaOutcome opa_bitsliced(SlicedMatrix& m, std::span<const int16_t> x, std::span<const int16_t> d,
                         int lr_shift);

/// ADC resolution that makes every per-cycle, per-slice conversion exact for
/// a crossbar with `fan_in` driven lines.
int lossless_adc_bits(const SliceConfig& cfg, int fan_in);

enum class Evaluation { kAuto, kBitSerial };

DataVector mvm_bitsliced(const SlicedMatrix& m, std::span<const int16_t> x, int adc_bits,
                         Evaluation eval = Evaluation::kAuto);
DataVector mtvm_bitsliced(const SlicedMatrix& m, std::span<const int16_t> d, int adc_bits,
                          Evaluation eval = Evaluation::kAuto);

/// Carry resolution: re-encode every cell canonically from its clamped value.
/// Returns the number of cells whose value had to be clipped.
uint64_t crs(SlicedMatrix& m);

struct SaturationSnapshot {
  std::vector<double> fraction;     // per slice, storage order
  std::vector<uint64_t> events;     // cumulative, per slice
  std::vector<uint64_t> saturated;  // cells at a bound, per slice
  uint64_t cells = 0;               // cells per slice

  /// Pools another matrix's counts (same slice count) into this snapshot.
  void merge(const SaturationSnapshot& o);
  /// Fraction for the slice of significance rank `rank` (0 = lowest order).
  double by_rank(int rank) const { return fraction.at(fraction.size() - 1 - rank); }
};

SaturationSnapshot saturation_stats(const SlicedMatrix& m);

/// Per-slice saturation sampled over training steps.
class SaturationTimeline {
 public:
  void record(int64_t step, SaturationSnapshot snap);
  const std::vector<int64_t>& steps() const { return steps_; }
  const std::vector<SaturationSnapshot>& samples() const { return samples_; }
  bool empty() const { return steps_.empty(); }
  /// Mean over samples of the slice at significance rank `rank`.
  double mean_fraction(int rank) const;
  /// Tidy CSV: step,slice,saturated_fraction with slice 0 the lowest order.
  std::string to_csv() const;

 private:
  std::vector<int64_t> steps_;
  std::vector<SaturationSnapshot> samples_;
};

}  // namespace panther
