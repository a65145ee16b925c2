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

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "panther/errors.hpp"

namespace panther {

/// Two's-complement fixed-point layout: `total_bits` wide, `frac_bits` of
/// which sit right of the binary point.
struct QFormat {
  int total_bits = 16;
  int frac_bits = 8;

  constexpr int64_t min_raw() const { return -(int64_t{1} << (total_bits - 1)); }
  constexpr int64_t max_raw() const { return (int64_t{1} << (total_bits - 1)) - 1; }
  constexpr bool contains(int64_t raw) const { return raw >= min_raw() && raw <= max_raw(); }

  friend constexpr bool operator==(const QFormat&, const QFormat&) = default;
};

#ifndef PANTHER_WEIGHT_FRAC_BITS
#define PANTHER_WEIGHT_FRAC_BITS 27
#endif

// Activations and errors travel as Q8.8. Weights are 32 bits with a build-time
// binary point, Q5.27 unless PANTHER_WEIGHT_FRAC_BITS says otherwise.
inline constexpr QFormat kDataFormat{16, 8};
inline constexpr QFormat kWeightFormat{32, PANTHER_WEIGHT_FRAC_BITS};

// Left shift taking a data-times-data product onto the weight binary point.
inline constexpr int kUpdateShift = kWeightFormat.frac_bits - 2 * kDataFormat.frac_bits;
static_assert(kUpdateShift >= 0 && kWeightFormat.frac_bits < 31, "weight format must hold a data product");

/// Arithmetic shift right by `shift` bits, rounding half to even.
constexpr int64_t round_shift_right(int64_t v, int shift) {
  if (shift <= 0) return v << (-shift);
  const int64_t floor_q = v >> shift;  // arithmetic: floor division
  const int64_t rem = v - (floor_q << shift);
  const int64_t half = int64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (floor_q & 1))) return floor_q + 1;
  return floor_q;
}

constexpr int64_t saturate(int64_t v, QFormat fmt) {
  if (v < fmt.min_raw()) return fmt.min_raw();
  if (v > fmt.max_raw()) return fmt.max_raw();
  return v;
}

/// Column operand of an OPA after learning-rate scaling, in weight units per
/// unit of row input: (|d| << kUpdateShift) >> lr_shift, truncating.
constexpr int64_t update_magnitude(int16_t d, int lr_shift) {
  const int64_t mag = (d < 0 ? -int64_t{d} : int64_t{d}) << kUpdateShift;
  return lr_shift >= 48 ? 0 : mag >> lr_shift;
}

constexpr int16_t saturate16(int64_t v) { return static_cast<int16_t>(saturate(v, kDataFormat)); }
constexpr int32_t saturate32(int64_t v) { return static_cast<int32_t>(saturate(v, kWeightFormat)); }

/// Round-half-even quantization of a real value, saturating at the range.
inline int64_t quantize(double value, QFormat fmt) {
  const double scaled = std::nearbyint(std::ldexp(value, fmt.frac_bits));
  if (!(scaled >= static_cast<double>(fmt.min_raw()))) return fmt.min_raw();
  if (scaled > static_cast<double>(fmt.max_raw())) return fmt.max_raw();
  return static_cast<int64_t>(scaled);
}

class FixedPoint {
 public:
  constexpr FixedPoint() = default;
  FixedPoint(int64_t raw, QFormat fmt) : raw_(raw), fmt_(fmt) {
    if (!fmt.contains(raw)) throw RangeError("raw value does not fit the fixed-point width");
  }

  static FixedPoint from_double(double value, QFormat fmt) { return {quantize(value, fmt), fmt}; }

  constexpr int64_t raw() const { return raw_; }
  constexpr QFormat format() const { return fmt_; }
  double to_double() const { return std::ldexp(static_cast<double>(raw_), -fmt_.frac_bits); }

  /// Moves to another format, rounding half-even and saturating.
  FixedPoint rescaled(QFormat to) const {
    const int64_t moved = round_shift_right(raw_, fmt_.frac_bits - to.frac_bits);
    return {saturate(moved, to), to};
  }

  FixedPoint operator+(const FixedPoint& o) const {
    if (!(fmt_ == o.fmt_)) throw RangeError("fixed-point formats differ; rescale first");
    return {saturate(raw_ + o.raw_, fmt_), fmt_};
  }

  friend bool operator==(const FixedPoint&, const FixedPoint&) = default;

 private:
  int64_t raw_ = 0;
  QFormat fmt_ = kDataFormat;
};

/// Raw Q8.8 vector, the unit every register, buffer and MCU port holds.
using DataVector = std::vector<int16_t>;

/// Dense weight matrix in kWeightFormat. Rows are crossbar rows (layer inputs), columns are
/// crossbar columns (layer outputs).
struct WeightMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int32_t> raw;

  WeightMatrix() = default;
  WeightMatrix(int r, int c) : rows(r), cols(c), raw(static_cast<size_t>(r) * c, 0) {}

  int32_t& at(int i, int j) { return raw[static_cast<size_t>(i) * cols + j]; }
  int32_t at(int i, int j) const { return raw[static_cast<size_t>(i) * cols + j]; }

  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;
};

inline DataVector to_data_vector(const std::vector<double>& values) {
  DataVector out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = static_cast<int16_t>(quantize(values[i], kDataFormat));
  return out;
}

inline double data_to_double(int16_t raw) { return std::ldexp(static_cast<double>(raw), -kDataFormat.frac_bits); }

}  // namespace panther
