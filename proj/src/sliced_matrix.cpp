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

#include "panther/sliced_matrix.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdlib>
#include <sstream>

#include "panther/errors.hpp"

namespace panther {
namespace {

constexpr int kMaxSlices = 32;

using Wide = __int128;

int64_t clamp64(int64_t v, int64_t lo, int64_t hi) { return std::min(std::max(v, lo), hi); }

int16_t requantize_output(Wide acc) {
  // Data input times weight carries both binary points; drop the weight's.
  constexpr int kShift = kWeightFormat.frac_bits;
  Wide floor_q = acc >> kShift;
  Wide rem = acc - (floor_q << kShift);
  constexpr Wide kHalf = Wide{1} << (kShift - 1);
  if (rem > kHalf || (rem == kHalf && (floor_q & 1))) ++floor_q;
  if (floor_q > INT16_MAX) return INT16_MAX;
  if (floor_q < INT16_MIN) return INT16_MIN;
  return static_cast<int16_t>(floor_q);
}

struct Encoding {
  std::array<int64_t, kMaxSlices> digit{};
  bool clipped = false;
};

// Canonical per-slice digits for `v`, filled least significant slice first.
Encoding encode(const SliceConfig& cfg, int64_t v, SlicePolicy policy) {
  Encoding e;
  int64_t rem = v;
  for (int s = cfg.size() - 1; s >= 0; --s) {
    const int n = cfg.slice(s).nominal_bits;
    const int w = cfg.stored_bits(s);
    const int64_t lo = cfg.digit_min(s);
    const int64_t hi = cfg.digit_max(s);
    if (s == 0) {
      int64_t d = rem;
      if (d < lo || d > hi) {
        if (policy == SlicePolicy::kStrict) throw RangeError("weight exceeds the sliced range");
        d = clamp64(d, lo, hi);
        e.clipped = true;
      }
      e.digit[s] = d;
      break;
    }
    const int64_t mod = int64_t{1} << n;
    const int64_t r = rem & (mod - 1);
    // Balanced residue, leaving symmetric carry headroom in both directions.
    int64_t cand = r >= mod / 2 ? r - mod : r;
    if (w < n) {
      const int64_t alt = r - mod;
      auto dist = [&](int64_t c) { return c < lo ? lo - c : (c > hi ? c - hi : 0); };
      if (dist(alt) < dist(r)) cand = alt;
    }
    int64_t d = clamp64(cand, lo, hi);
    if (d != cand) {
      if (policy == SlicePolicy::kStrict) throw RangeError("slice too narrow for weight value");
      e.clipped = true;
    }
    e.digit[s] = d;
    rem = (rem - cand) >> n;
  }
  return e;
}

// Value a CRS re-encodes: the int32-clamped weight, pulled into the
// exactly representable range.
int64_t canonical_value(const SliceConfig& cfg, int64_t effective) {
  return clamp64(saturate32(effective), cfg.min_weight(), cfg.max_weight());
}

void check_dims(int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw DimensionError("sliced matrix must be non-empty");
  if (rows > kCrossbarDim || cols > kCrossbarDim)
    throw DimensionError("sliced matrix exceeds 128x128 crossbar");
}

}  // namespace

SlicedMatrix::SlicedMatrix(SliceConfig cfg, int rows, int cols) : cfg_(std::move(cfg)), rows_(rows), cols_(cols) {
  check_dims(rows, cols);
  if (cfg_.size() > kMaxSlices) throw ConfigError("too many slices");
  cells_.resize(cfg_.size());
  for (int s = 0; s < cfg_.size(); ++s)
    cells_[s].assign(static_cast<size_t>(rows) * cols, static_cast<uint16_t>(cfg_.zero_point(s)));
  stats_.saturation_events.assign(cfg_.size(), 0);
}

int64_t SlicedMatrix::effective(int i, int j) const {
  int64_t v = 0;
  const size_t idx = index(i, j);
  for (int s = 0; s < cfg_.size(); ++s)
    v += (static_cast<int64_t>(cells_[s][idx]) - cfg_.zero_point(s)) * (int64_t{1} << cfg_.position(s));
  return v;
}

void SlicedMatrix::enable_write_tracking() {
  writes_.assign(cfg_.size(), std::vector<uint32_t>(static_cast<size_t>(rows_) * cols_, 0));
}

SlicedMatrix slice_weights(const WeightMatrix& w, const SliceConfig& cfg, SlicePolicy policy) {
  check_dims(w.rows, w.cols);
  if (w.raw.size() != static_cast<size_t>(w.rows) * w.cols) throw DimensionError("weight storage size mismatch");
  SlicedMatrix m(cfg, w.rows, w.cols);
  const int64_t wmin = cfg.min_weight();
  const int64_t wmax = cfg.max_weight();
  for (int i = 0; i < w.rows; ++i) {
    for (int j = 0; j < w.cols; ++j) {
      int64_t v = w.at(i, j);
      const bool out_of_range = v < wmin || v > wmax;
      if (out_of_range) {
        if (policy == SlicePolicy::kStrict) throw RangeError("weight outside the sliced range");
        v = clamp64(v, wmin, wmax);
      }
      const Encoding e = encode(cfg, v, policy);
      if (e.clipped || out_of_range) ++m.mutable_stats().clipped_cells;
      for (int s = 0; s < cfg.size(); ++s)
        m.set_stored(s, i, j, static_cast<uint16_t>(e.digit[s] + cfg.zero_point(s)));
    }
  }
  return m;
}

WeightMatrix reconstruct(const SlicedMatrix& m) {
  WeightMatrix w(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) w.at(i, j) = saturate32(m.effective(i, j));
  return w;
}

bool is_canonical(const SlicedMatrix& m) {
  const SliceConfig& cfg = m.config();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const Encoding e = encode(cfg, canonical_value(cfg, m.effective(i, j)), SlicePolicy::kSaturate);
      for (int s = 0; s < cfg.size(); ++s)
        if (m.digit(s, i, j) != e.digit[s]) return false;
    }
  }
  return true;
}

OpaOutcome opa_bitsliced(SlicedMatrix& m, std::span<const int16_t> x, std::span<const int16_t> d, int lr_shift) {
  if (static_cast<int>(x.size()) != m.rows() || static_cast<int>(d.size()) != m.cols())
    throw DimensionError("OPA operand length does not match matrix");
  const SliceConfig& cfg = m.config();
  const int slices = cfg.size();
  const int step = cfg.row_stream_bits();
  const int cycles = cfg.stream_cycles();
  const uint32_t digit_mask = (uint32_t{1} << step) - 1;
  OpaOutcome out;
  out.cycles = cycles;
  ++m.mutable_stats().opa_count;
  if (lr_shift < 0) return out;

  // chunk[j][n][s]: field of slice s in update_magnitude(d_j) << (n * m).
  std::vector<int64_t> chunk(static_cast<size_t>(m.cols()) * cycles * slices, 0);
  std::vector<uint32_t> active(static_cast<size_t>(m.cols()) * cycles, 0);
  std::vector<uint8_t> dneg(m.cols(), 0);
  for (int j = 0; j < m.cols(); ++j) {
    const int64_t mag = update_magnitude(d[j], lr_shift);
    dneg[j] = d[j] < 0;
    if (mag == 0) continue;
    for (int n = 0; n < cycles; ++n) {
      const int64_t v = mag << (n * step);
      uint32_t mask = 0;
      for (int s = 0; s < slices; ++s) {
        const int64_t field = s == 0 ? (v >> cfg.position(s))
                                     : ((v >> cfg.position(s)) & ((int64_t{1} << cfg.slice(s).nominal_bits) - 1));
        chunk[(static_cast<size_t>(j) * cycles + n) * slices + s] = field;
        if (field) mask |= uint32_t{1} << s;
      }
      active[static_cast<size_t>(j) * cycles + n] = mask;
    }
  }

  std::array<int64_t, kMaxSlices> total{};
  auto& stats = m.mutable_stats();
  for (int i = 0; i < m.rows(); ++i) {
    const uint32_t xmag = static_cast<uint32_t>(std::abs(static_cast<int32_t>(x[i])));
    if (xmag == 0) continue;
    const bool xneg = x[i] < 0;
    for (int j = 0; j < m.cols(); ++j) {
      const size_t base = static_cast<size_t>(j) * cycles;
      uint32_t touched = 0;
      for (int n = 0; n < cycles; ++n) {
        const uint32_t xv = (xmag >> (n * step)) & digit_mask;
        if (!xv || !active[base + n]) continue;
        const uint32_t mask = active[base + n];
        for (uint32_t t = mask & ~touched; t; t &= t - 1) total[std::countr_zero(t)] = 0;
        touched |= mask;
        const int64_t* row = &chunk[(base + n) * slices];
        for (uint32_t t = mask; t; t &= t - 1) {
          const int s = std::countr_zero(t);
          total[s] += static_cast<int64_t>(xv) * row[s];
        }
      }
      if (!touched) continue;
      const int64_t sign = (xneg != static_cast<bool>(dneg[j])) ? -1 : 1;
      const size_t idx = m.index(i, j);
      for (uint32_t t = touched; t; t &= t - 1) {
        const int s = std::countr_zero(t);
        auto& cell = m.slice_cells(s)[idx];
        const int64_t hi = cfg.max_stored(s);
        const int64_t after = static_cast<int64_t>(cell) + sign * total[s];
        if (after >= 0 && after <= hi) {
          cell = static_cast<uint16_t>(after);
        } else {
          // Accumulation saturated somewhere: replay cycle by cycle so each
          // clamp is counted.
          int64_t c = cell;
          for (int n = 0; n < cycles; ++n) {
            const uint32_t xv = (xmag >> (n * step)) & digit_mask;
            const int64_t inc = static_cast<int64_t>(xv) * chunk[(base + n) * slices + s];
            if (!inc) continue;
            const int64_t next = c + sign * inc;
            if (next < 0 || next > hi) {
              ++stats.saturation_events[s];
              ++out.saturation_events;
              c = clamp64(next, 0, hi);
            } else {
              c = next;
            }
          }
          cell = static_cast<uint16_t>(c);
        }
        m.note_write(s, idx);
      }
    }
  }
  return out;
}

namespace {

int slice_lossless_bits(const SliceConfig& cfg, int s, int fan_in) {
  const uint64_t level = (uint64_t{1} << cfg.row_stream_bits()) - 1;
  const uint64_t peak = static_cast<uint64_t>(fan_in) * level * cfg.zero_point(s);
  return static_cast<int>(std::bit_width(peak)) + 1;
}

}  // namespace

int lossless_adc_bits(const SliceConfig& cfg, int fan_in) {
  int best = 1;
  for (int s = 0; s < cfg.size(); ++s) best = std::max(best, slice_lossless_bits(cfg, s, fan_in));
  return best;
}

namespace {

int64_t adc_convert(int64_t dot, int lossless, int adc_bits) {
  if (adc_bits >= lossless) return dot;
  const int shift = lossless - adc_bits;
  const int64_t q = clamp64(round_shift_right(dot, shift), -(int64_t{1} << (adc_bits - 1)),
                            (int64_t{1} << (adc_bits - 1)) - 1);
  return q * (int64_t{1} << shift);
}

// Shared by MVM (transpose == false: inputs on rows) and MTVM (inputs on columns).
DataVector matvec(const SlicedMatrix& m, std::span<const int16_t> in, int adc_bits, Evaluation eval, bool transpose) {
  const SliceConfig& cfg = m.config();
  const int fan_in = transpose ? m.cols() : m.rows();
  const int fan_out = transpose ? m.rows() : m.cols();
  if (static_cast<int>(in.size()) != fan_in) throw DimensionError("matvec input length does not match matrix");
  if (adc_bits < 1) throw ConfigError("adc_bits must be positive");
  const int cols = m.cols();
  std::vector<Wide> acc(fan_out, 0);

  if (eval == Evaluation::kAuto && adc_bits >= lossless_adc_bits(cfg, fan_in)) {
    std::vector<int64_t> part(fan_out);
    for (int s = 0; s < cfg.size(); ++s) {
      const auto& cells = m.slice_cells(s);
      const int64_t zp = cfg.zero_point(s);
      std::fill(part.begin(), part.end(), 0);
      int64_t in_sum = 0;
      if (!transpose) {
        for (int i = 0; i < fan_in; ++i) {
          const int64_t xi = in[i];
          if (!xi) continue;
          in_sum += xi;
          const uint16_t* row = &cells[static_cast<size_t>(i) * cols];
          for (int j = 0; j < fan_out; ++j) part[j] += xi * row[j];
        }
      } else {
        for (int j = 0; j < fan_in; ++j) in_sum += in[j];
        for (int i = 0; i < fan_out; ++i) {
          const uint16_t* row = &cells[static_cast<size_t>(i) * cols];
          int64_t sum = 0;
          for (int j = 0; j < fan_in; ++j) sum += static_cast<int64_t>(in[j]) * row[j];
          part[i] = sum;
        }
      }
      for (int o = 0; o < fan_out; ++o) acc[o] += static_cast<Wide>(part[o] - zp * in_sum) << cfg.position(s);
    }
  } else {
    const int step = cfg.row_stream_bits();
    const int64_t level_mask = (int64_t{1} << step) - 1;
    std::vector<int64_t> mag(fan_in);
    std::vector<int8_t> sgn(fan_in);
    for (int k = 0; k < fan_in; ++k) {
      mag[k] = std::abs(static_cast<int64_t>(in[k]));
      sgn[k] = in[k] < 0 ? -1 : 1;
    }
    for (int s = 0; s < cfg.size(); ++s) {
      const int lossless = slice_lossless_bits(cfg, s, fan_in);
      for (int n = 0; n < cfg.stream_cycles(); ++n) {
        for (int o = 0; o < fan_out; ++o) {
          int64_t dot = 0;
          for (int k = 0; k < fan_in; ++k) {
            const int64_t level = (mag[k] >> (n * step)) & level_mask;
            if (!level) continue;
            const int64_t dig = transpose ? m.digit(s, o, k) : m.digit(s, k, o);
            dot += sgn[k] * level * dig;
          }
          acc[o] += static_cast<Wide>(adc_convert(dot, lossless, adc_bits)) << (n * step + cfg.position(s));
        }
      }
    }
  }
  DataVector out(fan_out);
  for (int o = 0; o < fan_out; ++o) out[o] = requantize_output(acc[o]);
  return out;
}

}  // namespace

DataVector mvm_bitsliced(const SlicedMatrix& m, std::span<const int16_t> x, int adc_bits, Evaluation eval) {
  return matvec(m, x, adc_bits, eval, false);
}

DataVector mtvm_bitsliced(const SlicedMatrix& m, std::span<const int16_t> d, int adc_bits, Evaluation eval) {
  return matvec(m, d, adc_bits, eval, true);
}

uint64_t crs(SlicedMatrix& m) {
  const SliceConfig& cfg = m.config();
  uint64_t clipped = 0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const int64_t v = m.effective(i, j);
      const int64_t target = canonical_value(cfg, v);
      const Encoding e = encode(cfg, target, SlicePolicy::kSaturate);
      if (e.clipped || target != saturate32(v)) ++clipped;
      const size_t idx = m.index(i, j);
      for (int s = 0; s < cfg.size(); ++s) {
        m.slice_cells(s)[idx] = static_cast<uint16_t>(e.digit[s] + cfg.zero_point(s));
        m.note_write(s, idx);
      }
    }
  }
  auto& stats = m.mutable_stats();
  ++stats.crs_count;
  stats.clipped_cells += clipped;
  return clipped;
}

void SaturationSnapshot::merge(const SaturationSnapshot& o) {
  if (fraction.empty()) {
    *this = o;
    return;
  }
  if (o.fraction.size() != fraction.size()) throw ConfigError("cannot pool saturation of different slicings");
  cells += o.cells;
  for (size_t s = 0; s < fraction.size(); ++s) {
    events[s] += o.events[s];
    saturated[s] += o.saturated[s];
    fraction[s] = cells ? static_cast<double>(saturated[s]) / static_cast<double>(cells) : 0.0;
  }
}

SaturationSnapshot saturation_stats(const SlicedMatrix& m) {
  const SliceConfig& cfg = m.config();
  SaturationSnapshot snap;
  snap.cells = static_cast<uint64_t>(m.rows()) * m.cols();
  for (int s = 0; s < cfg.size(); ++s) {
    const uint16_t hi = static_cast<uint16_t>(cfg.max_stored(s));
    const auto& cells = m.slice_cells(s);
    const auto n = static_cast<uint64_t>(std::count_if(cells.begin(), cells.end(),
                                                       [hi](uint16_t c) { return c == 0 || c == hi; }));
    snap.saturated.push_back(n);
    snap.fraction.push_back(static_cast<double>(n) / static_cast<double>(snap.cells));
    snap.events.push_back(m.stats().saturation_events[s]);
  }
  return snap;
}

void SaturationTimeline::record(int64_t step, SaturationSnapshot snap) {
  steps_.push_back(step);
  samples_.push_back(std::move(snap));
}

double SaturationTimeline::mean_fraction(int rank) const {
  if (samples_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples_) sum += s.by_rank(rank);
  return sum / static_cast<double>(samples_.size());
}

std::string SaturationTimeline::to_csv() const {
  std::ostringstream os;
  os << "step,slice,saturated_fraction\n";
  for (size_t k = 0; k < steps_.size(); ++k) {
    const auto& f = samples_[k].fraction;
    for (size_t rank = 0; rank < f.size(); ++rank) os << steps_[k] << ',' << rank << ',' << f[f.size() - 1 - rank] << '\n';
  }
  return os.str();
}

}  // namespace panther
