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

// Independent reference models used by the test suites. None of these call
// into the library's arithmetic; they restate the math directly.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <vector>

#include "panther/fixed_point.hpp"

namespace oracle {

// Weight binary point; data is Q8.8.
inline constexpr int kWFrac = panther::kWeightFormat.frac_bits;

inline int64_t clamp32(int64_t v) {
  if (v > INT32_MAX) return INT32_MAX;
  if (v < INT32_MIN) return INT32_MIN;
  return v;
}

inline int16_t clamp16(int64_t v) {
  if (v > INT16_MAX) return INT16_MAX;
  if (v < INT16_MIN) return INT16_MIN;
  return static_cast<int16_t>(v);
}

// Round-to-nearest, ties to even, of v / 2^k (k >= 1), via long division.
inline int64_t div_pow2_half_even(int64_t v, int k) {
  const int64_t den = int64_t{1} << k;
  int64_t q = v / den;
  int64_t r = v % den;
  if (r < 0) {
    r += den;
    q -= 1;
  }
  if (2 * r > den || (2 * r == den && (q % 2 != 0))) q += 1;
  return q;
}

// Weight update with the learning-rate shift applied to |d| first.
inline std::vector<int32_t> outer_accumulate(const std::vector<int32_t>& w, int rows, int cols,
                                             const std::vector<int16_t>& x, const std::vector<int16_t>& d,
                                             int lr_shift) {
  std::vector<int32_t> out = w;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int64_t dm = (std::llabs(d[j]) << (kWFrac - 16)) >> lr_shift;
      int64_t prod = static_cast<int64_t>(std::llabs(x[i])) * dm;
      if ((x[i] < 0) != (d[j] < 0)) prod = -prod;
      out[i * cols + j] = static_cast<int32_t>(clamp32(w[i * cols + j] + prod));
    }
  }
  return out;
}

// Q8.8 x weight matvec requantized to Q8.8.
inline std::vector<int16_t> matvec(const std::vector<int32_t>& w, int rows, int cols, const std::vector<int16_t>& x) {
  std::vector<int16_t> out(cols);
  for (int j = 0; j < cols; ++j) {
    int64_t acc = 0;
    for (int i = 0; i < rows; ++i) acc += static_cast<int64_t>(x[i]) * w[i * cols + j];
    out[j] = clamp16(div_pow2_half_even(acc, kWFrac));
  }
  return out;
}

inline std::vector<int32_t> transpose(const std::vector<int32_t>& w, int rows, int cols) {
  std::vector<int32_t> t(w.size());
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) t[j * rows + i] = w[i * cols + j];
  return t;
}

// Matvec with rows split into 128-row blocks; each block is requantized
// separately and the block results are summed (no saturation assumed).
inline std::vector<int16_t> blocked_matvec(const std::vector<int32_t>& w, int rows, int cols,
                                           const std::vector<int16_t>& x, int block = 128) {
  std::vector<int64_t> acc(cols, 0);
  for (int r0 = 0; r0 < rows; r0 += block) {
    const int n = std::min(block, rows - r0);
    for (int j = 0; j < cols; ++j) {
      int64_t s = 0;
      for (int i = r0; i < r0 + n; ++i) s += static_cast<int64_t>(x[i]) * w[i * cols + j];
      acc[j] += div_pow2_half_even(s, kWFrac);
    }
  }
  std::vector<int16_t> out(cols);
  for (int j = 0; j < cols; ++j) out[j] = clamp16(acc[j]);
  return out;
}

inline std::vector<int16_t> relu(std::vector<int16_t> v) {
  for (auto& e : v) e = e > 0 ? e : 0;
  return v;
}

// Direct convolution, HWC layout, square input of side h with c channels,
// m filters of side k, zero padding pad, stride 1. Weight row index is
// (r*k + s)*c + ch, column is the filter.
struct Conv {
  int c, m, h, k, pad;
  int e() const { return h + 2 * pad - k + 1; }
  int rows() const { return c * k * k; }
  bool inside(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < h; }

  std::vector<int16_t> forward(const std::vector<int32_t>& w, const std::vector<int16_t>& in) const {
    std::vector<int16_t> out(static_cast<size_t>(e()) * e() * m);
    for (int py = 0; py < e(); ++py)
      for (int px = 0; px < e(); ++px)
        for (int f = 0; f < m; ++f) {
          int64_t acc = 0;
          for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s)
              for (int ch = 0; ch < c; ++ch) {
                const int y = py + r - pad, x = px + s - pad;
                if (!inside(y, x)) continue;
                acc += static_cast<int64_t>(in[(y * h + x) * c + ch]) * w[((r * k + s) * c + ch) * m + f];
              }
          out[(py * e() + px) * m + f] = clamp16(div_pow2_half_even(acc, kWFrac));
        }
    return out;
  }

  // Input gradient: each output pixel's transposed product is requantized,
  // then contributions are summed per input element.
  std::vector<int16_t> backward(const std::vector<int32_t>& w, const std::vector<int16_t>& delta) const {
    std::vector<int64_t> acc(static_cast<size_t>(h) * h * c, 0);
    for (int py = 0; py < e(); ++py)
      for (int px = 0; px < e(); ++px)
        for (int r = 0; r < k; ++r)
          for (int s = 0; s < k; ++s)
            for (int ch = 0; ch < c; ++ch) {
              const int y = py + r - pad, x = px + s - pad;
              if (!inside(y, x)) continue;
              int64_t v = 0;
              for (int f = 0; f < m; ++f)
                v += static_cast<int64_t>(delta[(py * e() + px) * m + f]) * w[((r * k + s) * c + ch) * m + f];
              acc[(y * h + x) * c + ch] += div_pow2_half_even(v, kWFrac);
            }
    std::vector<int16_t> out(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out[i] = clamp16(acc[i]);
    return out;
  }

  // Weight update accumulated over every output pixel.
  std::vector<int32_t> update(std::vector<int32_t> w, const std::vector<int16_t>& in,
                              const std::vector<int16_t>& delta, int lr_shift) const {
    for (int py = 0; py < e(); ++py)
      for (int px = 0; px < e(); ++px) {
        std::vector<int16_t> patch(rows(), 0), d(m);
        for (int r = 0; r < k; ++r)
          for (int s = 0; s < k; ++s)
            for (int ch = 0; ch < c; ++ch) {
              const int y = py + r - pad, x = px + s - pad;
              if (inside(y, x)) patch[(r * k + s) * c + ch] = in[(y * h + x) * c + ch];
            }
        for (int f = 0; f < m; ++f) d[f] = delta[(py * e() + px) * m + f];
        w = outer_accumulate(w, rows(), m, patch, d, lr_shift);
      }
    return w;
  }
};

}  // namespace oracle
