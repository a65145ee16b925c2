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

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "panther/fixed_point.hpp"

using namespace panther;

TEST_CASE("round_shift_right rounds half to even") {
  CHECK(round_shift_right(5, 1) == 2);   // 2.5 -> 2
  CHECK(round_shift_right(7, 1) == 4);   // 3.5 -> 4
  CHECK(round_shift_right(-5, 1) == -2);
  CHECK(round_shift_right(-7, 1) == -4);
  CHECK(round_shift_right(6, 2) == 2);   // 1.5 -> 2
  CHECK(round_shift_right(3, 0) == 3);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20000; ++k) {
    const int64_t v = static_cast<int64_t>(rng() % (1ull << 40)) - (int64_t{1} << 39);
    const int sh = 1 + static_cast<int>(rng() % 20);
    REQUIRE(round_shift_right(v, sh) == oracle::div_pow2_half_even(v, sh));
  }
}

TEST_CASE("quantize saturates and rounds") {
  CHECK(quantize(1.0, kDataFormat) == 256);
  CHECK(quantize(-0.5, kDataFormat) == -128);
  CHECK(quantize(1000.0, kDataFormat) == INT16_MAX);
  CHECK(quantize(-1000.0, kDataFormat) == INT16_MIN);
  CHECK(quantize(1.0 / 512, kDataFormat) == 0);  // tie to even
  CHECK(quantize(3.0 / 512, kDataFormat) == 2);
}

TEST_CASE("FixedPoint enforces width and format") {
  CHECK_THROWS_AS(FixedPoint(40000, kDataFormat), RangeError);
  FixedPoint a = FixedPoint::from_double(1.5, kDataFormat);
  FixedPoint b = FixedPoint::from_double(0.25, kDataFormat);
  CHECK((a + b).to_double() == doctest::Approx(1.75));
  CHECK_THROWS_AS(a + FixedPoint::from_double(1.0, kWeightFormat), RangeError);
  CHECK(a.rescaled(kWeightFormat).raw() == 3 << (kWeightFormat.frac_bits - 1));
  CHECK(FixedPoint(100, kWeightFormat).rescaled(kDataFormat).raw() == 0);
}
