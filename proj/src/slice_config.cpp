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

#include "panther/slice_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>

#include "panther/errors.hpp"

namespace panther {

SliceConfig::SliceConfig(std::vector<SliceSpec> msb_to_lsb, int weight_bits, int p, int m)
    : slices_(std::move(msb_to_lsb)), weight_bits_(weight_bits), p_(p), m_(m) {
  if (slices_.empty()) throw ConfigError("slice config has no slices");
  if (weight_bits_ < 2 || weight_bits_ > 32) throw ConfigError("weight_bits must be in [2, 32]");
  if (m_ < 1 || 16 % m_ != 0) throw ConfigError("row_stream_bits m must divide 16");
  int total = 0;
  int widest = 0;
  for (const auto& s : slices_) {
    if (s.nominal_bits < 1 || s.nominal_bits > kMaxNominalBits)
      throw ConfigError("nominal bits per slice must be in [1, 6]");
    if (s.stored_bits() < 1 || s.stored_bits() > kMaxStoredBits)
      throw ConfigError("stored bits per slice must be in [1, 15]");
    total += s.nominal_bits;
    widest = std::max(widest, s.nominal_bits);
  }
  if (total != weight_bits_) throw ConfigError("nominal bits must sum to weight_bits");
  if (p_ == 0) p_ = widest;
  if (p_ < widest) throw ConfigError("column input bits p narrower than a slice");

  positions_.assign(slices_.size(), 0);
  int pos = 0;
  for (int s = size() - 1; s >= 0; --s) {
    positions_[s] = pos;
    pos += slices_[s].nominal_bits;
  }

  // Canonical digits are balanced residues below the top slice, which may
  // use its full stored range.
  int64_t lo = 0;
  int64_t hi = 0;
  for (int s = 0; s < size(); ++s) {
    const int64_t scale = int64_t{1} << positions_[s];
    const int64_t zp = int64_t{1} << (stored_bits(s) - 1);
    const int64_t mod = int64_t{1} << slices_[s].nominal_bits;
    if (s == 0 || slices_[s].carry_bits < 0) {
      lo += -zp * scale;
      hi += (zp - 1) * scale;
    } else {
      lo += -(mod / 2) * scale;
      hi += (mod / 2 - 1) * scale;
    }
  }
  min_weight_ = std::max(lo, -(int64_t{1} << (weight_bits_ - 1)));
  max_weight_ = std::min(hi, (int64_t{1} << (weight_bits_ - 1)) - 1);
}

int SliceConfig::total_stored_bits() const {
  return std::accumulate(slices_.begin(), slices_.end(), 0,
                         [](int acc, const SliceSpec& s) { return acc + s.stored_bits(); });
}

std::string SliceConfig::name() const {
  bool digits = std::all_of(slices_.begin(), slices_.end(), [&](const SliceSpec& s) {
    return s.nominal_bits == slices_.front().nominal_bits && s.stored_bits() <= 9;
  });
  std::string out;
  if (digits && weight_bits_ == 32) {
    for (const auto& s : slices_) out.push_back(static_cast<char>('0' + s.stored_bits()));
    return out;
  }
  for (size_t i = 0; i < slices_.size(); ++i) {
    if (i) out.push_back('-');
    out += std::to_string(slices_[i].nominal_bits) + "+" + std::to_string(slices_[i].carry_bits);
  }
  return out;
}

nlohmann::json SliceConfig::to_json() const {
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& s : slices_) slices.push_back({{"nominal", s.nominal_bits}, {"carry", s.carry_bits}});
  return {{"slices", slices}, {"p", p_}, {"m", m_}, {"weight_bits", weight_bits_}};
}

SliceConfig SliceConfig::from_json(const nlohmann::json& doc) {
  try {
    std::vector<SliceSpec> slices;
    for (const auto& s : doc.at("slices"))
      slices.push_back({s.at("nominal").get<int>(), s.value("carry", 0)});
    return SliceConfig(std::move(slices), doc.value("weight_bits", 32), doc.value("p", 0),
                       doc.value("m", 1));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad slice config document: ") + e.what());
  }
}

SliceConfig heterogeneous_config(std::string_view stored_widths, int weight_bits) {
  const int n = static_cast<int>(stored_widths.size());
  if (n == 0 || weight_bits % n != 0)
    throw ConfigError("slice count must divide weight_bits: " + std::string(stored_widths));
  const int nominal = weight_bits / n;
  std::vector<SliceSpec> slices;
  for (char c : stored_widths) {
    if (!std::isdigit(static_cast<unsigned char>(c)) || c == '0')
      throw ConfigError("bad stored width in '" + std::string(stored_widths) + "'");
    slices.push_back({nominal, (c - '0') - nominal});
  }
  return SliceConfig(std::move(slices), weight_bits);
}

SliceConfig uniform_config(int stored_bits) {
  if (stored_bits < 1 || stored_bits > SliceConfig::kMaxStoredBits)
    throw ConfigError("uniform stored width out of range");
  return SliceConfig(std::vector<SliceSpec>(8, SliceSpec{4, stored_bits - 4}), 32, 4, 1);
}

SliceConfig fig3f_config() {
  static constexpr int kCarry[16] = {1, 1, 1, 2, 2, 2, 2, 3, 3, 2, 2, 2, 2, 2, 2, 1};
  std::vector<SliceSpec> slices;
  for (int c : kCarry) slices.push_back({2, c});
  return SliceConfig(std::move(slices), 32, 2, 1);
}

SliceConfig mvm_only_config() {
  return SliceConfig(std::vector<SliceSpec>(16, SliceSpec{2, 0}), 32, 2, 1);
}

SliceConfig SliceConfig::parse(std::string_view text) {
  if (text == "16x2") return mvm_only_config();
  if (text == "fig3f") return fig3f_config();
  if (text.rfind("uniform:", 0) == 0) {
    int k = 0;
    auto rest = text.substr(8);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec != std::errc() || ptr != rest.data() + rest.size())
      throw ConfigError("bad uniform preset: " + std::string(text));
    return uniform_config(k);
  }
  if (!text.empty() && std::all_of(text.begin(), text.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return heterogeneous_config(text);
  if (!text.empty() && text.front() == '{') {
    try {
      return from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad slice config JSON: ") + e.what());
    }
  }
  std::ifstream in{std::string(text)};
  if (!in) throw ConfigError("unknown slice preset or unreadable file: " + std::string(text));
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad slice config JSON: ") + e.what());
  }
}

}  // namespace panther
