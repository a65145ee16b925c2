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

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace panther {

enum class Activation : uint8_t { kNone, kRelu, kSigmoid };

Activation parse_activation(std::string_view text);
std::string_view activation_name(Activation a);

/// A dense layer (in -> out) or a stride-1 square convolution with C input
/// channels, M filters, H x H input, R x R kernel and `pad` zeros per border.
/// Feature maps are pixel-major with channels contiguous.
struct LayerSpec {
  enum class Type : uint8_t { kDense, kConv };
  Type type = Type::kDense;
  int in = 0;
  int out = 0;
  int channels = 0;
  int filters = 0;
  int size = 0;
  int kernel = 0;
  int pad = 0;
  Activation activation = Activation::kRelu;

  static LayerSpec dense(int in, int out, Activation act);
  static LayerSpec conv(int channels, int filters, int size, int kernel, int pad, Activation act);

  int output_side() const { return size + 2 * pad - kernel + 1; }
  int input_len() const;
  int output_len() const;
  int weight_rows() const;
  int weight_cols() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;

  int input_len() const { return layers.front().input_len(); }
  int output_len() const { return layers.back().output_len(); }
  void validate() const;

  static ModelSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// A preset name or a path to a JSON file.
  static ModelSpec load(std::string_view name_or_path);
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// 1024 -> 256 -> 512 -> 512 -> 10.
ModelSpec mlp_l4();
/// Dense stack with the given widths; hidden layers use `hidden`.
ModelSpec mlp(const std::vector<int>& widths, Activation hidden = Activation::kRelu, std::string name = "mlp");
/// Four 3x3 convolutions over a 12x12 single-channel input, then a classifier.
ModelSpec cnn4();

}  // namespace panther
