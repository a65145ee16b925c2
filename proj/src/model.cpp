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

#include "panther/model.hpp"

#include <fstream>

#include "panther/errors.hpp"
#include "panther/sliced_matrix.hpp"

namespace panther {

Activation parse_activation(std::string_view text) {
  if (text == "none" || text == "linear") return Activation::kNone;
  if (text == "relu") return Activation::kRelu;
  if (text == "sigmoid") return Activation::kSigmoid;
  throw UnsupportedLayerError("unknown activation: " + std::string(text));
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

LayerSpec LayerSpec::dense(int in, int out, Activation act) {
  LayerSpec l;
  l.type = Type::kDense;
  l.in = in;
  l.out = out;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::conv(int channels, int filters, int size, int kernel, int pad, Activation act) {
  LayerSpec l;
  l.type = Type::kConv;
  l.channels = channels;
  l.filters = filters;
  l.size = size;
  l.kernel = kernel;
  l.pad = pad;
  l.activation = act;
  return l;
}

int LayerSpec::input_len() const { return type == Type::kDense ? in : size * size * channels; }

int LayerSpec::output_len() const {
  if (type == Type::kDense) return out;
  const int e = output_side();
  return e * e * filters;
}

int LayerSpec::weight_rows() const { return type == Type::kDense ? in : channels * kernel * kernel; }
int LayerSpec::weight_cols() const { return type == Type::kDense ? out : filters; }

void ModelSpec::validate() const {
  if (layers.empty()) throw UnsupportedLayerError("model has no layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& s = layers[l];
    const std::string at = "layer " + std::to_string(l + 1) + ": ";
    if (s.type == LayerSpec::Type::kDense) {
      if (s.in <= 0 || s.out <= 0) throw ShapeError(at + "dimensions must be positive");
    } else {
      if (s.channels <= 0 || s.filters <= 0 || s.size <= 0 || s.kernel <= 0 || s.pad < 0)
        throw ShapeError(at + "dimensions must be positive");
      if (s.output_side() < 1) throw ShapeError(at + "kernel larger than padded input");
      if (s.pad >= s.kernel) throw UnsupportedConvError(at + "padding must be smaller than the kernel");
      if (s.weight_rows() > kCrossbarDim || s.filters > kCrossbarDim)
        throw UnsupportedConvError(at + "C*R*S and M must each fit one 128x128 crossbar");
    }
    if (l > 0 && layers[l - 1].output_len() != s.input_len())
      throw ShapeError(at + "input length " + std::to_string(s.input_len()) + " does not match previous output " +
                       std::to_string(layers[l - 1].output_len()));
  }
  if (output_len() > kCrossbarDim) throw UnsupportedLayerError("more than 128 output classes");
}

ModelSpec ModelSpec::from_json(const nlohmann::json& doc) {
  ModelSpec m;
  try {
    m.name = doc.value("name", std::string("model"));
    for (const auto& j : doc.at("layers")) {
      const std::string type = j.at("type").get<std::string>();
      const Activation act = parse_activation(j.value("activation", std::string("relu")));
      if (type == "dense" || type == "fc") {
        m.layers.push_back(LayerSpec::dense(j.at("in").get<int>(), j.at("out").get<int>(), act));
      } else if (type == "conv") {
        if (j.value("stride", 1) != 1) throw UnsupportedConvError("only stride 1 is supported");
        if (j.value("dilation", 1) != 1) throw UnsupportedConvError("dilation is not supported");
        const int h = j.at("H").get<int>();
        const int r = j.at("R").get<int>();
        if (j.value("W", h) != h || j.value("S", r) != r)
          throw UnsupportedConvError("only square inputs and kernels are supported");
        LayerSpec l = LayerSpec::conv(j.at("C").get<int>(), j.at("M").get<int>(), h, r, j.value("pad", 0), act);
        if (j.contains("E") && j.at("E").get<int>() != l.output_side())
          throw ShapeError("conv output side E does not match H + 2*pad - R + 1");
        m.layers.push_back(l);
      } else {
        throw UnsupportedLayerError("unsupported layer type: " + type);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model description: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json layers_doc = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j;
    if (l.type == LayerSpec::Type::kDense) {
      j = {{"type", "dense"}, {"in", l.in}, {"out", l.out}};
    } else {
      j = {{"type", "conv"}, {"C", l.channels}, {"M", l.filters}, {"H", l.size},
           {"R", l.kernel},  {"pad", l.pad},    {"E", l.output_side()}};
    }
    j["activation"] = std::string(activation_name(l.activation));
    layers_doc.push_back(j);
  }
  return {{"name", name}, {"layers", layers_doc}};
}

ModelSpec ModelSpec::load(std::string_view name_or_path) {
  if (name_or_path == "mlp_l4") return mlp_l4();
  if (name_or_path == "cnn4") return cnn4();
  if (name_or_path == "mlp3") return mlp({128, 128, 128, 10}, Activation::kRelu, "mlp3");
  if (name_or_path == "mlp2") return mlp({64, 64, 10}, Activation::kRelu, "mlp2");
  std::ifstream in{std::string(name_or_path)};
  if (!in) throw ConfigError("no such model preset or file: " + std::string(name_or_path));
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad model JSON: ") + e.what());
  }
}

ModelSpec mlp(const std::vector<int>& widths, Activation hidden, std::string name) {
  ModelSpec m;
  m.name = std::move(name);
  for (size_t k = 0; k + 1 < widths.size(); ++k)
    m.layers.push_back(
        LayerSpec::dense(widths[k], widths[k + 1], k + 2 == widths.size() ? Activation::kNone : hidden));
  m.validate();
  return m;
}

ModelSpec mlp_l4() { return mlp({1024, 256, 512, 512, 10}, Activation::kRelu, "mlp_l4"); }

ModelSpec cnn4() {
  ModelSpec m;
  m.name = "cnn4";
  m.layers.push_back(LayerSpec::conv(1, 8, 12, 3, 0, Activation::kRelu));
  m.layers.push_back(LayerSpec::conv(8, 8, 10, 3, 0, Activation::kRelu));
  m.layers.push_back(LayerSpec::conv(8, 8, 8, 3, 0, Activation::kRelu));
  m.layers.push_back(LayerSpec::conv(8, 8, 6, 3, 0, Activation::kRelu));
  m.layers.push_back(LayerSpec::dense(128, 10, Activation::kNone));
  m.validate();
  return m;
}

}  // namespace panther
