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
#include <vector>

#include "panther/model.hpp"
#include "panther/vfu.hpp"

namespace panther {

/// A run of `count` elements taken from input `src` at `offset`; src -1 is a
/// run of zeros.
struct Segment {
  int src = -1;
  int offset = 0;
  int count = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class NodeKind : uint8_t { kInput, kLabel, kMvm, kMtvm, kOpa, kAlu, kGather, kConcat, kOutput };

/// Node of the logical training graph. Vectors may be any length here.
struct Node {
  NodeKind kind = NodeKind::kInput;
  std::vector<int> inputs;
  int len = 0;
  int layer = -1;  // 0-based
  int sample = 0;
  int pixel = -1;  // conv output pixel of an MCU op
  AluOp alu = AluOp::kAdd;
  std::vector<Segment> segments;  // gather only
};

/// Per-input training graph for a batch. Nodes are stored in topological
/// order. OPAs of one batch all read weights from the start of the batch.
struct Graph {
  ModelSpec model;
  int batch = 1;
  std::vector<Node> nodes;

  int add(Node n);
  int count(NodeKind k, int sample = -1) const;
};

/// Forward (with activations), softmax cross-entropy gradient, backward and
/// weight update for `batch` inputs.
Graph build_graph(const ModelSpec& model, int batch);

/// Patch of the conv input for output pixel (py, px): kernel rows outermost,
/// then kernel columns, then channels; out-of-bounds pixels are zeros.
std::vector<Segment> conv_patch_segments(const LayerSpec& l, int py, int px);

/// Contributions to input pixel (qy, qx) in the conv backward pass: (output
/// pixel, element offset in that pixel's patch gradient), in ascending
/// output-pixel order. The patch gradients are summed in this order.
std::vector<std::pair<int, int>> conv_backward_sources(const LayerSpec& l, int qy, int qx);

}  // namespace panther
