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

#include "panther/graph.hpp"

#include "panther/errors.hpp"

namespace panther {
namespace {

class Builder {
 public:
  explicit Builder(Graph& g) : g_(g) {}

  int input(NodeKind k, int len, int sample) {
    Node n;
    n.kind = k;
    n.len = len;
    n.sample = sample;
    return g_.add(std::move(n));
  }
  int mcu(NodeKind k, int layer, int sample, int pixel, std::vector<int> in, int len) {
    Node n;
    n.kind = k;
    n.layer = layer;
    n.sample = sample;
    n.pixel = pixel;
    n.inputs = std::move(in);
    n.len = len;
    return g_.add(std::move(n));
  }
  int alu(AluOp op, int layer, int sample, int a, int b) {
    Node n;
    n.kind = NodeKind::kAlu;
    n.alu = op;
    n.layer = layer;
    n.sample = sample;
    n.inputs = alu_is_unary(op) ? std::vector<int>{a} : std::vector<int>{a, b};
    n.len = g_.nodes[a].len;
    return g_.add(std::move(n));
  }
  int gather(int layer, int sample, int src, std::vector<Segment> segs) {
    Node n;
    n.kind = NodeKind::kGather;
    n.layer = layer;
    n.sample = sample;
    n.inputs = {src};
    for (const auto& s : segs) n.len += s.count;
    n.segments = std::move(segs);
    return g_.add(std::move(n));
  }
  int concat(int layer, int sample, std::vector<int> parts) {
    Node n;
    n.kind = NodeKind::kConcat;
    n.layer = layer;
    n.sample = sample;
    for (int p : parts) n.len += g_.nodes[p].len;
    n.inputs = std::move(parts);
    return g_.add(std::move(n));
  }
  int output(int layer, int sample, int src) {
    Node n;
    n.kind = NodeKind::kOutput;
    n.layer = layer;
    n.sample = sample;
    n.inputs = {src};
    n.len = g_.nodes[src].len;
    return g_.add(std::move(n));
  }

 private:
  Graph& g_;
};

AluOp activation_op(Activation a) { return a == Activation::kRelu ? AluOp::kRelu : AluOp::kSigmoid; }
AluOp activation_grad(Activation a) { return a == Activation::kRelu ? AluOp::kReluGrad : AluOp::kSigmoidGrad; }

}  // namespace

int Graph::add(Node n) {
  nodes.push_back(std::move(n));
  return static_cast<int>(nodes.size()) - 1;
}

int Graph::count(NodeKind k, int sample) const {
  int c = 0;
  for (const auto& n : nodes) c += n.kind == k && (sample < 0 || n.sample == sample);
  return c;
}

std::vector<Segment> conv_patch_segments(const LayerSpec& l, int py, int px) {
  std::vector<Segment> segs;
  const int c = l.channels;
  auto push = [&](Segment s) {
    if (!segs.empty()) {
      Segment& b = segs.back();
      if (b.src == s.src && (s.src < 0 || b.offset + b.count == s.offset)) {
        b.count += s.count;
        return;
      }
    }
    segs.push_back(s);
  };
  for (int r = 0; r < l.kernel; ++r) {
    for (int s = 0; s < l.kernel; ++s) {
      const int y = py + r - l.pad, x = px + s - l.pad;
      if (y < 0 || y >= l.size || x < 0 || x >= l.size)
        push({-1, 0, c});
      else
        push({0, (y * l.size + x) * c, c});
    }
  }
  return segs;
}

std::vector<std::pair<int, int>> conv_backward_sources(const LayerSpec& l, int qy, int qx) {
  std::vector<std::pair<int, int>> out;
  const int e = l.output_side();
  for (int py = 0; py < e; ++py) {
    for (int px = 0; px < e; ++px) {
      const int r = qy - py + l.pad, s = qx - px + l.pad;
      if (r < 0 || r >= l.kernel || s < 0 || s >= l.kernel) continue;
      out.emplace_back(py * e + px, (r * l.kernel + s) * l.channels);
    }
  }
  return out;
}

Graph build_graph(const ModelSpec& model, int batch) {
  model.validate();
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  Graph g;
  g.model = model;
  g.batch = batch;
  Builder b(g);
  const int layers = static_cast<int>(model.layers.size());

  for (int k = 0; k < batch; ++k) {
    std::vector<int> xs(layers), outs(layers);
    std::vector<std::vector<int>> patches(layers);
    int x = b.input(NodeKind::kInput, model.input_len(), k);
    for (int l = 0; l < layers; ++l) {
      const LayerSpec& spec = model.layers[l];
      xs[l] = x;
      int h;
      if (spec.type == LayerSpec::Type::kDense) {
        h = b.mcu(NodeKind::kMvm, l, k, -1, {x}, spec.out);
      } else {
        const int e = spec.output_side();
        std::vector<int> pix;
        for (int p = 0; p < e * e; ++p) {
          const int patch = b.gather(l, k, x, conv_patch_segments(spec, p / e, p % e));
          patches[l].push_back(patch);
          pix.push_back(b.mcu(NodeKind::kMvm, l, k, p, {patch}, spec.filters));
        }
        h = b.concat(l, k, pix);
      }
      x = spec.activation == Activation::kNone ? h : b.alu(activation_op(spec.activation), l, k, h, -1);
      outs[l] = x;
    }

    const int last = layers - 1;
    b.output(last, k, outs[last]);
    const int label = b.input(NodeKind::kLabel, model.output_len(), k);
    g.nodes[label].layer = last;
    int delta = b.alu(AluOp::kLossGrad, last, k, outs[last], label);
    if (model.layers[last].activation != Activation::kNone)
      delta = b.alu(activation_grad(model.layers[last].activation), last, k, delta, outs[last]);

    for (int l = last; l >= 0; --l) {
      const LayerSpec& spec = model.layers[l];
      const int dl = delta;
      std::vector<int> dpix;
      if (spec.type == LayerSpec::Type::kConv) {
        const int m = spec.filters;
        for (int p = 0; p < spec.output_side() * spec.output_side(); ++p)
          dpix.push_back(b.gather(l, k, delta, {{0, p * m, m}}));
      }
      if (l > 0) {
        int dx;
        if (spec.type == LayerSpec::Type::kDense) {
          dx = b.mcu(NodeKind::kMtvm, l, k, -1, {delta}, spec.in);
        } else {
          std::vector<int> grads;
          for (size_t p = 0; p < dpix.size(); ++p)
            grads.push_back(b.mcu(NodeKind::kMtvm, l, k, static_cast<int>(p), {dpix[p]}, spec.weight_rows()));
          std::vector<int> qs;
          for (int qy = 0; qy < spec.size; ++qy) {
            for (int qx = 0; qx < spec.size; ++qx) {
              std::vector<int> parts;
              for (auto [p, off] : conv_backward_sources(spec, qy, qx))
                parts.push_back(b.gather(l, k, grads[p], {{0, off, spec.channels}}));
              if (parts.empty()) parts.push_back(b.gather(l, k, grads[0], {{-1, 0, spec.channels}}));
              for (const auto& level : reduction_plan(static_cast<int>(parts.size()))) {
                std::vector<int> next;
                for (auto [i, j] : level) next.push_back(b.alu(AluOp::kAdd, l, k, parts[i], parts[j]));
                if (parts.size() % 2) next.push_back(parts.back());
                parts = std::move(next);
              }
              qs.push_back(parts.front());
            }
          }
          dx = b.concat(l, k, qs);
        }
        const Activation prev = model.layers[l - 1].activation;
        // Activation gradient is taken from the previous layer's output.
        delta = prev == Activation::kNone ? dx : b.alu(activation_grad(prev), l - 1, k, dx, outs[l - 1]);
      }
      if (spec.type == LayerSpec::Type::kDense) {
        b.mcu(NodeKind::kOpa, l, k, -1, {xs[l], dl}, 0);
      } else {
        for (size_t p = 0; p < dpix.size(); ++p)
          b.mcu(NodeKind::kOpa, l, k, static_cast<int>(p), {patches[l][p], dpix[p]}, 0);
      }
    }
  }
  return g;
}

}  // namespace panther
