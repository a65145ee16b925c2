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
#include <string_view>
#include <utility>
#include <vector>

#include "panther/compiler.hpp"
#include "panther/simulator.hpp"

namespace panther {

/// Labelled Q8.8 feature vectors.
struct Dataset {
  int features = 0;
  int classes = 0;
  std::vector<DataVector> x;
  std::vector<int> y;

  size_t size() const { return x.size(); }
  /// Throws ShapeError unless the data fits the model's input and output.
  void check(const ModelSpec& model) const;
};

struct ClusterSpec {
  int features = 64;
  int classes = 10;
  double separation = 1.0;  // scale of the class means
  double noise = 1.0;       // per-feature standard deviation
  uint64_t seed = 1;
};

/// Gaussian clusters: class means drawn once from `seed`, samples drawn from
/// `sample_seed`. Same spec and different sample seeds give i.i.d. splits.
Dataset gaussian_clusters(const ClusterSpec& spec, int samples, uint64_t sample_seed);

/// CSV with a header line `label,f0,f1,...`; one sample per line, real-valued
/// features quantized to Q8.8.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& d, const std::string& path);

enum class Backend { kFunctionalSliced, kFullPrecisionOracle, kCompiledSimulator };
Backend parse_backend(std::string_view text);
std::string_view backend_name(Backend b);

struct TrainRun {
  ModelSpec model;
  int batch = 1;
  int steps = 1000;
  int lr_shift = 5;  // learning rate 2^-lr_shift; negative disables updates
  uint64_t seed = 1;
  SliceConfig slices = SliceConfig::parse("44466555");
  int crs_period = 1024;  // inputs between carry resolutions; 0 = never
  McuVariant variant = McuVariant::kV1;
  Baseline baseline = Baseline::kPantherV1;
  CostModel cost;
  Topology topo;
  int adc_bits = 0;
  int eval_every = 0;        // 0 = evaluate once at the end
  int saturation_every = 0;  // 0 = sample once at the end
  bool track_updates = false;
  double init_gain = 1.0;
  double divergence_loss = 50.0;  // abort once the mean batch loss exceeds this
};

struct TrainResult {
  std::vector<double> loss;                     // mean batch loss per step
  std::vector<std::pair<int, double>> accuracy;  // (step, test accuracy)
  std::vector<std::pair<int, SaturationSnapshot>> saturation;
  std::vector<double> update_fraction;  // per step: max |dW| over the layer's weight spread
  std::vector<WeightMatrix> weights;
  double final_accuracy = 0.0;
  int crs_events = 0;
  RunReport report;  // compiled_simulator only

  /// Tidy rows: step, metric, value.
  std::string to_csv() const;
};

struct LossGrad {
  double loss = 0.0;
  DataVector delta;  // one-hot minus softmax, Q8.8
};

LossGrad loss_and_grad(std::span<const int16_t> logits, int label);

/// Uniform Glorot-style initialization, quantized to the weight format.
std::vector<WeightMatrix> init_weights(const ModelSpec& model, uint64_t seed, double gain = 1.0);

TrainResult train(const TrainRun& run, Backend backend, const Dataset& train_set, const Dataset& test_set);

/// Fraction of `test` the given weights classify correctly, using exact
/// 32-bit weights.
double accuracy(const ModelSpec& model, const std::vector<WeightMatrix>& weights, const Dataset& test);

struct SweepGrid {
  std::vector<SliceConfig> slices;
  std::vector<int> crs_periods;
  std::vector<McuVariant> variants;
  std::vector<int> batches;
};

/// One training run per grid cell (functional backend for accuracy and
/// saturation, one simulated batch extrapolated for energy and time).
std::string sweep_csv(const TrainRun& base, const SweepGrid& grid, const Dataset& train_set, const Dataset& test_set);

}  // namespace panther
