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

#include "panther/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "panther/errors.hpp"
#include "panther/vfu.hpp"

namespace panther {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller; spelled out so datasets do not depend on the standard
// library's distribution implementation.
double normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int argmax(const DataVector& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

std::vector<WeightMatrix> weights_of(const PGraph& g, const std::vector<SlicedMatrix>& shards) {
  return gather_weights(g.placement, g.model, shards);
}

// Largest per-layer update relative to that layer's weight spread.
double update_fraction(const std::vector<WeightMatrix>& before, const std::vector<WeightMatrix>& after) {
  double worst = 0.0;
  for (size_t l = 0; l < before.size(); ++l) {
    const auto [lo, hi] = std::minmax_element(before[l].raw.begin(), before[l].raw.end());
    const double spread = static_cast<double>(*hi) - static_cast<double>(*lo);
    int64_t d = 0;
    for (size_t i = 0; i < before[l].raw.size(); ++i)
      d = std::max<int64_t>(d, std::abs(int64_t{after[l].raw[i]} - before[l].raw[i]));
    if (spread > 0) worst = std::max(worst, static_cast<double>(d) / spread);
  }
  return worst;
}

SaturationSnapshot pooled(const std::vector<SlicedMatrix>& shards) {
  SaturationSnapshot s;
  for (const auto& m : shards) s.merge(saturation_stats(m));
  return s;
}

}  // namespace

void Dataset::check(const ModelSpec& model) const {
  if (x.size() != y.size()) throw ShapeError("dataset has mismatched sample and label counts");
  if (features != model.input_len())
    throw ShapeError("dataset has " + std::to_string(features) + " features, model expects " +
                     std::to_string(model.input_len()));
  if (classes > model.output_len())
    throw ShapeError("dataset has " + std::to_string(classes) + " classes, model has " +
                     std::to_string(model.output_len()) + " outputs");
  for (size_t i = 0; i < x.size(); ++i) {
    if (static_cast<int>(x[i].size()) != features) throw ShapeError("sample " + std::to_string(i) + " has wrong length");
    if (y[i] < 0 || y[i] >= classes) throw ShapeError("label out of range at sample " + std::to_string(i));
  }
}

Dataset gaussian_clusters(const ClusterSpec& spec, int samples, uint64_t sample_seed) {
  if (spec.features < 1 || spec.classes < 2 || samples < 0) throw ConfigError("bad cluster dataset shape");
  std::mt19937_64 mean_rng(spec.seed);
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.features));
  for (auto& m : means)
    for (auto& v : m) v = spec.separation * normal(mean_rng);
  std::mt19937_64 rng(sample_seed);
  Dataset d;
  d.features = spec.features;
  d.classes = spec.classes;
  for (int i = 0; i < samples; ++i) {
    const int label = static_cast<int>(rng() % static_cast<uint64_t>(spec.classes));
    std::vector<double> v(spec.features);
    for (int f = 0; f < spec.features; ++f) v[f] = means[label][f] + spec.noise * normal(rng);
    d.x.push_back(to_data_vector(v));
    d.y.push_back(label);
  }
  return d;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, path + ": empty dataset");
  Dataset d;
  d.features = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (line.rfind("label", 0) != 0 || d.features < 1) throw ParseError(1, 1, path + ": header must be label,f0,f1,...");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    int label = -1;
    for (int col = 0; std::getline(ss, cell, ','); ++col) {
      try {
        size_t used = 0;
        if (col == 0) {
          label = std::stoi(cell, &used);
        } else {
          v.push_back(std::stod(cell, &used));
        }
        if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
          throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(lineno, col + 1, path + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(v.size()) != d.features) throw ParseError(lineno, 1, path + ": wrong column count");
    if (label < 0) throw ParseError(lineno, 1, path + ": negative label");
    d.classes = std::max(d.classes, label + 1);
    d.x.push_back(to_data_vector(v));
    d.y.push_back(label);
  }
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "label";
  for (int f = 0; f < d.features; ++f) out << ",f" << f;
  out << '\n';
  for (size_t i = 0; i < d.size(); ++i) {
    out << d.y[i];
    for (int16_t v : d.x[i]) out << ',' << data_to_double(v);
    out << '\n';
  }
}

Backend parse_backend(std::string_view text) {
  if (text == "functional_sliced") return Backend::kFunctionalSliced;
  if (text == "full_precision_oracle") return Backend::kFullPrecisionOracle;
  if (text == "compiled_simulator") return Backend::kCompiledSimulator;
  throw ConfigError("unknown backend '" + std::string(text) + "'");
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kFunctionalSliced:
      return "functional_sliced";
    case Backend::kFullPrecisionOracle:
      return "full_precision_oracle";
    case Backend::kCompiledSimulator:
      return "compiled_simulator";
  }
  return "?";
}

LossGrad loss_and_grad(std::span<const int16_t> logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) throw ShapeError("label out of range");
  LossGrad g;
  g.loss = softmax_cross_entropy(logits, label);
  g.delta.resize(logits.size());
  const DataVector target = one_hot(label, static_cast<int>(logits.size()));
  alu_apply(AluOp::kLossGrad, logits, target, g.delta);
  return g;
}

std::vector<WeightMatrix> init_weights(const ModelSpec& model, uint64_t seed, double gain) {
  std::mt19937_64 rng(seed);
  std::vector<WeightMatrix> out;
  for (const auto& l : model.layers) {
    WeightMatrix w(l.weight_rows(), l.weight_cols());
    const double a = gain * std::sqrt(6.0 / (l.weight_rows() + l.weight_cols()));
    for (auto& v : w.raw) v = static_cast<int32_t>(quantize((2.0 * uniform01(rng) - 1.0) * a, kWeightFormat));
    out.push_back(std::move(w));
  }
  return out;
}

double accuracy(const ModelSpec& model, const std::vector<WeightMatrix>& weights, const Dataset& test) {
  if (test.size() == 0) return 0.0;
  const PGraph g = partition(build_graph(model, 1), Topology{});
  std::vector<WeightMatrix> blocks = split_weights(g.placement, weights);
  size_t correct = 0;
  for (size_t i = 0; i < test.size(); ++i) correct += argmax(infer_exact(g, blocks, {test.x[i]})[0]) == test.y[i];
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::string TrainResult::to_csv() const {
  std::ostringstream os;
  os << "step,metric,value\n";
  for (size_t s = 0; s < loss.size(); ++s) os << s + 1 << ",loss," << loss[s] << '\n';
  for (const auto& [s, a] : accuracy) os << s << ",accuracy," << a << '\n';
  for (size_t s = 0; s < update_fraction.size(); ++s) os << s + 1 << ",update_fraction," << update_fraction[s] << '\n';
  for (const auto& [s, snap] : saturation)
    for (size_t r = 0; r < snap.fraction.size(); ++r)
      os << s << ",saturation_slice" << r << ',' << snap.by_rank(static_cast<int>(r)) << '\n';
  return os.str();
}

TrainResult train(const TrainRun& run, Backend backend, const Dataset& train_set, const Dataset& test_set) {
  run.model.validate();
  train_set.check(run.model);
  test_set.check(run.model);
  if (run.batch < 1) throw ConfigError("batch size must be at least 1");
  if (run.steps < 0) throw ConfigError("step count must be non-negative");
  if (train_set.size() == 0) throw ShapeError("empty training set");

  const PGraph g = partition(build_graph(run.model, run.batch), run.topo);
  const PGraph g1 = partition(build_graph(run.model, 1), run.topo);
  const std::vector<WeightMatrix> w0 = init_weights(run.model, run.seed, run.init_gain);
  const bool sliced = backend != Backend::kFullPrecisionOracle;

  std::vector<SlicedMatrix> shards;
  std::vector<WeightMatrix> blocks;
  if (sliced)
    shards = shard_weights(g.placement, w0, run.slices, SlicePolicy::kSaturate);
  else
    blocks = split_weights(g.placement, w0);

  std::unique_ptr<Compiled> compiled;
  std::unique_ptr<Machine> machine;
  if (backend == Backend::kCompiledSimulator) {
    CompileOptions o;
    o.batch = run.batch;
    o.variant = run.variant;
    o.topo = run.topo;
    compiled = std::make_unique<Compiled>(compile(run.model, o));
    SimOptions so;
    so.variant = run.variant;
    so.baseline = run.baseline;
    so.cost = run.cost;
    so.adc_bits = run.adc_bits;
    so.lr_shift = run.lr_shift;
    machine = std::make_unique<Machine>(*compiled, shards, so);
  }

  auto current = [&] {
    if (machine) return weights_of(g, machine->shard_state());
    if (sliced) return weights_of(g, shards);
    return join_weights(g.placement, run.model, blocks);
  };
  auto evaluate = [&] {
    if (test_set.size() == 0) return 0.0;
    size_t correct = 0;
    if (!sliced) {
      for (size_t i = 0; i < test_set.size(); ++i)
        correct += argmax(infer_exact(g1, blocks, {test_set.x[i]})[0]) == test_set.y[i];
    } else {
      std::vector<SlicedMatrix> state = machine ? machine->shard_state() : shards;
      for (size_t i = 0; i < test_set.size(); ++i)
        correct += argmax(infer(g1, state, {test_set.x[i]}, run.adc_bits)[0]) == test_set.y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
  };
  auto sample_saturation = [&](int step, TrainResult& r) {
    if (!sliced) return;
    r.saturation.emplace_back(step, pooled(machine ? machine->shard_state() : shards));
  };

  TrainResult res;
  std::mt19937_64 rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t cursor = order.size();
  int64_t processed = 0;

  for (int step = 1; step <= run.steps; ++step) {
    std::vector<DataVector> xs;
    std::vector<int> ys;
    for (int k = 0; k < run.batch; ++k) {
      if (cursor == order.size()) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        cursor = 0;
      }
      xs.push_back(train_set.x[order[cursor]]);
      ys.push_back(train_set.y[order[cursor]]);
      ++cursor;
    }
    const bool crs_now =
        run.crs_period > 0 && (processed + run.batch) / run.crs_period > processed / run.crs_period;
    processed += run.batch;
    std::vector<WeightMatrix> before;
    if (run.track_updates) before = current();

    std::vector<DataVector> logits;
    switch (backend) {
      case Backend::kFunctionalSliced:
        logits = interpret(g, shards, xs, ys, run.lr_shift, run.adc_bits);
        if (crs_now)
          for (auto& m : shards) crs(m);
        break;
      case Backend::kFullPrecisionOracle:
        logits = interpret_exact(g, blocks, xs, ys, run.lr_shift);
        break;
      case Backend::kCompiledSimulator:
        machine->load_batch(xs, ys);
        res.report += machine->run(crs_now);
        logits = machine->read_logits();
        break;
    }
    res.crs_events += crs_now && sliced;

    double loss = 0.0;
    for (int k = 0; k < run.batch; ++k) loss += loss_and_grad(logits[k], ys[k]).loss;
    loss /= run.batch;
    if (!std::isfinite(loss) || loss > run.divergence_loss)
      throw DivergenceError("loss " + std::to_string(loss) + " at step " + std::to_string(step));
    res.loss.push_back(loss);
    if (run.track_updates) res.update_fraction.push_back(update_fraction(before, current()));
    if (run.eval_every > 0 && step % run.eval_every == 0 && step != run.steps)
      res.accuracy.emplace_back(step, evaluate());
    if (run.saturation_every > 0 && step % run.saturation_every == 0 && step != run.steps)
      sample_saturation(step, res);
  }
  res.final_accuracy = evaluate();
  res.accuracy.emplace_back(run.steps, res.final_accuracy);
  sample_saturation(run.steps, res);
  res.weights = current();
  return res;
}

std::string sweep_csv(const TrainRun& base, const SweepGrid& grid, const Dataset& train_set, const Dataset& test_set) {
  if (grid.slices.empty() || grid.crs_periods.empty() || grid.variants.empty() || grid.batches.empty())
    throw ConfigError("sweep grid must be non-empty in every dimension");
  std::ostringstream os;
  os << "slices,stored_bits,crs_period,variant,batch,steps,final_accuracy,final_loss,slice0_saturation,"
        "saturation_events,crs_events,energy_pj,crs_pj,cycles\n";
  for (const auto& cfg : grid.slices)
    for (int period : grid.crs_periods)
      for (McuVariant v : grid.variants)
        for (int b : grid.batches) {
          TrainRun run = base;
          run.slices = cfg;
          run.crs_period = period;
          run.variant = v;
          run.batch = b;
          run.eval_every = 0;
          run.saturation_every = 0;
          const TrainResult r = train(run, Backend::kFunctionalSliced, train_set, test_set);

          // Energy and time do not depend on data: simulate one batch with
          // and without carry resolution and scale.
          CompileOptions o;
          o.batch = b;
          o.variant = v;
          o.topo = run.topo;
          const Compiled c = compile(run.model, o);
          SimOptions so;
          so.variant = v;
          so.baseline = run.baseline;
          so.cost = run.cost;
          so.adc_bits = run.adc_bits;
          so.lr_shift = run.lr_shift;
          const auto shards = shard_weights(c.graph.placement, init_weights(run.model, run.seed, run.init_gain), cfg,
                                          SlicePolicy::kSaturate);
          const std::vector<DataVector> xs(b, train_set.x.front());
          const std::vector<int> ys(b, train_set.y.front());
          Machine plain(c, shards, so), resolving(c, shards, so);
          plain.load_batch(xs, ys);
          resolving.load_batch(xs, ys);
          const RunReport rp = plain.run(false), rc = resolving.run(true);
          const int64_t e_plain = rp.total().total(), e_crs = rc.total().total();
          const int64_t energy = (run.steps - r.crs_events) * e_plain + r.crs_events * e_crs;
          const int64_t crs_pj = r.crs_events * rc.total().crs;
          const int64_t cycles = (run.steps - r.crs_events) * rp.cycles + r.crs_events * rc.cycles;

          const SaturationSnapshot& sat = r.saturation.back().second;
          uint64_t events = 0;
          for (uint64_t e : sat.events) events += e;
          os << cfg.name() << ',' << cfg.total_stored_bits() << ',' << period << ',' << variant_name(v) << ',' << b
             << ',' << run.steps << ',' << r.final_accuracy << ',' << (r.loss.empty() ? 0.0 : r.loss.back()) << ','
             << sat.by_rank(0) << ',' << events << ',' << r.crs_events << ',' << energy << ',' << crs_pj << ','
             << cycles << '\n';
        }
  return os.str();
}

}  // namespace panther
