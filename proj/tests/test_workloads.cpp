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

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <unistd.h>

#include "panther/errors.hpp"
#include "panther/workloads.hpp"

using namespace panther;

namespace {

double to_real(int32_t w) { return std::ldexp(static_cast<double>(w), -kWeightFormat.frac_bits); }

// Float reference for a bias-free dense ReLU network with a linear output
// layer and softmax cross-entropy. w[l] is rows=inputs by cols=outputs.
double float_loss(const std::vector<std::vector<double>>& w, const std::vector<int>& dims, std::vector<double> a,
                  int label) {
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    std::vector<double> z(dims[l + 1], 0.0);
    for (int i = 0; i < dims[l]; ++i)
      for (int j = 0; j < dims[l + 1]; ++j) z[j] += a[i] * w[l][i * dims[l + 1] + j];
    if (l + 2 < dims.size())
      for (auto& v : z) v = std::max(v, 0.0);
    a = z;
  }
  double mx = a[0];
  for (double v : a) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : a) sum += std::exp(v - mx);
  return std::log(sum) + mx - a[label];
}

Dataset small_data(int samples, uint64_t sample_seed, int features = 16, int classes = 4) {
  ClusterSpec cs;
  cs.features = features;
  cs.classes = classes;
  cs.separation = 1.0;
  cs.noise = 0.5;
  cs.seed = 21;
  return gaussian_clusters(cs, samples, sample_seed);
}

std::vector<std::string> csv_row(const std::string& csv, int row) {
  std::istringstream in(csv);
  std::string line;
  for (int i = 0; i <= row; ++i) std::getline(in, line);
  std::vector<std::string> cells;
  std::istringstream ls(line);
  for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
  return cells;
}

}  // namespace

TEST_CASE("MLP-L4 instantiates 1024-256-512-512-10") {
  const ModelSpec m = mlp_l4();
  REQUIRE(m.layers.size() == 4);
  const std::vector<std::pair<int, int>> dims = {{1024, 256}, {256, 512}, {512, 512}, {512, 10}};
  for (size_t l = 0; l < dims.size(); ++l) {
    CHECK(m.layers[l].weight_rows() == dims[l].first);
    CHECK(m.layers[l].weight_cols() == dims[l].second);
  }
}

TEST_CASE("cluster datasets are reproducible and splits differ") {
  const Dataset a = small_data(50, 1), b = small_data(50, 1), c = small_data(50, 2);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x != c.x);
  CHECK(a.features == 16);
  for (int y : a.y) CHECK((y >= 0 && y < 4));
}

TEST_CASE("CSV round trip preserves Q8.8 data") {
  const Dataset a = small_data(20, 3);
  char path[] = "/tmp/panther_csv_XXXXXX";
  const int fd = mkstemp(path);
  REQUIRE(fd >= 0);
  close(fd);
  save_csv(a, path);
  const Dataset b = load_csv(path);
  CHECK(b.features == a.features);
  CHECK(b.x == a.x);
  CHECK(b.y == a.y);
  {
    std::FILE* f = std::fopen(path, "w");
    std::fputs("label,f0,f1\n1,0.5,0.25\n0,abc,1\n", f);
    std::fclose(f);
  }
  try {
    load_csv(path);
    FAIL("malformed CSV accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("abc") != std::string::npos);
  }
  std::remove(path);
}

TEST_CASE("loss gradient matches finite differences within 2 ulp") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(-900, 900);
  for (int trial = 0; trial < 200; ++trial) {
    DataVector z(10);
    for (auto& v : z) v = static_cast<int16_t>(pick(rng));
    const int label = static_cast<int>(rng() % 10);
    const LossGrad g = loss_and_grad(z, label);
    auto ce = [&](int k, double eps) {
      std::vector<double> r(10);
      for (int i = 0; i < 10; ++i) r[i] = data_to_double(z[i]) + (i == k ? eps : 0.0);
      double mx = *std::max_element(r.begin(), r.end()), s = 0.0;
      for (double v : r) s += std::exp(v - mx);
      return std::log(s) + mx - r[label];
    };
    CHECK(g.loss == doctest::Approx(ce(0, 0.0)).epsilon(1e-6));
    for (int k = 0; k < 10; ++k) {
      const double fd = (ce(k, 1e-5) - ce(k, -1e-5)) / 2e-5;
      REQUIRE(std::abs(data_to_double(g.delta[k]) + fd) <= 2.0 / 256);
    }
  }
  DataVector sure(10, -30 * 256);
  sure[3] = 30 * 256;
  for (int16_t v : loss_and_grad(sure, 3).delta) CHECK(std::abs(v) <= 1);
}

TEST_CASE("oracle weight updates match finite-difference gradients") {
  // 4-4-3 network: 28 weights.
  const std::vector<int> dims = {4, 4, 3};
  const ModelSpec model = mlp(dims);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WeightMatrix> w;
    std::vector<std::vector<double>> wr;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
      WeightMatrix m(dims[l], dims[l + 1]);
      std::vector<double> r;
      for (auto& v : m.raw) {
        v = static_cast<int32_t>(quantize(u(rng), kWeightFormat));
        r.push_back(to_real(v));
      }
      w.push_back(m);
      wr.push_back(r);
    }
    DataVector x(4);
    std::vector<double> xr(4);
    for (int i = 0; i < 4; ++i) {
      x[i] = static_cast<int16_t>(quantize(u(rng), kDataFormat));
      xr[i] = data_to_double(x[i]);
    }
    const int label = static_cast<int>(rng() % 3);

    const PGraph g = partition(build_graph(model, 1), Topology{});
    std::vector<WeightMatrix> blocks = split_weights(g.placement, w);
    interpret_exact(g, blocks, {x}, {label}, 0);
    const std::vector<WeightMatrix> after = join_weights(g.placement, model, blocks);

    for (size_t l = 0; l < wr.size(); ++l) {
      for (size_t k = 0; k < wr[l].size(); ++k) {
        auto plus = wr, minus = wr;
        plus[l][k] += 1e-6;
        minus[l][k] -= 1e-6;
        const double grad = (float_loss(plus, dims, xr, label) - float_loss(minus, dims, xr, label)) / 2e-6;
        const double step = to_real(after[l].raw[k]) - to_real(w[l].raw[k]);
        REQUIRE(std::abs(step + grad) <= 0.03);
      }
    }
  }
}

TEST_CASE("disabled learning rate keeps weights and loss constant") {
  const Dataset d = small_data(8, 5);
  TrainRun run;
  run.model = mlp({16, 8, 4});
  run.batch = 8;
  run.steps = 6;
  run.lr_shift = -1;
  for (Backend b : {Backend::kFunctionalSliced, Backend::kFullPrecisionOracle, Backend::kCompiledSimulator}) {
    const TrainResult r = train(run, b, d, d);
    CHECK(r.weights == init_weights(run.model, run.seed));
    for (double l : r.loss) CHECK(l == doctest::Approx(r.loss.front()).epsilon(1e-12));
  }
}

TEST_CASE("functional and compiled simulator backends are bit-exact") {
  const Dataset tr = small_data(64, 7), te = small_data(16, 8);
  for (McuVariant v : {McuVariant::kV1, McuVariant::kV2, McuVariant::kV3}) {
    TrainRun run;
    run.model = mlp({16, 12, 4});
    run.batch = 3;
    run.steps = 25;
    run.lr_shift = 4;
    run.crs_period = 16;
    run.variant = v;
    const TrainResult a = train(run, Backend::kFunctionalSliced, tr, te);
    const TrainResult b = train(run, Backend::kCompiledSimulator, tr, te);
    CHECK(a.weights == b.weights);
    CHECK(a.loss == b.loss);
    CHECK(a.final_accuracy == b.final_accuracy);
    CHECK(a.crs_events == b.crs_events);
    CHECK(b.report.total().total() > 0);
    CHECK(a.report.total().total() == 0);
  }
}

TEST_CASE("without saturation the sliced trajectory equals the oracle") {
  const Dataset tr = small_data(64, 9), te = small_data(16, 10);
  TrainRun run;
  run.model = mlp({16, 12, 4});
  run.batch = 2;
  run.steps = 40;
  run.lr_shift = 4;
  run.slices = SliceConfig(std::vector<SliceSpec>(8, SliceSpec{4, 11}));
  const TrainResult a = train(run, Backend::kFunctionalSliced, tr, te);
  const TrainResult b = train(run, Backend::kFullPrecisionOracle, tr, te);
  uint64_t events = 0;
  for (uint64_t e : a.saturation.back().second.events) events += e;
  REQUIRE(events == 0);
  CHECK(a.weights != init_weights(run.model, run.seed));
  CHECK(a.weights == b.weights);
  CHECK(a.loss == b.loss);
}

TEST_CASE("weight updates stay a small fraction of the weight range") {
  ClusterSpec cs;
  cs.features = 64;
  cs.classes = 10;
  cs.separation = 0.5;
  const Dataset tr = gaussian_clusters(cs, 1000, 1), te = gaussian_clusters(cs, 100, 2);
  TrainRun run;
  run.model = mlp({64, 64, 10});
  run.steps = 300;
  run.lr_shift = 7;
  run.track_updates = true;
  const TrainResult r = train(run, Backend::kFunctionalSliced, tr, te);
  REQUIRE(r.update_fraction.size() == 300);
  const auto small = std::count_if(r.update_fraction.begin(), r.update_fraction.end(), [](double f) { return f <= 0.05; });
  CHECK(static_cast<double>(small) >= 0.95 * 300);
}

TEST_CASE("shape and divergence errors") {
  const Dataset d = small_data(8, 11);
  TrainRun run;
  run.model = mlp({32, 4});
  run.steps = 2;
  CHECK_THROWS_AS(train(run, Backend::kFullPrecisionOracle, d, d), ShapeError);
  run.model = mlp({16, 2});
  CHECK_THROWS_AS(train(run, Backend::kFullPrecisionOracle, d, d), ShapeError);

  run.model = mlp({16, 16, 4});
  run.steps = 50;
  run.lr_shift = 0;
  run.init_gain = 8.0;
  CHECK_THROWS_AS(train(run, Backend::kFullPrecisionOracle, d, d), DivergenceError);
}

TEST_CASE("a single-cell sweep reproduces the training run") {
  const Dataset tr = small_data(64, 12), te = small_data(32, 13);
  TrainRun run;
  run.model = mlp({16, 8, 4});
  run.steps = 30;
  run.lr_shift = 4;
  run.crs_period = 8;
  SweepGrid grid;
  grid.slices = {SliceConfig::parse("uniform:3"), SliceConfig::parse("uniform:6")};
  grid.crs_periods = {8};
  grid.variants = {McuVariant::kV1};
  grid.batches = {1};
  const std::string csv = sweep_csv(run, grid, tr, te);
  const auto header = csv_row(csv, 0);
  const auto narrow = csv_row(csv, 1), wide = csv_row(csv, 2);
  REQUIRE(header.size() == narrow.size());
  auto col = [&](const std::string& name) {
    return static_cast<size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  run.slices = SliceConfig::parse("uniform:6");
  const TrainResult r = train(run, Backend::kFunctionalSliced, tr, te);
  CHECK(std::stod(wide[col("final_accuracy")]) == doctest::Approx(r.final_accuracy));
  CHECK(std::stoi(wide[col("crs_events")]) == r.crs_events);
  CHECK(std::stoll(wide[col("energy_pj")]) > std::stoll(narrow[col("energy_pj")]));
  CHECK(std::stoll(wide[col("crs_pj")]) > 0);
}
