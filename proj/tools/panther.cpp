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

// panther: compile, simulate, train and sweep from the command line.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "panther/compiler.hpp"
#include "panther/errors.hpp"
#include "panther/simulator.hpp"
#include "panther/workloads.hpp"

using namespace panther;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

uint64_t default_seed() {
  const char* env = std::getenv("PANTHER_SEED");
  if (!env || !*env) return 1;
  uint64_t v = 0;
  const std::string_view s(env);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("PANTHER_SEED is not an unsigned integer");
  return v;
}

// "sgd" or "minibatch:B".
int parse_algo(const std::string& algo) {
  if (algo == "sgd") return 1;
  if (algo.rfind("minibatch:", 0) == 0) {
    int b = 0;
    const std::string_view rest = std::string_view(algo).substr(10);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), b);
    if (ec == std::errc() && ptr == rest.data() + rest.size() && b >= 1) return b;
  }
  throw UsageError("--algo must be sgd or minibatch:B with B >= 1, got '" + algo + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

// "uniform:3,4,5,6" expands short tokens with the previous preset prefix.
std::vector<SliceConfig> parse_slice_list(const std::string& s) {
  std::vector<SliceConfig> out;
  std::string prefix;
  for (const auto& tok : split(s, ',')) {
    const bool short_num = tok.size() <= 2 && std::all_of(tok.begin(), tok.end(), ::isdigit);
    if (short_num && !prefix.empty()) {
      out.push_back(SliceConfig::parse(prefix + tok));
      continue;
    }
    const auto colon = tok.find(':');
    prefix = colon == std::string::npos ? "" : tok.substr(0, colon + 1);
    out.push_back(SliceConfig::parse(tok));
  }
  if (out.empty()) throw UsageError("--slices needs at least one configuration");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  for (const auto& tok : split(s, ',')) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0)
      throw UsageError(std::string(flag) + " expects non-negative integers, got '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + " is empty");
  return out;
}

CostModel load_cost(const std::string& path) {
  if (path.empty()) return CostModel{};
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cost file " + path);
  try {
    return CostModel::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("bad cost JSON in " + path + ": " + e.what());
  }
}

std::string read_all(const std::string& path) {
  if (path.empty() || path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Settings shared by the model-driven subcommands.
struct Options {
  std::string model = "mlp2";
  std::string algo = "sgd";
  int batch = 0;  // overrides --algo when set
  std::string variant = "v1";
  std::string slices = "44466555";
  int crs = 1024;
  std::string baseline;
  std::string cost;
  uint64_t seed = 1;
  std::string out;
  int adc_bits = 0;
  int lr_shift = 5;

  int batch_size() const { return batch > 0 ? batch : parse_algo(algo); }
  McuVariant mcu_variant() const { return parse_variant(variant); }
  Baseline base() const {
    if (!baseline.empty()) return parse_baseline(baseline);
    return parse_baseline("panther_" + variant);
  }

  json to_json() const {
    return {{"model", model},     {"algo", algo},   {"batch", batch_size()},  {"variant", variant},
            {"slices", slices},   {"crs", crs},     {"baseline", std::string(baseline_name(base()))},
            {"cost", cost},       {"seed", seed},   {"adc_bits", adc_bits},   {"lr_shift", lr_shift}};
  }
};

// Every run that writes files leaves <first output>.manifest.json beside them.
void write_manifest(const std::string& command, const std::vector<std::string>& argv, json options,
                    const std::vector<std::string>& outputs) {
  std::vector<std::string> files;
  for (const auto& o : outputs)
    if (!o.empty() && o != "-") files.push_back(o);
  if (files.empty()) return;
  json m = {{"tool", "panther"},
            {"version", kVersion},
            {"command", command},
            {"argv", argv},
            {"weight_frac_bits", kWeightFormat.frac_bits},
            {"options", std::move(options)},
            {"outputs", files}};
  write_all(files.front() + ".manifest.json", m.dump(2) + "\n");
}

void add_model_flags(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "Preset (mlp2, mlp3, mlp_l4, cnn4) or model JSON file");
  app->add_option("--algo", o.algo, "sgd or minibatch:B");
  app->add_option("--batch", o.batch, "Batch size; shorthand for --algo minibatch:B")->check(CLI::PositiveNumber);
  app->add_option("--variant", o.variant, "MCU variant: v1, v2 or v3");
  app->add_option("--seed", o.seed, "Seed (default: PANTHER_SEED or 1)");
  app->add_option("--out", o.out, "Output path (default: stdout)");
}

void add_sim_flags(CLI::App* app, Options& o) {
  app->add_option("--slices", o.slices, "Slice preset (44466555, 16x2, fig3f, uniform:K) or JSON file");
  app->add_option("--crs", o.crs, "Inputs between carry resolutions; 0 disables")->check(CLI::NonNegativeNumber);
  app->add_option("--baseline", o.baseline,
                  "Cost path: panther_v1|v2|v3, base_digital, base_mvm, base_opa_mvm (default: panther_<variant>)");
  app->add_option("--cost", o.cost, "Cost-model JSON file");
  app->add_option("--adc-bits", o.adc_bits, "ADC resolution; 0 = lossless")->check(CLI::NonNegativeNumber);
  app->add_option("--lr-shift", o.lr_shift, "Learning rate 2^-k; negative disables updates");
}

Dataset synthetic(const ModelSpec& m, int samples, uint64_t data_seed, uint64_t sample_seed, double separation,
                  double noise) {
  ClusterSpec cs;
  cs.features = m.input_len();
  cs.classes = m.output_len();
  cs.separation = separation;
  cs.noise = noise;
  cs.seed = data_seed;
  return gaussian_clusters(cs, samples, sample_seed);
}

CompileOptions compile_options(const Options& o) {
  CompileOptions c;
  c.batch = o.batch_size();
  c.variant = o.mcu_variant();
  return c;
}

// ---------------------------------------------------------------------------

int cmd_compile(const Options& o, bool binary, const std::vector<std::string>& argv) {
  const ModelSpec model = ModelSpec::load(o.model);
  const Compiled c = compile(model, compile_options(o));
  if (binary) {
    const auto bytes = encode_program(c.program);
    write_all(o.out, std::string(bytes.begin(), bytes.end()));
  } else {
    write_all(o.out, disassemble(c.program));
  }
  json opts = o.to_json();
  opts["binary"] = binary;
  write_manifest("compile", argv, opts, {o.out});
  if (!o.out.empty() && o.out != "-") {
    size_t n = 0;
    for (const auto& core : c.program.cores) n += core.code.size();
    std::cout << model.name << ": " << c.program.cores.size() << " cores, " << c.schedule.steps
              << " MCU timesteps, " << n << " instructions, " << c.stats.spills << " spills\n";
  }
  return 0;
}

int cmd_sim(const Options& o, int batches, const std::vector<std::string>& argv) {
  const ModelSpec model = ModelSpec::load(o.model);
  const Compiled c = compile(model, compile_options(o));
  SimOptions so;
  so.variant = o.mcu_variant();
  so.baseline = o.base();
  so.cost = load_cost(o.cost);
  so.adc_bits = o.adc_bits;
  so.lr_shift = o.lr_shift;
  const auto shards = shard_weights(c.graph.placement, init_weights(model, o.seed), SliceConfig::parse(o.slices),
                                    SlicePolicy::kSaturate);
  Machine machine(c, shards, so);
  const int b = o.batch_size();
  const Dataset data = synthetic(model, b * batches, o.seed, o.seed + 1, 1.0, 1.0);
  RunReport total;
  int64_t processed = 0;
  for (int k = 0; k < batches; ++k) {
    std::vector<DataVector> xs(data.x.begin() + k * b, data.x.begin() + (k + 1) * b);
    std::vector<int> ys(data.y.begin() + k * b, data.y.begin() + (k + 1) * b);
    const bool crs_now = o.crs > 0 && (processed + b) / o.crs > processed / o.crs;
    processed += b;
    machine.load_batch(xs, ys);
    total += machine.run(crs_now);
  }
  json opts = o.to_json();
  opts["batches"] = batches;
  write_all(o.out, total.to_json().dump(2) + "\n");
  std::string csv_path;
  if (!o.out.empty() && o.out != "-") {
    csv_path = o.out + ".csv";
    write_all(csv_path, total.to_csv());
    std::cout << model.name << " " << baseline_name(so.baseline) << ": " << total.total().total() << " pJ, "
              << total.cycles << " cycles, " << total.mcu_timesteps << " MCU timesteps\n";
  }
  write_manifest("sim", argv, opts, {o.out, csv_path});
  return 0;
}

struct DataFlags {
  std::string train_csv;
  std::string test_csv;
  int samples = 4000;
  int test_samples = 500;
  double separation = 0.3;
  double noise = 1.0;

  json to_json() const {
    return {{"data", train_csv},      {"test_data", test_csv}, {"samples", samples},
            {"test_samples", test_samples}, {"separation", separation}, {"noise", noise}};
  }
  std::pair<Dataset, Dataset> load(const ModelSpec& m, uint64_t seed) const {
    if (!train_csv.empty()) {
      Dataset tr = load_csv(train_csv);
      Dataset te = test_csv.empty() ? tr : load_csv(test_csv);
      return {std::move(tr), std::move(te)};
    }
    return {synthetic(m, samples, seed, seed + 1, separation, noise),
            synthetic(m, test_samples, seed, seed + 2, separation, noise)};
  }
};

void add_data_flags(CLI::App* app, DataFlags& d) {
  app->add_option("--data", d.train_csv, "Training CSV (label,f0,...); default: synthetic clusters");
  app->add_option("--test-data", d.test_csv, "Test CSV; default: the training CSV");
  app->add_option("--samples", d.samples, "Synthetic training samples")->check(CLI::PositiveNumber);
  app->add_option("--test-samples", d.test_samples, "Synthetic test samples")->check(CLI::PositiveNumber);
  app->add_option("--separation", d.separation, "Synthetic class-mean scale");
  app->add_option("--noise", d.noise, "Synthetic per-feature noise");
}

TrainRun make_run(const Options& o, int steps) {
  TrainRun run;
  run.model = ModelSpec::load(o.model);
  run.batch = o.batch_size();
  run.steps = steps;
  run.lr_shift = o.lr_shift;
  run.seed = o.seed;
  run.slices = SliceConfig::parse(o.slices);
  run.crs_period = o.crs;
  run.variant = o.mcu_variant();
  run.baseline = o.base();
  run.cost = load_cost(o.cost);
  run.adc_bits = o.adc_bits;
  return run;
}

int cmd_train(const Options& o, const std::string& backend, int steps, int eval_every, int sat_every,
              const DataFlags& df, const std::vector<std::string>& argv) {
  TrainRun run = make_run(o, steps);
  run.eval_every = eval_every;
  run.saturation_every = sat_every;
  const auto [tr, te] = df.load(run.model, o.seed);
  const Backend be = parse_backend(backend);
  const TrainResult r = train(run, be, tr, te);
  write_all(o.out, r.to_csv());
  json opts = o.to_json();
  opts["backend"] = backend;
  opts["steps"] = steps;
  opts["eval_every"] = eval_every;
  opts["saturation_every"] = sat_every;
  opts.update(df.to_json());
  std::string report_path;
  if (!o.out.empty() && o.out != "-") {
    if (be == Backend::kCompiledSimulator) {
      report_path = o.out + ".report.json";
      write_all(report_path, r.report.to_json().dump(2) + "\n");
    }
    std::cout << run.model.name << " " << backend << ": final accuracy " << r.final_accuracy << ", final loss "
              << (r.loss.empty() ? 0.0 : r.loss.back()) << ", " << r.crs_events << " CRS\n";
  }
  write_manifest("train", argv, opts, {o.out, report_path});
  return 0;
}

int cmd_sweep(Options o, const std::string& slices, const std::string& crs, const std::string& variants,
              const std::string& algos, int steps, const DataFlags& df, const std::vector<std::string>& argv) {
  SweepGrid grid;
  grid.slices = parse_slice_list(slices);
  grid.crs_periods = parse_int_list(crs, "--crs");
  for (const auto& v : split(variants, ',')) grid.variants.push_back(parse_variant(v));
  for (const auto& a : split(algos, ',')) grid.batches.push_back(parse_algo(a));
  if (grid.variants.empty() || grid.batches.empty()) throw UsageError("--variant and --algo lists must be non-empty");
  o.slices = grid.slices.front().name();
  const TrainRun base = make_run(o, steps);
  const auto [tr, te] = df.load(base.model, o.seed);
  write_all(o.out, sweep_csv(base, grid, tr, te));
  json opts = o.to_json();
  opts["slices"] = slices;
  opts["crs"] = crs;
  opts["variant"] = variants;
  opts["algo"] = algos;
  opts["steps"] = steps;
  opts.update(df.to_json());
  write_manifest("sweep", argv, opts, {o.out});
  return 0;
}

// Per-layer energy of one batch on every cost path, as tidy CSV.
int cmd_report(const Options& o, const std::vector<std::string>& argv) {
  const ModelSpec model = ModelSpec::load(o.model);
  const Compiled c = compile(model, compile_options(o));
  const auto shards = shard_weights(c.graph.placement, init_weights(model, o.seed), SliceConfig::parse(o.slices),
                                    SlicePolicy::kSaturate);
  const Dataset data = synthetic(model, o.batch_size(), o.seed, o.seed + 1, 1.0, 1.0);
  std::ostringstream os;
  os << "baseline,layer,component,energy_pj\n";
  for (const char* name : {"panther_v1", "panther_v2", "panther_v3", "base_digital", "base_mvm", "base_opa_mvm"}) {
    SimOptions so;
    so.variant = o.mcu_variant();
    so.baseline = parse_baseline(name);
    so.cost = load_cost(o.cost);
    so.lr_shift = o.lr_shift;
    Machine m(c, shards, so);
    m.load_batch(data.x, data.y);
    const RunReport r = m.run(false);
    for (const auto& [layer, e] : r.layer_energy) {
      const json parts = e.to_json();
      for (const auto& [component, v] : parts.items())
        os << name << ',' << layer << ',' << component << ',' << v.get<int64_t>() << '\n';
      os << name << ',' << layer << ",total," << e.total() << '\n';
    }
  }
  write_all(o.out, os.str());
  write_manifest("report", argv, o.to_json(), {o.out});
  return 0;
}

int cmd_asm(const std::string& in, const std::string& out) {
  const Program p = assemble(read_all(in));
  const auto bytes = encode_program(p);
  write_all(out, std::string(bytes.begin(), bytes.end()));
  return 0;
}

int cmd_disasm(const std::string& in, const std::string& out) {
  const std::string bytes = read_all(in);
  const Program p = decode_program(std::span(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()));
  write_all(out, disassemble(p));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Bit-sliced crossbar training accelerator: compiler, simulator and training drivers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Options o;
  try {
    o.seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "panther: " << e.what() << '\n';
    return 2;
  }

  bool binary = false;
  auto* compile_cmd = app.add_subcommand("compile", "Compile a model to per-core assembly");
  add_model_flags(compile_cmd, o);
  compile_cmd->add_flag("--binary", binary, "Write the binary image instead of assembly");

  int batches = 1;
  auto* sim_cmd = app.add_subcommand("sim", "Simulate training batches and report energy and time");
  add_model_flags(sim_cmd, o);
  add_sim_flags(sim_cmd, o);
  sim_cmd->add_option("--batches", batches, "Number of batches to run")->check(CLI::PositiveNumber);

  std::string backend = "functional_sliced";
  int steps = 1000, eval_every = 0, sat_every = 0;
  DataFlags df;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write loss, accuracy and saturation curves");
  add_model_flags(train_cmd, o);
  add_sim_flags(train_cmd, o);
  add_data_flags(train_cmd, df);
  train_cmd->add_option("--backend", backend, "functional_sliced, full_precision_oracle or compiled_simulator");
  train_cmd->add_option("--steps", steps, "Training steps")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--eval-every", eval_every, "Evaluate test accuracy every N steps");
  train_cmd->add_option("--saturation-every", sat_every, "Sample slice saturation every N steps");

  std::string sweep_slices = "uniform:3,4,5,6", sweep_crs = "1024", sweep_variants = "v1", sweep_algos = "sgd";
  auto* sweep_cmd = app.add_subcommand("sweep", "Train over a grid of slicings, CRS periods, variants and batches");
  sweep_cmd->add_option("--model", o.model, "Preset or model JSON file");
  sweep_cmd->add_option("--slices", sweep_slices, "Comma list; uniform:3,4,5,6 expands the prefix");
  sweep_cmd->add_option("--crs", sweep_crs, "Comma list of CRS periods");
  sweep_cmd->add_option("--variant", sweep_variants, "Comma list of variants");
  sweep_cmd->add_option("--algo", sweep_algos, "Comma list of sgd / minibatch:B");
  sweep_cmd->add_option("--steps", steps, "Training steps per cell")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--baseline", o.baseline, "Cost path for energy columns");
  sweep_cmd->add_option("--cost", o.cost, "Cost-model JSON file");
  sweep_cmd->add_option("--lr-shift", o.lr_shift, "Learning rate 2^-k");
  sweep_cmd->add_option("--seed", o.seed, "Seed (default: PANTHER_SEED or 1)");
  sweep_cmd->add_option("--out", o.out, "CSV path (default: stdout)");
  add_data_flags(sweep_cmd, df);

  auto* report_cmd = app.add_subcommand("report", "Per-layer energy of one batch on every cost path (tidy CSV)");
  add_model_flags(report_cmd, o);
  report_cmd->add_option("--slices", o.slices, "Slice preset or JSON file");
  report_cmd->add_option("--cost", o.cost, "Cost-model JSON file");

  std::string in_path = "-", out_path = "-";
  auto* asm_cmd = app.add_subcommand("asm", "Assemble text to a binary image");
  asm_cmd->add_option("input", in_path, "Assembly file (default: stdin)");
  asm_cmd->add_option("--out", out_path, "Binary output (default: stdout)");
  auto* disasm_cmd = app.add_subcommand("disasm", "Disassemble a binary image to text");
  disasm_cmd->add_option("input", in_path, "Binary file (default: stdin)");
  disasm_cmd->add_option("--out", out_path, "Text output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "panther: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*compile_cmd) return cmd_compile(o, binary, args);
    if (*sim_cmd) return cmd_sim(o, batches, args);
    if (*train_cmd) return cmd_train(o, backend, steps, eval_every, sat_every, df, args);
    if (*sweep_cmd) return cmd_sweep(o, sweep_slices, sweep_crs, sweep_variants, sweep_algos, steps, df, args);
    if (*report_cmd) return cmd_report(o, args);
    if (*asm_cmd) return cmd_asm(in_path, out_path);
    if (*disasm_cmd) return cmd_disasm(in_path, out_path);
  } catch (const UsageError& e) {
    std::cerr << "panther: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "panther: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
