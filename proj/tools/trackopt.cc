// Copyright 2026 The trackopt Authors
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

// trackopt command line: dataset generation, training, evaluation suites,
// gain cross-validation, trajectory adaptation, benchmarks.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trackopt/datagen.h"
#include "trackopt/experiments.h"
#include "trackopt/kvfile.h"
#include "trackopt/parallel.h"
#include "trackopt/predictor.h"

namespace trackopt {
namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

QuadParams params_from(const std::string& path) {
  return path.empty() ? QuadParams{} : load_params(path);
}

// Options shared by every subcommand.
struct Common {
  std::string params;
  int threads = 0;  // 0: TRACKOPT_THREADS or hardware

  int thread_count() const {
    return threads > 0 ? threads : default_thread_count();
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--params", c.params, "Quadrotor parameter file");
  app->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::NonNegativeNumber);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- gen-data ---------------------------------------------------------------

struct GenData {
  Common common;
  std::size_t count = 200000;
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
};

int run_gen_data(const GenData& o) {
  DatagenConfig c = o.config.empty() ? DatagenConfig{} : DatagenConfig::load(o.config);
  c.count = o.count;
  c.seed = o.seed;
  c.threads = o.common.thread_count();
  const QuadParams params = params_from(o.common.params);
  DatagenStats stats;
  const Dataset d = generate_dataset(params, c, &stats);
  write_dataset(d, o.out);

  KeyValueFile manifest = KeyValueFile::parse(c.to_string());
  manifest.set("params_file", o.common.params.empty() ? "builtin" : o.common.params);
  manifest.set("input_dim", static_cast<double>(d.input_dim));
  manifest.set("resampled_trajectories", static_cast<double>(stats.resampled));
  manifest.set("family_counts",
               std::vector<double>(std::begin(stats.family_counts),
                                   std::end(stats.family_counts)));
  manifest.set("wall_seconds", stats.seconds);
  manifest.save(o.out + ".manifest");
  std::cout << "wrote " << d.size() << " records to " << o.out << " in "
            << stats.seconds << " s\n";
  return 0;
}

// --- train ------------------------------------------------------------------

struct Train {
  Common common;
  std::string data;
  std::string config;
  std::string out;
  std::string layout = "full";
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

int run_train(const Train& o) {
  TrainConfig c = o.config.empty() ? TrainConfig{} : TrainConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  const InputLayout layout = parse_layout(o.layout);
  const Dataset full = read_dataset(o.data);
  const Dataset d = project_layout(full, layout);
  Predictor model(layout, c.hidden);
  const TrainReport r = train(model, d, c, [](const EpochStats& e) {
    std::cout << "epoch " << e.epoch << " train " << e.train_loss << " val "
              << e.validation_loss << " (" << e.seconds << " s)\n"
              << std::flush;
  });
  save_model(model, o.out);

  std::ofstream curve = open_out(o.out + ".curve.csv");
  curve << "schema_version,epoch,train_loss,validation_loss,learning_rate,"
           "seconds\n";
  for (const EpochStats& e : r.curve) {
    curve << kSummarySchemaVersion << ',' << e.epoch << ','
          << format_double(e.train_loss) << ','
          << format_double(e.validation_loss) << ','
          << format_double(e.learning_rate) << ',' << format_double(e.seconds)
          << '\n';
  }

  const ValidationReport v = validation_report(model, d, r.train_count,
                                               d.size(), default_weights());
  std::ofstream report = open_out(o.out + ".report");
  KeyValueFile kv = KeyValueFile::parse(c.to_string());
  kv.set("layout", layout_name(layout));
  kv.set("train_records", static_cast<double>(r.train_count));
  kv.set("best_epoch", static_cast<double>(r.best_epoch));
  kv.set("best_validation_loss", r.best_validation_loss);
  report << kv.to_string();
  write_validation_report(report, v);
  std::cout << "best validation loss " << r.best_validation_loss
            << " at epoch " << r.best_epoch << ", cost rank correlation "
            << v.pair_spearman << '\n';
  return 0;
}

// --- eval -------------------------------------------------------------------

struct Eval {
  Common common;
  std::string model;
  std::string suite = "minsnap";
  std::string method = "taco";
  int n = 20;
  std::uint64_t seed = 1;
  std::string out = "eval";
  bool per_step = false;
};

int run_eval(const Eval& o) {
  EvalConfig c;
  c.suite = parse_suite(o.suite);
  c.method = parse_method(o.method);
  c.count = o.n;
  c.seed = o.seed;
  c.threads = o.common.thread_count();
  std::unique_ptr<Predictor> model;
  if (method_needs_model(c.method)) {
    if (o.model.empty()) throw ConfigError(o.method + " needs --model");
    model = std::make_unique<Predictor>(load_model(o.model));
  }
  const QuadParams params = params_from(o.common.params);
  const auto t0 = Clock::now();
  const auto outcomes = evaluate_suite(c, params, model.get());
  EvalSummary s = summarize(outcomes);
  s.seconds = seconds_since(t0);

  const std::string stem = o.out + "/" + o.suite + "_" + o.method;
  std::ofstream per = open_out(stem + "_trajectories.csv");
  write_summary_header(per);
  for (const auto& t : outcomes) write_summary_row(per, t.id, o.method, t.run);
  std::ofstream sum = open_out(stem + "_summary.csv");
  write_eval_summary_header(sum);
  write_eval_summary_row(sum, o.suite, o.method, s);
  if (o.per_step) {
    for (const auto& t : outcomes) {
      std::ofstream f = open_out(stem + "_" + t.id + ".csv");
      write_run_csv(f, t.run, kSimDt);
    }
  }
  write_eval_summary_header(std::cout);
  write_eval_summary_row(std::cout, o.suite, o.method, s);
  return 0;
}

// --- crossval ---------------------------------------------------------------

struct Crossval {
  Common common;
  std::string model;
  std::string speeds = "slow,med,fast,xfast";
  std::string tuner;  // default: taco with a model, else oracle
  std::uint64_t seed = 1;
  std::string out = "crossval.csv";
};

int run_crossval(const Crossval& o) {
  CrossvalConfig c;
  c.seed = o.seed;
  c.threads = o.common.thread_count();
  c.labels.clear();
  for (const std::string& s : split_list(o.speeds)) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    c.labels.push_back(s);
    c.speeds.push_back(end && *end == '\0' ? v : speed_level(s));
  }
  const std::string tuner =
      o.tuner.empty() ? (o.model.empty() ? "oracle" : "taco") : o.tuner;
  if (tuner == "oracle") {
    c.tuner = CrossvalTuner::kOracle;
  } else if (tuner == "taco") {
    c.tuner = CrossvalTuner::kTaco;
  } else {
    throw ConfigError("unknown tuner '" + tuner + "'");
  }
  std::unique_ptr<Predictor> model;
  if (c.tuner == CrossvalTuner::kTaco) {
    if (o.model.empty()) throw ConfigError("the taco tuner needs --model");
    model = std::make_unique<Predictor>(load_model(o.model));
  }
  const CrossvalResult r = crossval(c, params_from(o.common.params), model.get());
  std::ofstream out = open_out(o.out);
  write_crossval_csv(out, r);
  write_crossval_csv(std::cout, r);
  std::cout << "row minima on the diagonal: " << r.diagonal_row_minima << " of "
            << r.labels.size() << " (" << r.seconds << " s)\n";
  return 0;
}

// --- adapt ------------------------------------------------------------------

struct Adapt {
  Common common;
  std::string model;
  int n = 30;
  std::string mode = "traj-only";
  std::string suite = "minsnap";
  std::uint64_t seed = 1;
  std::string out = "adapt";
};

int run_adapt(const Adapt& o) {
  AdaptSuiteConfig c;
  c.suite = parse_suite(o.suite);
  c.count = o.n;
  c.seed = o.seed;
  c.threads = o.common.thread_count();
  c.run.mode = parse_adapt_mode(o.mode);
  const Predictor model = load_model(o.model);
  const auto t0 = Clock::now();
  const auto outcomes = adapt_suite(c, params_from(o.common.params), model);
  AdaptSummary s = summarize(outcomes);
  s.seconds = seconds_since(t0);

  const std::string stem = o.out + "/adapt_" + o.suite + "_" + o.mode;
  std::ofstream detail = open_out(stem + "_keypoints.csv");
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    write_adapt_csv(detail, outcomes[i].id + "/adapted", outcomes[i].adapted,
                    i == 0);
    write_adapt_csv(detail, outcomes[i].id + "/static", outcomes[i].baseline,
                    false);
  }
  std::ofstream sum = open_out(stem + "_summary.csv");
  write_adapt_summary_header(sum);
  write_adapt_summary_row(sum, o.mode, s);
  write_adapt_summary_header(std::cout);
  write_adapt_summary_row(std::cout, o.mode, s);
  return 0;
}

// --- bench ------------------------------------------------------------------

struct Bench {
  Common common;
  std::string batch_sizes = "1,64,1024,10000";
  double min_seconds = 0.5;
  std::string out = "bench.csv";
};

int run_bench(const Bench& o) {
  const QuadParams params = params_from(o.common.params);
  std::ofstream out = open_out(o.out);
  write_bench_header(out);
  write_bench_header(std::cout);
  bool slow = false;
  for (const std::string& s : split_list(o.batch_sizes)) {
    int b = 0;
    try {
      b = std::stoi(s);
    } catch (const std::exception&) {
      throw ConfigError("bad batch size '" + s + "'");
    }
    const BenchRow row = bench_dynamics(params, b, o.min_seconds);
    write_bench_row(out, row);
    write_bench_row(std::cout, row);
    if (b == 1024 && row.speedup < 5.0) slow = true;
  }
  if (slow) {
    std::cerr << "batched stepping at 1024 is below 5x the scalar loop\n";
    return kExitRuntime;
  }
  return 0;
}

// --- calibrate --------------------------------------------------------------

int run_calibrate(const Common& o) {
  const BoundsSweep sweep = calibrate_bounds(params_from(o.params));
  const auto nominal = nominal_gains().to_array();
  std::cout << "gain,nominal,stable_lo,stable_hi,bound_lo,bound_hi\n";
  for (int k = 0; k < kNumGains; ++k) {
    std::cout << k << ',' << format_double(nominal[k]) << ','
              << format_double(sweep.stable_lo[k]) << ','
              << format_double(sweep.stable_hi[k]) << ','
              << format_double(sweep.bounds.lo[k]) << ','
              << format_double(sweep.bounds.hi[k]) << '\n';
  }
  return 0;
}

}  // namespace
}  // namespace trackopt

int main(int argc, char** argv) {
  using namespace trackopt;
  CLI::App app{"Trajectory-aware controller gain tuning for quadrotors"};
  app.require_subcommand(1);

  GenData gen;
  auto* g = app.add_subcommand("gen-data", "Generate a training dataset");
  add_common(g, gen.common);
  g->add_option("--count", gen.count, "Number of records")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--config", gen.config, "Generator config file");
  g->add_option("--out", gen.out, "Dataset path")->required();

  Train tr;
  auto* t = app.add_subcommand("train", "Train a performance predictor");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Dataset path")->required();
  t->add_option("--config", tr.config, "Training config file");
  t->add_option("--out", tr.out, "Model path")->required();
  t->add_option("--layout", tr.layout, "full | no-traj");
  t->add_option("--seed", tr.seed, "Overrides the config seed");
  t->add_option("--epochs", tr.epochs, "Overrides the config epochs");

  Eval ev;
  auto* e = app.add_subcommand("eval", "Run a method on an evaluation suite");
  add_common(e, ev.common);
  e->add_option("--model", ev.model, "Model path (learned methods)");
  e->add_option("--suite", ev.suite,
                "minsnap | minsnap-hard | minsnap-varying | zigzag | lissajous");
  e->add_option("--method", ev.method,
                "taco | taco-no-traj | nominal | oracle-static | oracle-adaptive");
  e->add_option("--n", ev.n, "Trajectories")->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "Suite seed");
  e->add_option("--out", ev.out, "Output directory");
  e->add_flag("--per-step", ev.per_step, "Also write one CSV per trajectory");

  Crossval cv;
  auto* c = app.add_subcommand("crossval", "Cross-validate tuned gains across speeds");
  add_common(c, cv.common);
  c->add_option("--model", cv.model, "Model path (taco tuner)");
  c->add_option("--speeds", cv.speeds, "Speed levels or m/s values, comma separated");
  c->add_option("--tuner", cv.tuner, "oracle | taco");
  c->add_option("--seed", cv.seed, "Picks the base shape");
  c->add_option("--out", cv.out, "Matrix CSV path");

  Adapt ad;
  auto* a = app.add_subcommand("adapt", "Online trajectory adaptation suite");
  add_common(a, ad.common);
  a->add_option("--model", ad.model, "Full-layout model path")->required();
  a->add_option("--n", ad.n, "Trajectories")->check(CLI::PositiveNumber);
  a->add_option("--mode", ad.mode, "traj-only | traj+gains");
  a->add_option("--suite", ad.suite, "Suite name");
  a->add_option("--seed", ad.seed, "Suite seed");
  a->add_option("--out", ad.out, "Output directory");

  Bench be;
  auto* b = app.add_subcommand("bench", "Scalar vs batched simulator throughput");
  add_common(b, be.common);
  b->add_option("--batch-sizes", be.batch_sizes, "Comma separated batch sizes");
  b->add_option("--min-seconds", be.min_seconds, "Timing floor per measurement");
  b->add_option("--out", be.out, "CSV path");

  Common cal;
  auto* k = app.add_subcommand("calibrate", "Hover-stability sweep for gain bounds");
  add_common(k, cal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*g) return run_gen_data(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*c) return run_crossval(cv);
    if (*a) return run_adapt(ad);
    if (*b) return run_bench(be);
    if (*k) return run_calibrate(cal);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
