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

// Evaluation suites, gain cross-validation, adaptation suites, simulator
// benchmarks and predictor validation. Shared by the CLI and the
// acceptance runner.

#ifndef TRACKOPT_EXPERIMENTS_H_
#define TRACKOPT_EXPERIMENTS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trackopt/adapter.h"
#include "trackopt/datagen.h"
#include "trackopt/dataset.h"
#include "trackopt/families.h"
#include "trackopt/parallel.h"
#include "trackopt/tuner.h"

namespace trackopt {

inline constexpr int kSummarySchemaVersion = 1;

enum class Method { kTaco, kTacoNoTraj, kNominal, kOracleStatic,
                    kOracleAdaptive };
const char* method_name(Method method);
Method parse_method(const std::string& name);  // throws ConfigError
bool method_needs_model(Method method);

struct EvalConfig {
  Suite suite = Suite::kMinsnap;
  Method method = Method::kNominal;
  int count = 20;
  std::uint64_t seed = 1;
  SuiteConfig suite_config;
  SearchConfig search;  // per re-tune for the learned methods
  SearchConfig oracle = oracle_search_config();
  RunConfig run;
  CostWeights weights = default_weights();
  int threads = default_thread_count();
};

struct TrajectoryOutcome {
  std::string id;
  RunResult run;
};

struct EvalSummary {
  int count = 0;
  int failures = 0;
  double mean_error = 0.0;  // over runs that did not fail; NaN if none
  double mean_latency_ms = 0.0;
  double seconds = 0.0;
};

// Runs one method on a single trajectory. `model` may be null for
// nominal and the oracles; the seed drives every random search.
RunResult run_method(Method method, const SampledTrajectory& traj,
                     const QuadParams& params, const CostModel* model,
                     const EvalConfig& config, std::uint64_t seed);

// Trajectories 0..count-1 of the suite, in parallel. Throws ConfigError if
// the method needs a model of a different layout than `model`.
std::vector<TrajectoryOutcome> evaluate_suite(const EvalConfig& config,
                                              const QuadParams& params,
                                              const CostModel* model);

EvalSummary summarize(const std::vector<TrajectoryOutcome>& outcomes);

void write_eval_summary_header(std::ostream& out);
void write_eval_summary_row(std::ostream& out, const std::string& suite,
                            const std::string& method,
                            const EvalSummary& summary);

// --- cross-validation ------------------------------------------------------

// Named average speeds (m/s): slow, med, fast, xfast.
double speed_level(const std::string& name);

enum class CrossvalTuner { kOracle, kTaco };

struct CrossvalConfig {
  std::vector<std::string> labels = {"slow", "med", "fast", "xfast"};
  std::vector<double> speeds;  // same length as labels
  std::uint64_t seed = 1;      // picks the base shape and search seeds
  CrossvalTuner tuner = CrossvalTuner::kOracle;
  SearchConfig oracle = oracle_search_config();
  SearchConfig search;
  RunConfig run;
  CostWeights weights = default_weights();
  int threads = default_thread_count();
};

// One base keypoint shape flown at each speed.
std::vector<TrajectorySpec> crossval_trajectories(const CrossvalConfig& config);

// error[i][j]: mean tracking error flying trajectory i with the gains tuned
// for trajectory j. The oracle tunes one gain vector per trajectory; TACO
// gains are the schedule of a TACO run on trajectory j, replayed at the same
// fraction of the trajectory's duration. Crashed cells hold the mean error
// up to the crash.
struct CrossvalResult {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> error;
  std::vector<std::vector<bool>> crashed;
  int diagonal_row_minima = 0;
  double seconds = 0.0;
};

CrossvalResult crossval(const CrossvalConfig& config, const QuadParams& params,
                        const CostModel* model);
void write_crossval_csv(std::ostream& out, const CrossvalResult& result);

// --- adaptation suite --------------------------------------------------------

struct AdaptSuiteConfig {
  Suite suite = Suite::kMinsnap;
  int count = 30;
  std::uint64_t seed = 1;
  SuiteConfig suite_config;
  AdaptRunConfig run;
  CostWeights weights = default_weights();
  int threads = default_thread_count();
};

struct AdaptOutcome {
  std::string id;
  AdaptRunResult adapted;
  AdaptRunResult baseline;  // original trajectory, nominal gains
};

struct AdaptSummary {
  int count = 0;
  int adapted_crashes = 0;
  int baseline_crashes = 0;
  // Means over every keypoint reached, pooled across trajectories.
  double adapted_keypoint_error = 0.0;
  double baseline_keypoint_error = 0.0;
  double seconds = 0.0;
};

std::vector<AdaptOutcome> adapt_suite(const AdaptSuiteConfig& config,
                                      const QuadParams& params,
                                      const CostModel& model);
AdaptSummary summarize(const std::vector<AdaptOutcome>& outcomes);
void write_adapt_summary_header(std::ostream& out);
void write_adapt_summary_row(std::ostream& out, const std::string& mode,
                             const AdaptSummary& summary);

// --- simulator benchmark ----------------------------------------------------

struct BenchRow {
  int batch = 0;
  double scalar_steps_per_s = 0.0;   // quad-steps/s, one quad at a time
  double batched_steps_per_s = 0.0;  // quad-steps/s through step_batch
  double speedup = 0.0;
};

// Open-loop hover commands with small per-quad variation, so the benchmark
// measures the dynamics kernels only.
BenchRow bench_dynamics(const QuadParams& params, int batch, double min_seconds);
void write_bench_header(std::ostream& out);
void write_bench_row(std::ostream& out, const BenchRow& row);

// --- predictor validation ---------------------------------------------------

// Spearman correlation between predicted and true scalar cost over random
// gains, per context (trajectory window and start state), averaged over
// contexts. Contexts are the records [begin, end) of the dataset described
// by `data`, spread evenly, at most one per trajectory group, rebuilt with
// regenerate_record. True costs come from fresh rollouts.
struct RankCheck {
  int contexts = 0;
  int gains_per_context = 0;
  double mean_spearman = 0.0;
  double min_spearman = 0.0;
};

RankCheck rank_check(const CostModel& model, const QuadParams& params,
                     const DatagenConfig& data, std::size_t begin,
                     std::size_t end, int contexts, int gains_per_context,
                     const CostWeights& weights, std::uint64_t seed);

struct ValidationReport {
  std::vector<double> target_mae;   // per performance term, original units
  double pair_spearman = 0.0;       // predicted vs true scalar cost
  std::size_t pairs = 0;
};

// Per-target MAE and the rank correlation of predicted vs true scalar cost
// over records [begin, end).
ValidationReport validation_report(const CostModel& model, const Dataset& data,
                                   std::size_t begin, std::size_t end,
                                   const CostWeights& weights);
void write_validation_report(std::ostream& out, const ValidationReport& report);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace trackopt

#endif  // TRACKOPT_EXPERIMENTS_H_
