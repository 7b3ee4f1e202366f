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

// Batched random search over controller gains, the receding-horizon driver
// that re-tunes during flight, and simulation-in-the-loop oracles.

#ifndef TRACKOPT_TUNER_H_
#define TRACKOPT_TUNER_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trackopt/controller.h"
#include "trackopt/metrics.h"
#include "trackopt/predictor.h"
#include "trackopt/reference.h"

namespace trackopt {

struct GainBounds {
  std::array<double, kNumGains> lo{};
  std::array<double, kNumGains> hi{};

  void validate() const;  // throws ConfigError unless 0 <= lo < hi
  bool contains(const Gains& g) const;
  Gains clamp(const Gains& g) const;
};

// Frozen output of the hover-stability sweep (see calibrate_bounds).
GainBounds default_gain_bounds();

struct SearchConfig {
  GainBounds bounds = default_gain_bounds();
  int samples = 512;        // N, uniform per iteration
  int perturbations = 64;   // N_r, around the incumbent from iteration 2
  int iterations = 4;
  double perturbation_scale = 0.05;  // std as a fraction of each range
  std::uint64_t seed = 0;

  void validate() const;
};

// Reduced simulation-in-the-loop budget for the oracles.
SearchConfig oracle_search_config();

struct SearchResult {
  Gains best;
  double cost = 0.0;
  std::vector<double> best_per_iteration;  // non-increasing
  int evaluations = 0;
};

// costs[i] = J(candidates[i]).
using BatchCost =
    std::function<void(std::span<const Gains> candidates, std::span<double> costs)>;

// Iteration 1: N uniform samples. Later iterations: N uniform samples plus
// N_r Gaussian perturbations of the incumbent, clamped to the bounds.
SearchResult random_search(const BatchCost& cost, const SearchConfig& config);

// Random search on the predicted cost w^T c_hat(g, o, tau) with every
// candidate evaluated in one batched forward pass per iteration.
SearchResult optimize_gains(const CostModel& model, const QuadState& state,
                            const SampledTrajectory& traj, long step,
                            const CostWeights& weights,
                            const SearchConfig& config);

struct GainUpdate {
  long step = 0;
  Gains gains;
  double predicted_cost = 0.0;
  double latency_ms = 0.0;
};

struct RunConfig {
  int period = 50;  // T, steps between re-tunes
  int horizon = kHorizon;
  double crash_threshold = 5.0;  // m
};

struct RunResult {
  std::vector<LogEntry> log;
  std::vector<GainUpdate> schedule;
  double mean_error = 0.0;  // mean |p - p_d| over the logged steps
  double max_error = 0.0;
  bool crashed = false;   // error above the threshold, or diverged
  bool diverged = false;  // non-finite simulation
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
};

// Chooses gains at a re-tune point. May set *predicted_cost.
using GainPolicy = std::function<Gains(const QuadState& state, long step,
                                       double* predicted_cost)>;

// Flies the whole trajectory from a hover at its first sample, calling the
// policy at step 0 and every period steps after.
RunResult run_receding(const SampledTrajectory& traj, const QuadParams& params,
                       const GainPolicy& policy, const RunConfig& config);

GainPolicy fixed_gains_policy(const Gains& gains);
GainPolicy model_policy(const CostModel& model, const SampledTrajectory& traj,
                        const CostWeights& weights,
                        const SearchConfig& config);

RunResult receding_horizon_run(const CostModel& model,
                               const SampledTrajectory& traj,
                               const QuadParams& params,
                               const CostWeights& weights,
                               const SearchConfig& search,
                               const RunConfig& run = {});

// Whole-trajectory ground-truth cost from a hover start, terminal term
// excluded. Evaluated in lock-step batches.
void whole_trajectory_costs(const SampledTrajectory& traj,
                            const QuadParams& params,
                            const CostWeights& weights,
                            std::span<const Gains> candidates,
                            std::span<double> costs);

// Static oracle: one gain vector for the whole trajectory.
SearchResult oracle_static(const SampledTrajectory& traj,
                           const QuadParams& params,
                           const CostWeights& weights,
                           const SearchConfig& config);

// Adaptive oracle: re-tunes every period on the true H-step window cost.
GainPolicy oracle_adaptive_policy(const SampledTrajectory& traj,
                                  const QuadParams& params,
                                  const CostWeights& weights,
                                  const SearchConfig& config,
                                  int horizon = kHorizon);

// Per-step run CSV and a one-line summary row.
inline constexpr int kRunSchemaVersion = 1;
void write_run_csv(std::ostream& out, const RunResult& run, double dt);
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const std::string& trajectory_id,
                       const std::string& method, const RunResult& run);

// Hover-stability sweep: for each gain dimension, with the others nominal,
// find the contiguous multiplier range around nominal in which a perturbed
// hover recovers, then double that range about its center (floored at 0).
struct BoundsSweep {
  GainBounds bounds;
  std::array<double, kNumGains> stable_lo{};
  std::array<double, kNumGains> stable_hi{};
};
BoundsSweep calibrate_bounds(const QuadParams& params);

}  // namespace trackopt

#endif  // TRACKOPT_TUNER_H_
