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

// Performance vector of a closed-loop window and its scalar cost.
//
//   c[0..2]  mean |e_p| per axis                  m
//   c[3]     mean |e_v|                           m/s
//   c[4]     mean |omega|                         rad/s
//   c[5]     mean |f| commanded                   N
//   c[6]     mean |M| commanded                   N m
//   c[7]     |e_p| at the last step               m
//
// Means run over the H logged entries. A diverged window reports kSentinel
// in every entry, and every entry is capped at kSentinel.

#ifndef TRACKOPT_METRICS_H_
#define TRACKOPT_METRICS_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trackopt/rollout.h"

namespace trackopt {

inline constexpr int kPerfDim = 8;
inline constexpr double kSentinel = 1e3;

using PerfVector = std::array<double, kPerfDim>;

struct CostWeights {
  std::array<double, kPerfDim> w{};

  // Throws ConfigError unless all entries are >= 0 and one is positive.
  void validate() const;
};

CostWeights default_weights();

// Running sums over log entries; shared by the scalar and batched paths.
class PerfAccumulator {
 public:
  void add(const QuadState& state, const FlatReference& ref,
           const Wrench& command);
  // `diverged` turns every entry into the sentinel.
  PerfVector finish(bool diverged) const;
  int count() const { return count_; }

 private:
  std::array<double, kPerfDim> sums_{};
  int count_ = 0;
};

// Throws std::invalid_argument when a non-diverged log does not hold
// exactly `horizon` entries.
PerfVector compute_perf(const StateLog& log, int horizon = kHorizon);

double scalarize(const PerfVector& c, const CostWeights& w);

// rollout -> compute_perf -> scalarize.
double ground_truth_cost(const QuadState& initial, const Gains& gains,
                         const SampledTrajectory& traj,
                         const QuadParams& params, const CostWeights& weights,
                         int horizon = kHorizon, long start = 0);

// One closed-loop window for the batched evaluator.
struct WindowTask {
  QuadState initial;
  Gains gains;
  const SampledTrajectory* traj = nullptr;
  long start = 0;
};

// Runs all windows in lock-step with step_batch. Element i equals
// compute_perf(rollout(...)) for task i to rounding.
std::vector<PerfVector> evaluate_windows(std::span<const WindowTask> tasks,
                                         const QuadParams& params,
                                         int horizon = kHorizon);

// Metrics CSV. The header leads with a schema version column.
inline constexpr int kMetricsSchemaVersion = 1;
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const std::string& trajectory_id,
                       const Gains& gains, const PerfVector& c, double cost);

}  // namespace trackopt

#endif  // TRACKOPT_METRICS_H_
