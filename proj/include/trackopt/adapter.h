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

// Reference adaptation: gradient descent on the spline's null coordinates
// through the cost model, and the receding-horizon driver around it.

#ifndef TRACKOPT_ADAPTER_H_
#define TRACKOPT_ADAPTER_H_

#include <iosfwd>
#include <vector>

#include "trackopt/spline.h"
#include "trackopt/tuner.h"

namespace trackopt {

struct AdaptConfig {
  int steps = 50;
  // Picked on a separate tuning suite; larger steps exploit model error.
  double learning_rate = 0.1;
  double clip_norm = 1.0;  // gradient norm cap per step
};

struct AdaptResult {
  SplineTrajectory trajectory;
  double cost_before = 0.0;  // predicted scalar cost
  double cost_after = 0.0;
  bool empty_nullspace = false;  // nothing to adapt; input returned
};

// Predicted scalar cost of the window starting at `step` when flying
// `spline` from `state`. If grad is non-null it receives d cost / d phi.
// The model must use the full input layout.
double window_objective(const CostModel& model, const SplineTrajectory& spline,
                        const QuadState& state, const Gains& gains, long step,
                        const CostWeights& weights, Eigen::VectorXd* grad,
                        double dt = kSimDt);

// Warm-starts from the spline's current phi. Every iterate satisfies the
// keypoint and continuity constraints by construction.
AdaptResult adapt_window(const CostModel& model, const SplineTrajectory& spline,
                         const QuadState& state, const Gains& gains, long step,
                         const CostWeights& weights,
                         const AdaptConfig& config = {}, double dt = kSimDt);

enum class AdaptMode { kNone, kTrajOnly, kTrajAndGains };
AdaptMode parse_adapt_mode(const std::string& name);  // throws ConfigError
const char* adapt_mode_name(AdaptMode mode);

struct AdaptRunConfig {
  AdaptMode mode = AdaptMode::kTrajOnly;
  int adapt_period = 100;  // steps between re-adaptations
  AdaptConfig adapt;
  SearchConfig search;  // used by kTrajAndGains
  RunConfig run;        // gain re-tune period and crash threshold
};

struct AdaptWindow {
  long step = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double phi_norm = 0.0;
};

struct AdaptRunResult {
  RunResult run;
  std::vector<AdaptWindow> windows;
  // |p(t_i) - p_i| at the interior keypoints reached before a crash.
  std::vector<double> keypoint_errors;
  double mean_keypoint_error = 0.0;
};

// Flies the spline from a hover at its start. Gains stay nominal unless
// the mode re-tunes them. With kNone this is run_receding with nominal
// gains.
AdaptRunResult receding_horizon_adapt(const CostModel& model,
                                      const SplineTrajectory& spline,
                                      const QuadParams& params,
                                      const CostWeights& weights,
                                      const AdaptRunConfig& config,
                                      double dt = kSimDt);

// Errors at the interior keypoints of `spline` along a logged run.
std::vector<double> keypoint_errors(const SplineTrajectory& spline,
                                    const std::vector<LogEntry>& log,
                                    double dt = kSimDt);

inline constexpr int kAdaptSchemaVersion = 1;
// One row per keypoint error and one per adaptation window.
void write_adapt_csv(std::ostream& out, const std::string& trajectory_id,
                     const AdaptRunResult& result, bool header);

}  // namespace trackopt

#endif  // TRACKOPT_ADAPTER_H_
