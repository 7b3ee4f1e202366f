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

// Closed-loop simulation of the controller against a sampled reference.

#ifndef TRACKOPT_ROLLOUT_H_
#define TRACKOPT_ROLLOUT_H_

#include <vector>

#include "trackopt/controller.h"
#include "trackopt/quadrotor.h"
#include "trackopt/reference.h"

namespace trackopt {

// Entry k describes control step start + k: the wrench commanded from the
// state at that step, then the state and reference one step later.
struct LogEntry {
  QuadState state;
  FlatReference reference;
  Wrench command;
};

struct StateLog {
  std::vector<LogEntry> entries;
  bool diverged = false;  // entries are truncated at the failure
};

// One control step: wrench from the controller, allocation, dynamics.
// Throws SimulationDiverged on non-finite values.
QuadState control_step(const QuadState& state, const FlatReference& ref,
                       const Gains& gains, const QuadParams& params, double dt,
                       Wrench* command = nullptr);

// Runs `horizon` steps starting at reference step `start`.
StateLog rollout(const QuadState& initial, const Gains& gains,
                 const SampledTrajectory& traj, const QuadParams& params,
                 int horizon = kHorizon, long start = 0);

}  // namespace trackopt

#endif  // TRACKOPT_ROLLOUT_H_
