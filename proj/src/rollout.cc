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

#include "trackopt/rollout.h"

#include <cmath>

namespace trackopt {

QuadState control_step(const QuadState& state, const FlatReference& ref,
                       const Gains& gains, const QuadParams& params, double dt,
                       Wrench* command) {
  const Wrench w = compute_wrench(state, ref, gains, params);
  if (!std::isfinite(w.thrust) || !w.moment.allFinite()) {
    throw SimulationDiverged("controller produced a non-finite wrench");
  }
  if (command) *command = w;
  return step(state, allocate(w, params), params, dt);
}

StateLog rollout(const QuadState& initial, const Gains& gains,
                 const SampledTrajectory& traj, const QuadParams& params,
                 int horizon, long start) {
  StateLog log;
  log.entries.reserve(horizon);
  QuadState s = initial;
  for (int k = 0; k < horizon; ++k) {
    LogEntry e;
    try {
      e.state = control_step(s, traj.at(start + k), gains, params, traj.dt(),
                             &e.command);
    } catch (const SimulationDiverged&) {
      log.diverged = true;
      break;
    }
    if (!e.state.finite()) {
      log.diverged = true;
      break;
    }
    e.reference = traj.at(start + k + 1);
    s = e.state;
    log.entries.push_back(e);
  }
  return log;
}

}  // namespace trackopt
