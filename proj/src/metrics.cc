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

#include "trackopt/metrics.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "trackopt/batch.h"
#include "trackopt/kvfile.h"

namespace trackopt {

void CostWeights::validate() const {
  bool positive = false;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("cost weights must be finite and nonnegative");
    }
    positive = positive || v > 0.0;
  }
  if (!positive) throw ConfigError("at least one cost weight must be positive");
}

// Rebalanced once on nominal-gain rollouts over the training distribution
// so every term carries 5-40% of the total (about 13/13/11/14/7/5/6/31%).
CostWeights default_weights() {
  return {{1.0, 1.0, 1.0, 0.25, 0.05, 0.15, 100.0, 1.0}};
}

void PerfAccumulator::add(const QuadState& state, const FlatReference& ref,
                          const Wrench& command) {
  const Eigen::Vector3d e_p = state.position - ref.position;
  sums_[0] += std::abs(e_p.x());
  sums_[1] += std::abs(e_p.y());
  sums_[2] += std::abs(e_p.z());
  sums_[3] += (state.velocity - ref.velocity).norm();
  sums_[4] += state.body_rates.norm();
  sums_[5] += std::abs(command.thrust);
  sums_[6] += command.moment.norm();
  sums_[7] = e_p.norm();  // overwritten until the last entry
  ++count_;
}

PerfVector PerfAccumulator::finish(bool diverged) const {
  PerfVector c;
  c.fill(kSentinel);
  if (diverged || count_ == 0) return c;
  for (int i = 0; i < 7; ++i) c[i] = sums_[i] / count_;
  c[7] = sums_[7];
  for (double& v : c) v = std::isfinite(v) ? std::min(v, kSentinel) : kSentinel;
  return c;
}

PerfVector compute_perf(const StateLog& log, int horizon) {
  if (!log.diverged && static_cast<int>(log.entries.size()) != horizon) {
    throw std::invalid_argument("log holds " +
                                std::to_string(log.entries.size()) +
                                " entries, expected " + std::to_string(horizon));
  }
  PerfAccumulator acc;
  for (const auto& e : log.entries) acc.add(e.state, e.reference, e.command);
  return acc.finish(log.diverged);
}

double scalarize(const PerfVector& c, const CostWeights& w) {
  double j = 0.0;
  for (int i = 0; i < kPerfDim; ++i) j += w.w[i] * c[i];
  return j;
}

double ground_truth_cost(const QuadState& initial, const Gains& gains,
                         const SampledTrajectory& traj,
                         const QuadParams& params, const CostWeights& weights,
                         int horizon, long start) {
  return scalarize(
      compute_perf(rollout(initial, gains, traj, params, horizon, start),
                   horizon),
      weights);
}

std::vector<PerfVector> evaluate_windows(std::span<const WindowTask> tasks,
                                         const QuadParams& params,
                                         int horizon) {
  const std::size_t n = tasks.size();
  std::vector<PerfVector> out(n);
  if (n == 0) return out;
  BatchState batch(n);
  BatchCommand cmd = make_batch_command(n);
  std::vector<PerfAccumulator> acc(n);
  std::vector<std::uint8_t> dead(n, 0);
  std::vector<Wrench> wrench(n);
  for (std::size_t i = 0; i < n; ++i) batch.set(i, tasks[i].initial);
  const double dt = tasks[0].traj->dt();

  for (int k = 0; k < horizon; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const QuadState s = batch.get(i);
      if (!dead[i]) {
        const WindowTask& t = tasks[i];
        wrench[i] = compute_wrench(s, t.traj->at(t.start + k), t.gains, params);
        dead[i] = !std::isfinite(wrench[i].thrust) ||
                  !wrench[i].moment.allFinite();
      }
      RotorCommand rc = s.motor_speeds;
      if (!dead[i]) rc = allocate(wrench[i], params);
      for (int r = 0; r < 4; ++r) cmd[r][i] = rc[r];
    }
    step_batch(batch, cmd, params, dt);
    for (std::size_t i = 0; i < n; ++i) {
      if (dead[i]) continue;
      const QuadState s = batch.get(i);
      if (!s.finite()) {
        dead[i] = 1;
        continue;
      }
      const WindowTask& t = tasks[i];
      acc[i].add(s, t.traj->at(t.start + k + 1), wrench[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = acc[i].finish(dead[i] != 0);
  return out;
}

void write_metrics_header(std::ostream& out) {
  out << "schema_version,trajectory_id,kp_x,kp_y,kp_z,kv_x,kv_y,kv_z,kr,"
         "komega,c_ex,c_ey,c_ez,c_ev,c_omega,c_thrust,c_moment,c_terminal,"
         "cost\n";
}

void write_metrics_row(std::ostream& out, const std::string& trajectory_id,
                       const Gains& gains, const PerfVector& c, double cost) {
  out << kMetricsSchemaVersion << ',' << trajectory_id;
  for (double g : gains.to_array()) out << ',' << format_double(g);
  for (double v : c) out << ',' << format_double(v);
  out << ',' << format_double(cost) << '\n';
}

}  // namespace trackopt
