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

#include "trackopt/adapter.h"

#include <chrono>
#include <cmath>
#include <ostream>

#include "trackopt/kvfile.h"
#include "trackopt/parallel.h"
#include "trackopt/rollout.h"

namespace trackopt {

double window_objective(const CostModel& model, const SplineTrajectory& spline,
                        const QuadState& state, const Gains& gains, long step,
                        const CostWeights& weights, Eigen::VectorXd* grad,
                        double dt) {
  if (model.layout() != InputLayout::kFull) {
    throw std::invalid_argument("adaptation needs a model with lookahead");
  }
  // Gains and observation slices come from encode; the reference offsets
  // are taken straight from the spline so they match its Jacobian.
  std::vector<double> x(kFullInputDim, 0.0);
  const SampledTrajectory here({spline.sample(step * dt)}, dt);
  encode(InputLayout::kFull, gains, state, here, 0, x.data());
  for (int i = 0; i < kCoarseSamples; ++i) {
    const double t = (step + i * kCoarseStride) * dt;
    const Eigen::Vector3d d = spline.sample(t).position - state.position;
    for (int k = 0; k < 3; ++k) x[kTrajOffset + 3 * i + k] = d[k];
  }
  if (!grad) {
    PerfVector c;
    model.predict(x.data(), 1, c.data());
    return scalarize(c, weights);
  }
  std::vector<double> gx(kFullInputDim);
  const double j = model.cost_gradient(x.data(), weights, gx.data());
  grad->setZero(spline.null_dimension());
  for (int i = 0; i < kCoarseSamples; ++i) {
    const double t = (step + i * kCoarseStride) * dt;
    const Eigen::Map<const Eigen::Vector3d> g(gx.data() + kTrajOffset + 3 * i);
    *grad += spline.position_jacobian(t).transpose() * g;
  }
  return j;
}

AdaptResult adapt_window(const CostModel& model, const SplineTrajectory& spline,
                         const QuadState& state, const Gains& gains, long step,
                         const CostWeights& weights, const AdaptConfig& config,
                         double dt) {
  AdaptResult r{spline};
  r.cost_before =
      window_objective(model, spline, state, gains, step, weights, nullptr, dt);
  r.cost_after = r.cost_before;
  if (spline.null_dimension() == 0) {
    r.empty_nullspace = true;
    return r;
  }
  Eigen::VectorXd phi = spline.null_coordinates();
  Eigen::VectorXd g;
  SplineTrajectory current = spline;
  for (int it = 0; it < config.steps; ++it) {
    window_objective(model, current, state, gains, step, weights, &g, dt);
    const double norm = g.norm();
    if (!std::isfinite(norm)) break;
    if (norm > config.clip_norm) g *= config.clip_norm / norm;
    phi -= config.learning_rate * g;
    current = spline.with_null_coordinates(phi);
  }
  r.trajectory = current;
  r.cost_after =
      window_objective(model, current, state, gains, step, weights, nullptr, dt);
  return r;
}

AdaptMode parse_adapt_mode(const std::string& name) {
  if (name == "none") return AdaptMode::kNone;
  if (name == "traj-only") return AdaptMode::kTrajOnly;
  if (name == "traj+gains") return AdaptMode::kTrajAndGains;
  throw ConfigError("unknown adaptation mode '" + name + "'");
}

const char* adapt_mode_name(AdaptMode mode) {
  switch (mode) {
    case AdaptMode::kNone: return "none";
    case AdaptMode::kTrajOnly: return "traj-only";
    case AdaptMode::kTrajAndGains: return "traj+gains";
  }
  return "?";
}

std::vector<double> keypoint_errors(const SplineTrajectory& spline,
                                    const std::vector<LogEntry>& log,
                                    double dt) {
  const Keypoints& kp = spline.keypoints();
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < kp.positions.size(); ++i) {
    // log[k - 1] holds the state at time k dt.
    const long k = std::lround(kp.times[i] / dt);
    if (k < 1 || static_cast<std::size_t>(k) > log.size()) break;
    out.push_back((log[k - 1].state.position - kp.positions[i]).norm());
  }
  return out;
}

AdaptRunResult receding_horizon_adapt(const CostModel& model,
                                      const SplineTrajectory& spline,
                                      const QuadParams& params,
                                      const CostWeights& weights,
                                      const AdaptRunConfig& config,
                                      double dt) {
  if (config.adapt_period < 1) throw ConfigError("adapt period must be >= 1");
  if (config.run.period < 1) throw ConfigError("re-tune period must be >= 1");
  AdaptRunResult out;
  RunResult& run = out.run;
  SplineTrajectory current = spline;
  SampledTrajectory dense = sample_dense(current, dt);
  const long steps = dense.last_step();
  QuadState s = hover_state(params, dense.at(0).position);
  Gains gains = nominal_gains();
  run.log.reserve(steps);
  run.schedule.push_back({0, gains, 0.0, 0.0});
  double error_sum = 0.0;
  double latency_sum = 0.0;
  for (long n = 0; n < steps; ++n) {
    if (config.mode != AdaptMode::kNone && n % config.adapt_period == 0) {
      const AdaptResult a = adapt_window(model, current, s, gains, n, weights,
                                         config.adapt, dt);
      current = a.trajectory;
      dense = sample_dense(current, dt);
      out.windows.push_back({n, a.cost_before, a.cost_after,
                             current.null_coordinates().norm()});
    }
    if (config.mode == AdaptMode::kTrajAndGains && n % config.run.period == 0) {
      SearchConfig c = config.search;
      c.seed = derive_seed(config.search.seed, static_cast<std::uint64_t>(n));
      const auto t0 = std::chrono::steady_clock::now();
      const SearchResult r = optimize_gains(model, s, dense, n, weights, c);
      GainUpdate u{n, r.best, r.cost, 0.0};
      u.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      gains = u.gains;
      latency_sum += u.latency_ms;
      run.max_latency_ms = std::max(run.max_latency_ms, u.latency_ms);
      if (n == 0) run.schedule.clear();
      run.schedule.push_back(u);
    }
    LogEntry e;
    try {
      e.state = control_step(s, dense.at(n), gains, params, dt, &e.command);
    } catch (const SimulationDiverged&) {
      run.diverged = true;
    }
    if (run.diverged || !e.state.finite()) {
      run.diverged = true;
      run.crashed = true;
      break;
    }
    e.reference = dense.at(n + 1);
    s = e.state;
    const double err = (s.position - e.reference.position).norm();
    error_sum += err;
    run.max_error = std::max(run.max_error, err);
    run.log.push_back(e);
    if (err > config.run.crash_threshold) {
      run.crashed = true;
      break;
    }
  }
  if (!run.log.empty()) {
    run.mean_error = error_sum / static_cast<double>(run.log.size());
  }
  if (latency_sum > 0.0) {
    run.mean_latency_ms =
        latency_sum / static_cast<double>(run.schedule.size());
  }
  out.keypoint_errors = keypoint_errors(spline, run.log, dt);
  if (!out.keypoint_errors.empty()) {
    double sum = 0.0;
    for (double v : out.keypoint_errors) sum += v;
    out.mean_keypoint_error = sum / out.keypoint_errors.size();
  }
  return out;
}

void write_adapt_csv(std::ostream& out, const std::string& trajectory_id,
                     const AdaptRunResult& result, bool header) {
  if (header) {
    out << "schema_version,trajectory_id,record,index,step,keypoint_error,"
           "cost_before,cost_after,phi_norm\n";
  }
  for (std::size_t i = 0; i < result.keypoint_errors.size(); ++i) {
    out << kAdaptSchemaVersion << ',' << trajectory_id << ",keypoint,"
        << i + 1 << ",," << result.keypoint_errors[i] << ",,,\n";
  }
  for (std::size_t i = 0; i < result.windows.size(); ++i) {
    const AdaptWindow& w = result.windows[i];
    out << kAdaptSchemaVersion << ',' << trajectory_id << ",window," << i
        << ',' << w.step << ",," << w.cost_before << ',' << w.cost_after
        << ',' << w.phi_norm << '\n';
  }
}

}  // namespace trackopt
