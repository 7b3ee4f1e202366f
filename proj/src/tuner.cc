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

#include "trackopt/tuner.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <numbers>
#include <random>

#include "trackopt/kvfile.h"
#include "trackopt/parallel.h"
#include "trackopt/rollout.h"

namespace trackopt {

void GainBounds::validate() const {
  for (int i = 0; i < kNumGains; ++i) {
    if (!(lo[i] >= 0.0) || !(hi[i] > lo[i]) || !std::isfinite(hi[i])) {
      throw ConfigError("gain bounds need 0 <= lo < hi in dimension " +
                        std::to_string(i));
    }
  }
}

bool GainBounds::contains(const Gains& g) const {
  const auto a = g.to_array();
  for (int i = 0; i < kNumGains; ++i) {
    if (a[i] < lo[i] || a[i] > hi[i]) return false;
  }
  return true;
}

Gains GainBounds::clamp(const Gains& g) const {
  auto a = g.to_array();
  for (int i = 0; i < kNumGains; ++i) a[i] = std::clamp(a[i], lo[i], hi[i]);
  return Gains::from_array(a);
}

GainBounds default_gain_bounds() {
  // calibrate_bounds() on the default airframe; `trackopt calibrate`
  // reproduces these.
  GainBounds b;
  b.lo = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  b.hi = {1.145625, 1.145625, 10.7859375, 0.705, 0.705, 3.24, 0.02185,
          0.0037375};
  return b;
}

void SearchConfig::validate() const {
  bounds.validate();
  if (samples < 1 || perturbations < 0 || iterations < 1 ||
      !(perturbation_scale >= 0.0)) {
    throw ConfigError("search needs samples >= 1, iterations >= 1");
  }
}

SearchConfig oracle_search_config() {
  SearchConfig c;
  c.samples = 1024;
  c.perturbations = 256;
  c.iterations = 6;
  return c;
}

SearchResult random_search(const BatchCost& cost, const SearchConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& lo = config.bounds.lo;
  const auto& hi = config.bounds.hi;

  SearchResult result;
  result.cost = std::numeric_limits<double>::infinity();
  std::vector<Gains> candidates;
  std::vector<double> costs;
  bool have_best = false;
  for (int it = 0; it < config.iterations; ++it) {
    candidates.clear();
    for (int i = 0; i < config.samples; ++i) {
      std::array<double, kNumGains> a;
      for (int k = 0; k < kNumGains; ++k) {
        a[k] = lo[k] + (hi[k] - lo[k]) * unit(rng);
      }
      candidates.push_back(Gains::from_array(a));
    }
    if (it > 0) {
      const auto center = result.best.to_array();
      for (int i = 0; i < config.perturbations; ++i) {
        std::array<double, kNumGains> a;
        for (int k = 0; k < kNumGains; ++k) {
          const double sd = config.perturbation_scale * (hi[k] - lo[k]);
          a[k] = std::clamp(center[k] + sd * normal(rng), lo[k], hi[k]);
        }
        candidates.push_back(Gains::from_array(a));
      }
    }
    costs.assign(candidates.size(), 0.0);
    cost(candidates, costs);
    result.evaluations += static_cast<int>(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double c = std::isfinite(costs[i])
                           ? costs[i]
                           : std::numeric_limits<double>::infinity();
      if (!have_best || c < result.cost) {
        result.best = candidates[i];
        result.cost = c;
        have_best = true;
      }
    }
    result.best_per_iteration.push_back(result.cost);
  }
  return result;
}

SearchResult optimize_gains(const CostModel& model, const QuadState& state,
                            const SampledTrajectory& traj, long step,
                            const CostWeights& weights,
                            const SearchConfig& config) {
  const int in = model.input_size();
  const std::vector<double> base =
      encode(model.layout(), Gains{}, state, traj, step);
  std::vector<double> x;
  std::vector<double> c;
  auto cost = [&](std::span<const Gains> candidates, std::span<double> out) {
    const std::size_t n = candidates.size();
    x.resize(n * in);
    c.resize(n * kPerfDim);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(base.begin(), base.end(), x.begin() + i * in);
      set_gains(candidates[i], x.data() + i * in);
    }
    model.predict(x.data(), static_cast<int>(n), c.data());
    for (std::size_t i = 0; i < n; ++i) {
      PerfVector p;
      std::copy_n(c.begin() + i * kPerfDim, kPerfDim, p.begin());
      out[i] = scalarize(p, weights);
    }
  };
  return random_search(cost, config);
}

RunResult run_receding(const SampledTrajectory& traj, const QuadParams& params,
                       const GainPolicy& policy, const RunConfig& config) {
  if (config.period < 1 || config.period > config.horizon) {
    throw ConfigError("re-tune period must satisfy 1 <= T <= H");
  }
  RunResult run;
  QuadState s = hover_state(params, traj.at(0).position);
  const long steps = traj.last_step();
  run.log.reserve(steps);
  Gains gains = nominal_gains();
  double error_sum = 0.0;
  double latency_sum = 0.0;
  for (long n = 0; n < steps; ++n) {
    if (n % config.period == 0) {
      GainUpdate u;
      u.step = n;
      const auto t0 = std::chrono::steady_clock::now();
      u.gains = policy(s, n, &u.predicted_cost);
      u.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      gains = u.gains;
      latency_sum += u.latency_ms;
      run.max_latency_ms = std::max(run.max_latency_ms, u.latency_ms);
      run.schedule.push_back(u);
    }
    LogEntry e;
    try {
      e.state = control_step(s, traj.at(n), gains, params, traj.dt(),
                             &e.command);
    } catch (const SimulationDiverged&) {
      run.diverged = true;
    }
    if (run.diverged || !e.state.finite()) {
      run.diverged = true;
      run.crashed = true;
      break;
    }
    e.reference = traj.at(n + 1);
    s = e.state;
    const double err = (s.position - e.reference.position).norm();
    error_sum += err;
    run.max_error = std::max(run.max_error, err);
    run.log.push_back(e);
    if (err > config.crash_threshold) {
      run.crashed = true;
      break;
    }
  }
  if (!run.log.empty()) {
    run.mean_error = error_sum / static_cast<double>(run.log.size());
  }
  if (!run.schedule.empty()) {
    run.mean_latency_ms =
        latency_sum / static_cast<double>(run.schedule.size());
  }
  return run;
}

GainPolicy fixed_gains_policy(const Gains& gains) {
  return [gains](const QuadState&, long, double*) { return gains; };
}

GainPolicy model_policy(const CostModel& model, const SampledTrajectory& traj,
                        const CostWeights& weights,
                        const SearchConfig& config) {
  return [&model, &traj, weights, config](const QuadState& s, long step,
                                          double* predicted) {
    SearchConfig c = config;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(step));
    const SearchResult r = optimize_gains(model, s, traj, step, weights, c);
    if (predicted) *predicted = r.cost;
    return r.best;
  };
}

RunResult receding_horizon_run(const CostModel& model,
                               const SampledTrajectory& traj,
                               const QuadParams& params,
                               const CostWeights& weights,
                               const SearchConfig& search,
                               const RunConfig& run) {
  return run_receding(traj, params, model_policy(model, traj, weights, search),
                      run);
}

void whole_trajectory_costs(const SampledTrajectory& traj,
                            const QuadParams& params,
                            const CostWeights& weights,
                            std::span<const Gains> candidates,
                            std::span<double> costs) {
  CostWeights w = weights;
  w.w[7] = 0.0;
  const QuadState start = hover_state(params, traj.at(0).position);
  std::vector<WindowTask> tasks(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    tasks[i] = {start, candidates[i], &traj, 0};
  }
  const auto perf = evaluate_windows(tasks, params, traj.last_step());
  for (std::size_t i = 0; i < perf.size(); ++i) costs[i] = scalarize(perf[i], w);
}

SearchResult oracle_static(const SampledTrajectory& traj,
                           const QuadParams& params,
                           const CostWeights& weights,
                           const SearchConfig& config) {
  return random_search(
      [&](std::span<const Gains> c, std::span<double> out) {
        whole_trajectory_costs(traj, params, weights, c, out);
      },
      config);
}

GainPolicy oracle_adaptive_policy(const SampledTrajectory& traj,
                                  const QuadParams& params,
                                  const CostWeights& weights,
                                  const SearchConfig& config, int horizon) {
  return [&traj, &params, weights, config, horizon](
             const QuadState& s, long step, double* predicted) {
    SearchConfig c = config;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(step));
    const SearchResult r = random_search(
        [&](std::span<const Gains> candidates, std::span<double> out) {
          std::vector<WindowTask> tasks(candidates.size());
          for (std::size_t i = 0; i < candidates.size(); ++i) {
            tasks[i] = {s, candidates[i], &traj, step};
          }
          const auto perf = evaluate_windows(tasks, params, horizon);
          for (std::size_t i = 0; i < perf.size(); ++i) {
            out[i] = scalarize(perf[i], weights);
          }
        },
        c);
    if (predicted) *predicted = r.cost;
    return r.best;
  };
}

void write_run_csv(std::ostream& out, const RunResult& run, double dt) {
  out << "schema_version,time,px,py,pz,ref_x,ref_y,ref_z,error,kp_x,kp_y,"
         "kp_z,kv_x,kv_y,kv_z,kr,komega\n";
  std::size_t u = 0;
  Gains active;
  for (std::size_t k = 0; k < run.log.size(); ++k) {
    while (u < run.schedule.size() &&
           run.schedule[u].step <= static_cast<long>(k)) {
      active = run.schedule[u++].gains;
    }
    const LogEntry& e = run.log[k];
    out << kRunSchemaVersion << ','
        << format_double(static_cast<double>(k + 1) * dt);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(e.state.position[i]);
    for (int i = 0; i < 3; ++i) {
      out << ',' << format_double(e.reference.position[i]);
    }
    out << ','
        << format_double((e.state.position - e.reference.position).norm());
    for (double g : active.to_array()) out << ',' << format_double(g);
    out << '\n';
  }
}

void write_summary_header(std::ostream& out) {
  out << "schema_version,trajectory_id,method,mean_error,max_error,crashed,"
         "diverged,mean_latency_ms,max_latency_ms,retunes\n";
}

void write_summary_row(std::ostream& out, const std::string& trajectory_id,
                       const std::string& method, const RunResult& run) {
  out << kRunSchemaVersion << ',' << trajectory_id << ',' << method << ','
      << format_double(run.mean_error) << ',' << format_double(run.max_error)
      << ',' << (run.crashed ? 1 : 0) << ',' << (run.diverged ? 1 : 0) << ','
      << format_double(run.mean_latency_ms) << ','
      << format_double(run.max_latency_ms) << ',' << run.schedule.size()
      << '\n';
}

namespace {

// Perturbed hover at the origin recovers within 5 s.
bool hover_recovers(const Gains& gains, const QuadParams& params,
                    const SampledTrajectory& still) {
  QuadState s = hover_state(params, Eigen::Vector3d(0.2, -0.2, 0.1));
  s.velocity = Eigen::Vector3d(0.3, 0.0, -0.2);
  s.attitude = Eigen::Quaterniond(
      Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0,
                        Eigen::Vector3d(1.0, 1.0, 0.0).normalized()));
  const StateLog log = rollout(s, gains, still, params, still.last_step());
  if (log.diverged) return false;
  double max_err = 0.0;
  for (const auto& e : log.entries) {
    max_err = std::max(max_err, e.state.position.norm());
  }
  const QuadState& end = log.entries.back().state;
  return max_err < 2.0 && end.position.norm() < 0.05 &&
         end.body_rates.norm() < 0.5;
}

}  // namespace

BoundsSweep calibrate_bounds(const QuadParams& params) {
  const SampledTrajectory still(std::vector<FlatReference>(501), kSimDt);
  std::vector<double> multipliers{0.0};
  for (int e = -6; e <= 6; ++e) multipliers.push_back(std::ldexp(1.0, e));
  const auto nominal = nominal_gains().to_array();
  const auto one = std::find(multipliers.begin(), multipliers.end(), 1.0) -
                   multipliers.begin();
  BoundsSweep sweep;
  for (int d = 0; d < kNumGains; ++d) {
    auto stable = [&](std::size_t i) {
      auto g = nominal;
      g[d] = nominal[d] * multipliers[i];
      return hover_recovers(Gains::from_array(g), params, still);
    };
    if (!stable(one)) {
      throw std::runtime_error("nominal gains do not recover from hover");
    }
    auto lo = one, hi = one;
    while (lo > 0 && stable(lo - 1)) --lo;
    while (hi + 1 < static_cast<long>(multipliers.size()) && stable(hi + 1)) {
      ++hi;
    }
    const double a = nominal[d] * multipliers[lo];
    const double b = nominal[d] * multipliers[hi];
    sweep.stable_lo[d] = a;
    sweep.stable_hi[d] = b;
    const double center = 0.5 * (a + b), width = b - a;
    sweep.bounds.lo[d] = std::max(0.0, center - width);
    sweep.bounds.hi[d] = center + width;
  }
  return sweep;
}

}  // namespace trackopt
