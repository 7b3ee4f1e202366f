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

#include "trackopt/experiments.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "trackopt/batch.h"
#include "trackopt/kvfile.h"

namespace trackopt {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_layout(Method method, const CostModel* model) {
  if (!method_needs_model(method)) return;
  if (!model) {
    throw ConfigError(std::string(method_name(method)) + " needs a model");
  }
  const InputLayout want =
      method == Method::kTaco ? InputLayout::kFull : InputLayout::kNoTraj;
  if (model->layout() != want) {
    throw ConfigError(std::string(method_name(method)) + " needs a " +
                      layout_name(want) + " model, got " +
                      layout_name(model->layout()));
  }
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j);  // ties share a rank
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

}  // namespace

const char* method_name(Method method) {
  switch (method) {
    case Method::kTaco: return "taco";
    case Method::kTacoNoTraj: return "taco-no-traj";
    case Method::kNominal: return "nominal";
    case Method::kOracleStatic: return "oracle-static";
    case Method::kOracleAdaptive: return "oracle-adaptive";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kTaco, Method::kTacoNoTraj, Method::kNominal,
                   Method::kOracleStatic, Method::kOracleAdaptive}) {
    if (name == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool method_needs_model(Method method) {
  return method == Method::kTaco || method == Method::kTacoNoTraj;
}

RunResult run_method(Method method, const SampledTrajectory& traj,
                     const QuadParams& params, const CostModel* model,
                     const EvalConfig& config, std::uint64_t seed) {
  require_layout(method, model);
  switch (method) {
    case Method::kNominal:
      return run_receding(traj, params, fixed_gains_policy(nominal_gains()),
                          config.run);
    case Method::kOracleStatic: {
      SearchConfig s = config.oracle;
      s.seed = seed;
      const SearchResult r = oracle_static(traj, params, config.weights, s);
      return run_receding(traj, params, fixed_gains_policy(r.best), config.run);
    }
    case Method::kOracleAdaptive: {
      SearchConfig s = config.oracle;
      s.seed = seed;
      return run_receding(
          traj, params,
          oracle_adaptive_policy(traj, params, config.weights, s,
                                 config.run.horizon),
          config.run);
    }
    case Method::kTaco:
    case Method::kTacoNoTraj: {
      SearchConfig s = config.search;
      s.seed = seed;
      return receding_horizon_run(*model, traj, params, config.weights, s,
                                  config.run);
    }
  }
  throw ConfigError("unknown method");
}

std::vector<TrajectoryOutcome> evaluate_suite(const EvalConfig& config,
                                              const QuadParams& params,
                                              const CostModel* model) {
  if (config.count < 1) throw ConfigError("suite size must be >= 1");
  require_layout(config.method, model);
  std::vector<TrajectoryOutcome> out(config.count);
  parallel_for(out.size(), config.threads, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    const SampledTrajectory traj = realize(
        suite_trajectory(config.suite, config.seed, index, config.suite_config));
    out[i].id = std::string(suite_name(config.suite)) + "-" +
                std::to_string(config.seed) + "-" + std::to_string(index);
    out[i].run = run_method(config.method, traj, params, model, config,
                            derive_seed(config.seed, i));
  });
  return out;
}

EvalSummary summarize(const std::vector<TrajectoryOutcome>& outcomes) {
  EvalSummary s;
  s.count = static_cast<int>(outcomes.size());
  double sum = 0.0;
  double latency = 0.0;
  for (const auto& o : outcomes) {
    latency += o.run.mean_latency_ms;
    if (o.run.crashed) {
      ++s.failures;
    } else {
      sum += o.run.mean_error;
    }
  }
  const int ok = s.count - s.failures;
  s.mean_error = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
  if (s.count > 0) s.mean_latency_ms = latency / s.count;
  return s;
}

void write_eval_summary_header(std::ostream& out) {
  out << "schema_version,suite,method,trajectories,failures,mean_error,"
         "mean_latency_ms,seconds\n";
}

void write_eval_summary_row(std::ostream& out, const std::string& suite,
                            const std::string& method,
                            const EvalSummary& summary) {
  out << kSummarySchemaVersion << ',' << suite << ',' << method << ','
      << summary.count << ',' << summary.failures << ','
      << format_double(summary.mean_error) << ','
      << format_double(summary.mean_latency_ms) << ','
      << format_double(summary.seconds) << '\n';
}

// --- cross-validation ------------------------------------------------------

double speed_level(const std::string& name) {
  if (name == "slow") return 0.5;
  if (name == "med") return 1.0;
  if (name == "fast") return 1.75;
  if (name == "xfast") return 2.5;
  throw ConfigError("unknown speed level '" + name + "'");
}

std::vector<TrajectorySpec> crossval_trajectories(const CrossvalConfig& config) {
  std::vector<double> speeds = config.speeds;
  if (speeds.empty()) {
    for (const auto& l : config.labels) speeds.push_back(speed_level(l));
  }
  if (speeds.size() != config.labels.size() || speeds.size() < 2) {
    throw ConfigError("crossval needs >= 2 speeds, one per label");
  }
  const TrajectorySpec base = suite_trajectory(Suite::kMinsnap, config.seed, 0);
  const auto& points = base.keypoints.positions;
  FamilyConfig fc;
  fc.max_segment_time = 1e9;
  std::vector<TrajectorySpec> out;
  for (double v : speeds) {
    if (!(v > 0.0)) throw ConfigError("crossval speeds must be positive");
    const std::vector<double> seg =
        segment_times(points, std::vector<double>(points.size() - 1, v), fc);
    TrajectorySpec s;
    s.type = TrajectoryType::kMinsnap;
    s.keypoints.positions = points;
    s.keypoints.times = {0.0};
    for (double d : seg) s.keypoints.times.push_back(s.keypoints.times.back() + d);
    out.push_back(s);
  }
  return out;
}

namespace {

// Gains of a schedule recorded on a trajectory with `from_last` steps,
// looked up at the same fraction of another trajectory's duration.
GainPolicy replay_policy(const std::vector<GainUpdate>& schedule,
                         long from_last, long to_last) {
  return [&schedule, from_last, to_last](const QuadState&, long step, double*) {
    const double frac = static_cast<double>(step) / static_cast<double>(to_last);
    const long at = std::lround(frac * static_cast<double>(from_last));
    Gains g = schedule.front().gains;
    for (const GainUpdate& u : schedule) {
      if (u.step > at) break;
      g = u.gains;
    }
    return g;
  };
}

}  // namespace

CrossvalResult crossval(const CrossvalConfig& config, const QuadParams& params,
                        const CostModel* model) {
  const auto t0 = Clock::now();
  if (config.tuner == CrossvalTuner::kTaco) {
    if (!model || model->layout() != InputLayout::kFull) {
      throw ConfigError("TACO cross-validation needs a full model");
    }
  }
  const std::vector<TrajectorySpec> specs = crossval_trajectories(config);
  const std::size_t n = specs.size();
  std::vector<SampledTrajectory> trajs(n);
  for (std::size_t i = 0; i < n; ++i) trajs[i] = realize(specs[i]);

  // Tune for each trajectory.
  std::vector<std::vector<GainUpdate>> schedules(n);
  parallel_for(n, config.threads, [&](std::size_t j) {
    const std::uint64_t seed = derive_seed(config.seed, 100 + j);
    if (config.tuner == CrossvalTuner::kOracle) {
      SearchConfig s = config.oracle;
      s.seed = seed;
      GainUpdate u;
      u.gains = oracle_static(trajs[j], params, config.weights, s).best;
      schedules[j] = {u};
    } else {
      SearchConfig s = config.search;
      s.seed = seed;
      schedules[j] = receding_horizon_run(*model, trajs[j], params,
                                          config.weights, s, config.run)
                         .schedule;
    }
  });

  CrossvalResult r;
  r.labels = config.labels;
  r.error.assign(n, std::vector<double>(n, 0.0));
  r.crashed.assign(n, std::vector<bool>(n, false));
  parallel_for(n * n, config.threads, [&](std::size_t k) {
    const std::size_t i = k / n, j = k % n;
    const RunResult run = run_receding(
        trajs[i], params,
        replay_policy(schedules[j], trajs[j].last_step(), trajs[i].last_step()),
        config.run);
    r.error[i][j] = run.mean_error;
    r.crashed[i][j] = run.crashed;
  });
  for (std::size_t i = 0; i < n; ++i) {
    bool best = !r.crashed[i][i];
    for (std::size_t j = 0; j < n && best; ++j) {
      if (j != i && !r.crashed[i][j] && r.error[i][j] < r.error[i][i]) best = false;
    }
    if (best) ++r.diagonal_row_minima;
  }
  r.seconds = seconds_since(t0);
  return r;
}

void write_crossval_csv(std::ostream& out, const CrossvalResult& result) {
  out << "schema_version,trajectory";
  for (const auto& l : result.labels) out << ",tuned_" << l;
  out << ",row_min_on_diagonal\n";
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    out << kSummarySchemaVersion << ',' << result.labels[i];
    std::size_t arg = 0;
    for (std::size_t j = 0; j < result.labels.size(); ++j) {
      out << ',' << format_double(result.error[i][j]);
      if (result.crashed[i][j]) out << " (crash)";
      if (!result.crashed[i][j] &&
          (result.crashed[i][arg] || result.error[i][j] < result.error[i][arg])) {
        arg = j;
      }
    }
    out << ',' << (arg == i && !result.crashed[i][i] ? 1 : 0) << '\n';
  }
}

// --- adaptation suite --------------------------------------------------------

std::vector<AdaptOutcome> adapt_suite(const AdaptSuiteConfig& config,
                                      const QuadParams& params,
                                      const CostModel& model) {
  if (config.count < 1) throw ConfigError("suite size must be >= 1");
  if (model.layout() != InputLayout::kFull) {
    throw ConfigError("trajectory adaptation needs a full model");
  }
  std::vector<AdaptOutcome> out(config.count);
  parallel_for(out.size(), config.threads, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    const TrajectorySpec spec = suite_trajectory(config.suite, config.seed,
                                                 index, config.suite_config);
    const SplineTrajectory spline = build_spline(spec);
    out[i].id = std::string(suite_name(config.suite)) + "-" +
                std::to_string(config.seed) + "-" + std::to_string(index);
    AdaptRunConfig c = config.run;
    c.search.seed = derive_seed(config.seed, i);
    out[i].adapted =
        receding_horizon_adapt(model, spline, params, config.weights, c);
    c.mode = AdaptMode::kNone;
    out[i].baseline =
        receding_horizon_adapt(model, spline, params, config.weights, c);
  });
  return out;
}

AdaptSummary summarize(const std::vector<AdaptOutcome>& outcomes) {
  AdaptSummary s;
  s.count = static_cast<int>(outcomes.size());
  double a = 0.0, b = 0.0;
  std::size_t na = 0, nb = 0;
  for (const auto& o : outcomes) {
    if (o.adapted.run.crashed) ++s.adapted_crashes;
    if (o.baseline.run.crashed) ++s.baseline_crashes;
    for (double e : o.adapted.keypoint_errors) a += e, ++na;
    for (double e : o.baseline.keypoint_errors) b += e, ++nb;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.adapted_keypoint_error = na ? a / static_cast<double>(na) : nan;
  s.baseline_keypoint_error = nb ? b / static_cast<double>(nb) : nan;
  return s;
}

void write_adapt_summary_header(std::ostream& out) {
  out << "schema_version,mode,trajectories,adapted_keypoint_error,"
         "static_keypoint_error,ratio,adapted_crashes,static_crashes,seconds\n";
}

void write_adapt_summary_row(std::ostream& out, const std::string& mode,
                             const AdaptSummary& s) {
  out << kSummarySchemaVersion << ',' << mode << ',' << s.count << ','
      << format_double(s.adapted_keypoint_error) << ','
      << format_double(s.baseline_keypoint_error) << ','
      << format_double(s.adapted_keypoint_error / s.baseline_keypoint_error)
      << ',' << s.adapted_crashes << ',' << s.baseline_crashes << ','
      << format_double(s.seconds) << '\n';
}

// --- simulator benchmark ----------------------------------------------------

BenchRow bench_dynamics(const QuadParams& params, int batch,
                        double min_seconds) {
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  constexpr int kRound = 100;  // steps per round, from a fresh hover
  const std::size_t b = static_cast<std::size_t>(batch);
  const QuadState hover = hover_state(params);
  std::vector<RotorCommand> commands(b);
  BatchCommand batched = make_batch_command(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (int r = 0; r < 4; ++r) {
      const double w = hover.motor_speeds[r] *
                       (1.0 + 1e-3 * static_cast<double>((i * 7 + r) % 11));
      commands[i][r] = w;
      batched[r][i] = w;
    }
  }

  BenchRow row;
  row.batch = batch;
  {
    std::vector<QuadState> states(b);
    long steps = 0;
    const auto t0 = Clock::now();
    do {
      std::fill(states.begin(), states.end(), hover);
      for (int k = 0; k < kRound; ++k) {
        for (std::size_t i = 0; i < b; ++i) {
          states[i] = step(states[i], commands[i], params, kSimDt);
        }
      }
      steps += kRound * batch;
    } while (seconds_since(t0) < min_seconds);
    row.scalar_steps_per_s = static_cast<double>(steps) / seconds_since(t0);
  }
  {
    BatchState states(b);
    long steps = 0;
    const auto t0 = Clock::now();
    do {
      for (std::size_t i = 0; i < b; ++i) states.set(i, hover);
      for (int k = 0; k < kRound; ++k) {
        step_batch(states, batched, params, kSimDt);
      }
      steps += kRound * batch;
    } while (seconds_since(t0) < min_seconds);
    row.batched_steps_per_s = static_cast<double>(steps) / seconds_since(t0);
  }
  row.speedup = row.batched_steps_per_s / row.scalar_steps_per_s;
  return row;
}

void write_bench_header(std::ostream& out) {
  out << "schema_version,batch,scalar_steps_per_s,batched_steps_per_s,"
         "speedup\n";
}

void write_bench_row(std::ostream& out, const BenchRow& row) {
  out << kSummarySchemaVersion << ',' << row.batch << ','
      << format_double(row.scalar_steps_per_s) << ','
      << format_double(row.batched_steps_per_s) << ','
      << format_double(row.speedup) << '\n';
}

// --- predictor validation ---------------------------------------------------

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman needs two equal series of >= 2");
  }
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() - 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

RankCheck rank_check(const CostModel& model, const QuadParams& params,
                     const DatagenConfig& data, std::size_t begin,
                     std::size_t end, int contexts, int gains_per_context,
                     const CostWeights& weights, std::uint64_t seed) {
  if (contexts < 1 || gains_per_context < 2 || end <= begin) {
    throw ConfigError("rank check needs contexts, >= 2 gains and records");
  }
  const std::size_t group = static_cast<std::size_t>(data.group_size);
  const std::size_t g0 = (begin + group - 1) / group;
  const std::size_t g1 = (end - 1) / group + 1;
  if (g1 <= g0) throw ConfigError("no whole trajectory group in the range");
  const std::size_t available = g1 - g0;
  const std::size_t n = std::min<std::size_t>(contexts, available);

  std::vector<double> rho(n);
  const int in = model.input_size();
  parallel_for(n, default_thread_count(), [&](std::size_t c) {
    const std::size_t g = g0 + c * available / n;
    const RecordContext ctx = regenerate_record(params, data, g * group);
    std::mt19937_64 rng(derive_seed(seed, c));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<WindowTask> tasks(gains_per_context);
    std::vector<double> x(static_cast<std::size_t>(gains_per_context) * in);
    const std::vector<double> base =
        encode(model.layout(), Gains{}, ctx.state, ctx.traj, ctx.step);
    for (int i = 0; i < gains_per_context; ++i) {
      std::array<double, kNumGains> a{};
      for (int k = 0; k < kNumGains; ++k) {
        a[k] = data.bounds.lo[k] + (data.bounds.hi[k] - data.bounds.lo[k]) * unit(rng);
      }
      tasks[i] = {ctx.state, Gains::from_array(a), &ctx.traj, ctx.step};
      std::copy(base.begin(), base.end(), x.begin() + i * in);
      set_gains(tasks[i].gains, x.data() + i * in);
    }
    const auto truth = evaluate_windows(tasks, params, kHorizon);
    std::vector<double> pred(static_cast<std::size_t>(gains_per_context) * kPerfDim);
    model.predict(x.data(), gains_per_context, pred.data());
    std::vector<double> jt(gains_per_context), jp(gains_per_context);
    for (int i = 0; i < gains_per_context; ++i) {
      PerfVector p;
      std::copy_n(pred.begin() + i * kPerfDim, kPerfDim, p.begin());
      jp[i] = scalarize(p, weights);
      jt[i] = scalarize(truth[i], weights);
    }
    rho[c] = spearman(jp, jt);
  });
  RankCheck r;
  r.contexts = static_cast<int>(n);
  r.gains_per_context = gains_per_context;
  r.mean_spearman = std::accumulate(rho.begin(), rho.end(), 0.0) / n;
  r.min_spearman = *std::min_element(rho.begin(), rho.end());
  return r;
}

ValidationReport validation_report(const CostModel& model, const Dataset& data,
                                   std::size_t begin, std::size_t end,
                                   const CostWeights& weights) {
  if (data.input_dim != model.input_size()) {
    throw ConfigError("dataset and model input dims differ");
  }
  end = std::min(end, data.size());
  ValidationReport r;
  r.target_mae.assign(kPerfDim, 0.0);
  if (end <= begin) return r;
  const int in = model.input_size();
  constexpr std::size_t kChunk = 4096;
  std::vector<double> x, c;
  std::vector<double> jp, jt;
  for (std::size_t s = begin; s < end; s += kChunk) {
    const std::size_t m = std::min(kChunk, end - s);
    x.resize(m * in);
    c.resize(m * kPerfDim);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(data.input(s + i), in, x.begin() + i * in);
    }
    model.predict(x.data(), static_cast<int>(m), c.data());
    for (std::size_t i = 0; i < m; ++i) {
      PerfVector p, t;
      for (int k = 0; k < kPerfDim; ++k) {
        p[k] = c[i * kPerfDim + k];
        t[k] = data.output(s + i)[k];
        r.target_mae[k] += std::abs(p[k] - t[k]);
      }
      jp.push_back(scalarize(p, weights));
      jt.push_back(scalarize(t, weights));
    }
  }
  r.pairs = end - begin;
  for (double& v : r.target_mae) v /= static_cast<double>(r.pairs);
  if (r.pairs >= 2) r.pair_spearman = spearman(jp, jt);
  return r;
}

void write_validation_report(std::ostream& out, const ValidationReport& r) {
  KeyValueFile kv;
  kv.set("validation_pairs", static_cast<double>(r.pairs));
  kv.set("target_mae", r.target_mae);
  kv.set("cost_spearman", r.pair_spearman);
  out << kv.to_string();
}

}  // namespace trackopt
