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

#include "trackopt/datagen.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "trackopt/kvfile.h"
#include "trackopt/metrics.h"
#include "trackopt/parallel.h"

namespace trackopt {
namespace {

constexpr TrajectoryType kFamilies[4] = {
    TrajectoryType::kMinsnap, TrajectoryType::kMinsnapVarying,
    TrajectoryType::kRandomPoly, TrajectoryType::kZigzag};
constexpr int kMaxAttempts = 10;
// Groups per parallel work item. Fixed so the lock-step batches, and with
// them every record, do not depend on the thread count.
constexpr std::size_t kGroupsPerChunk = 16;

std::vector<double> array_values(const std::array<double, kNumGains>& a) {
  return std::vector<double>(a.begin(), a.end());
}

std::array<double, kNumGains> gain_array(const KeyValueFile& kv,
                                         const std::string& key,
                                         const std::array<double, kNumGains>& d) {
  if (!kv.has(key)) return d;
  const auto v = kv.numbers(key);
  if (v.size() != kNumGains) throw ConfigError(key + " needs 8 numbers");
  std::array<double, kNumGains> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

QuadState perturbed_start(const FlatReference& ref, const QuadParams& params,
                          const DatagenConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  QuadState s;
  for (int k = 0; k < 3; ++k) {
    s.position[k] = ref.position[k] + config.position_offset * unit(rng);
    s.velocity[k] = ref.velocity[k] + config.velocity_offset * unit(rng);
  }
  DesiredAttitude desired;
  try {
    desired = flat_to_attitude(ref, params);
  } catch (const DegenerateReference&) {
  }
  Eigen::Vector3d axis(normal(rng), normal(rng), normal(rng));
  axis = axis.norm() > 1e-12 ? Eigen::Vector3d(axis.normalized())
                             : Eigen::Vector3d::UnitZ();
  const double angle = 0.5 * (unit(rng) + 1.0) * config.attitude_offset_deg *
                       std::numbers::pi / 180.0;
  s.attitude = Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis) *
                                  Eigen::Quaterniond(desired.rotation));
  s.attitude.normalize();
  s.body_rates = desired.rate;
  Wrench ff;
  ff.thrust = params.mass *
              (ref.acceleration + params.gravity * Eigen::Vector3d::UnitZ()).norm();
  s.motor_speeds = allocate(ff, params);
  return s;
}

// The trajectory shared by group g. Retries failed constructions.
SampledTrajectory group_trajectory(const DatagenConfig& config, std::size_t g,
                                   int* family_index, std::size_t* failed) {
  std::mt19937_64 rng(derive_seed(config.seed, 2 * g));
  std::uniform_int_distribution<int> family(0, 3);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int f = family(rng);
    try {
      SampledTrajectory t =
          realize(sample_training_trajectory(kFamilies[f], rng, config.family));
      if (family_index) *family_index = f;
      return t;
    } catch (const std::exception&) {
      if (failed) ++*failed;
    }
  }
  throw std::runtime_error("trajectory construction keeps failing");
}

// Start time, start state and gains of record i.
WindowTask record_task(const SampledTrajectory& traj, const QuadParams& params,
                       const DatagenConfig& config, std::size_t i) {
  std::mt19937_64 r(derive_seed(config.seed, 2 * i + 1));
  std::uniform_int_distribution<long> when(0, traj.last_step());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long step = when(r);
  WindowTask t;
  t.initial = perturbed_start(traj.at(step), params, config, r);
  std::array<double, kNumGains> a{};
  for (int k = 0; k < kNumGains; ++k) {
    a[k] = config.bounds.lo[k] + (config.bounds.hi[k] - config.bounds.lo[k]) * unit(r);
  }
  t.gains = Gains::from_array(a);
  t.traj = &traj;
  t.start = step;
  return t;
}

}  // namespace

DatagenConfig DatagenConfig::load(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  DatagenConfig c;
  c.seed = static_cast<std::uint64_t>(kv.integer_or("seed", 1));
  c.count = static_cast<std::size_t>(
      kv.integer_or("count", static_cast<long long>(c.count)));
  c.group_size = static_cast<int>(kv.integer_or("group_size", c.group_size));
  c.family.keypoints =
      static_cast<int>(kv.integer_or("keypoints", c.family.keypoints));
  c.family.cube = kv.number_or("cube", c.family.cube);
  c.family.speed_min = kv.number_or("speed_min", c.family.speed_min);
  c.family.speed_max = kv.number_or("speed_max", c.family.speed_max);
  c.position_offset = kv.number_or("position_offset", c.position_offset);
  c.velocity_offset = kv.number_or("velocity_offset", c.velocity_offset);
  c.attitude_offset_deg =
      kv.number_or("attitude_offset_deg", c.attitude_offset_deg);
  c.bounds.lo = gain_array(kv, "gain_min", c.bounds.lo);
  c.bounds.hi = gain_array(kv, "gain_max", c.bounds.hi);
  c.threads = static_cast<int>(kv.integer_or("threads", c.threads));
  c.validate();
  return c;
}

std::string DatagenConfig::to_string() const {
  KeyValueFile kv;
  kv.set("seed", static_cast<double>(seed));
  kv.set("count", static_cast<double>(count));
  kv.set("group_size", static_cast<double>(group_size));
  kv.set("keypoints", static_cast<double>(family.keypoints));
  kv.set("cube", family.cube);
  kv.set("speed_min", family.speed_min);
  kv.set("speed_max", family.speed_max);
  kv.set("position_offset", position_offset);
  kv.set("velocity_offset", velocity_offset);
  kv.set("attitude_offset_deg", attitude_offset_deg);
  kv.set("gain_min", array_values(bounds.lo));
  kv.set("gain_max", array_values(bounds.hi));
  kv.set("threads", static_cast<double>(threads));
  return kv.to_string();
}

void DatagenConfig::validate() const {
  bounds.validate();
  if (count < 1) throw ConfigError("count must be >= 1");
  if (group_size < 1) throw ConfigError("group_size must be >= 1");
  if (family.keypoints < 2) throw ConfigError("need >= 2 keypoints");
  if (!(family.speed_min > 0.0) || !(family.speed_max >= family.speed_min)) {
    throw ConfigError("need 0 < speed_min <= speed_max");
  }
  if (position_offset < 0.0 || velocity_offset < 0.0 ||
      attitude_offset_deg < 0.0) {
    throw ConfigError("offsets must be nonnegative");
  }
}

Dataset generate_dataset(const QuadParams& params, const DatagenConfig& config,
                         DatagenStats* stats) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t count = config.count;
  const std::size_t group = static_cast<std::size_t>(config.group_size);
  const std::size_t groups = (count + group - 1) / group;
  const std::size_t chunks = (groups + kGroupsPerChunk - 1) / kGroupsPerChunk;

  Dataset data;
  data.input_dim = kFullInputDim;
  data.output_dim = kPerfDim;
  data.inputs.assign(count * kFullInputDim, 0.0f);
  data.outputs.assign(count * kPerfDim, 0.0f);
  std::atomic<std::size_t> resampled{0};
  std::atomic<std::size_t> families[4] = {0, 0, 0, 0};

  parallel_for(chunks, config.threads, [&](std::size_t chunk) {
    const std::size_t g_begin = chunk * kGroupsPerChunk;
    const std::size_t g_end = std::min(groups, g_begin + kGroupsPerChunk);
    std::vector<SampledTrajectory> trajs(g_end - g_begin);
    std::vector<WindowTask> tasks;
    std::vector<std::size_t> index;
    for (std::size_t g = g_begin; g < g_end; ++g) {
      int f = 0;
      std::size_t failed = 0;
      trajs[g - g_begin] = group_trajectory(config, g, &f, &failed);
      resampled += failed;
      const SampledTrajectory& traj = trajs[g - g_begin];
      const std::size_t first = g * group;
      const std::size_t last = std::min(count, first + group);
      families[f] += last - first;
      for (std::size_t i = first; i < last; ++i) {
        tasks.push_back(record_task(traj, params, config, i));
        index.push_back(i);
      }
    }
    const auto perf = evaluate_windows(tasks, params, kHorizon);
    std::vector<double> x(kFullInputDim);
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const WindowTask& t = tasks[j];
      encode(InputLayout::kFull, t.gains, t.initial, *t.traj, t.start,
             x.data());
      float* in = data.inputs.data() + index[j] * kFullInputDim;
      for (int k = 0; k < kFullInputDim; ++k) in[k] = static_cast<float>(x[k]);
      float* out = data.outputs.data() + index[j] * kPerfDim;
      for (int k = 0; k < kPerfDim; ++k) out[k] = static_cast<float>(perf[j][k]);
    }
  });

  if (resampled.load() * 100 > groups) {
    throw std::runtime_error(
        "trajectory resample rate above 1% (" +
        std::to_string(resampled.load()) + " of " + std::to_string(groups) +
        ")");
  }
  if (stats) {
    stats->resampled = resampled.load();
    for (int f = 0; f < 4; ++f) stats->family_counts[f] = families[f].load();
    stats->seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  }
  return data;
}

RecordContext regenerate_record(const QuadParams& params,
                                const DatagenConfig& config,
                                std::size_t index) {
  config.validate();
  const std::size_t group = static_cast<std::size_t>(config.group_size);
  RecordContext c;
  c.traj = group_trajectory(config, index / group, nullptr, nullptr);
  const WindowTask t = record_task(c.traj, params, config, index);
  c.step = t.start;
  c.state = t.initial;
  c.gains = t.gains;
  return c;
}

Dataset project_layout(const Dataset& full, InputLayout layout) {
  if (full.input_dim != kFullInputDim) {
    throw std::invalid_argument("projection needs a full-layout dataset");
  }
  if (layout == InputLayout::kFull) return full;
  Dataset out;
  out.input_dim = kNoTrajInputDim;
  out.output_dim = full.output_dim;
  out.outputs = full.outputs;
  out.inputs.resize(full.size() * kNoTrajInputDim);
  for (std::size_t i = 0; i < full.size(); ++i) {
    const float* src = full.input(i);
    float* dst = out.inputs.data() + i * kNoTrajInputDim;
    std::copy(src, src + kTrajOffset, dst);
    for (int k = 0; k < 3; ++k) dst[kTrajOffset + k] = -src[kTrajOffset + k];
  }
  return out;
}

}  // namespace trackopt
