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

#include "trackopt/families.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "trackopt/kvfile.h"
#include "trackopt/parallel.h"

namespace trackopt {
namespace {

std::vector<Eigen::Vector3d> random_points(std::mt19937_64& rng, int n,
                                           double cube) {
  std::uniform_real_distribution<double> u(0.0, cube);
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng), y = u(rng), z = u(rng);
    pts.emplace_back(x, y, z);
  }
  return pts;
}

Keypoints make_keypoints(std::vector<Eigen::Vector3d> points,
                         const std::vector<double>& durations) {
  Keypoints kp;
  kp.positions = std::move(points);
  kp.times.push_back(0.0);
  for (double d : durations) kp.times.push_back(kp.times.back() + d);
  return kp;
}

}  // namespace

std::vector<double> segment_times(const std::vector<Eigen::Vector3d>& points,
                                  const std::vector<double>& speeds,
                                  const FamilyConfig& config) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double d = (points[i + 1] - points[i]).norm() / speeds[i];
    out.push_back(
        std::clamp(d, config.min_segment_time, config.max_segment_time));
  }
  return out;
}

Eigen::VectorXd random_null_coordinates(const SplineTrajectory& base,
                                        double deviation,
                                        std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd dir(base.null_dimension());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
  if (dir.size() == 0) return dir;
  const SplineTrajectory probe = base.with_null_coordinates(dir);
  double largest = 0.0;
  const int n = 200;
  for (int k = 0; k <= n; ++k) {
    const double t = base.duration() * k / n;
    largest = std::max(
        largest, (probe.sample(t).position - base.sample(t).position).norm());
  }
  if (!(largest > 0.0)) return Eigen::VectorXd::Zero(dir.size());
  return dir * (deviation / largest);
}

TrajectorySpec sample_training_trajectory(TrajectoryType type,
                                          std::mt19937_64& rng,
                                          const FamilyConfig& config) {
  if (type == TrajectoryType::kLissajous) {
    throw std::invalid_argument("lissajous is not a training family");
  }
  std::uniform_real_distribution<double> speed(config.speed_min,
                                               config.speed_max);
  auto points = random_points(rng, config.keypoints, config.cube);
  std::vector<double> speeds(points.size() - 1, speed(rng));
  if (type == TrajectoryType::kMinsnapVarying) {
    for (double& s : speeds) s = speed(rng);
  }
  TrajectorySpec spec;
  spec.type = type;
  spec.keypoints = make_keypoints(points, segment_times(points, speeds, config));
  if (type == TrajectoryType::kRandomPoly) {
    std::uniform_real_distribution<double> dev(config.poly_deviation_min,
                                               config.poly_deviation_max);
    const double d = dev(rng);
    spec.phi = random_null_coordinates(SplineTrajectory::minsnap(spec.keypoints),
                                       d, rng);
  }
  return spec;
}

namespace {

constexpr std::array<std::pair<Suite, const char*>, 5> kSuiteNames = {{
    {Suite::kMinsnap, "minsnap"},
    {Suite::kMinsnapHard, "minsnap-hard"},
    {Suite::kMinsnapVarying, "minsnap-varying"},
    {Suite::kZigzag, "zigzag"},
    {Suite::kLissajous, "lissajous"},
}};

}  // namespace

const char* suite_name(Suite suite) {
  for (const auto& [s, n] : kSuiteNames) {
    if (s == suite) return n;
  }
  return "?";
}

Suite parse_suite(const std::string& name) {
  for (const auto& [s, n] : kSuiteNames) {
    if (name == n) return s;
  }
  throw ConfigError("unknown suite '" + name + "'");
}

TrajectorySpec suite_trajectory(Suite suite, std::uint64_t seed, int index,
                                const SuiteConfig& config) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> duration(config.duration_min,
                                                  config.duration_max);
  const double total = duration(rng);
  TrajectorySpec spec;
  if (suite == Suite::kLissajous) {
    std::uniform_real_distribution<double> amp(0.5, 1.5), freq(0.2, 0.6),
        phase(0.0, 2.0 * std::numbers::pi);
    auto& p = spec.lissajous;
    spec.type = TrajectoryType::kLissajous;
    p.center = Eigen::Vector3d::Constant(0.5 * config.family.cube);
    for (int k = 0; k < 3; ++k) {
      p.amplitudes[k] = amp(rng);
      p.frequencies[k] = freq(rng);
      p.phases[k] = phase(rng);
    }
    p.duration = total;
    return spec;
  }
  const bool hard = suite == Suite::kMinsnapHard;
  std::uniform_real_distribution<double> speed(hard ? 1.5 : 1.0,
                                               hard ? 3.5 : 2.5);
  auto points = random_points(rng, config.family.keypoints, config.family.cube);
  std::vector<double> speeds(points.size() - 1, speed(rng));
  if (suite == Suite::kMinsnapVarying) {
    for (double& s : speeds) s = speed(rng);
  }
  // Unscaled flight time, then scale about the first keypoint.
  double flight = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    flight += (points[i + 1] - points[i]).norm() / speeds[i];
  }
  const double scale = total / flight;
  for (auto& p : points) p = points.front() + scale * (p - points.front());
  spec.type = suite == Suite::kZigzag ? TrajectoryType::kZigzag
              : suite == Suite::kMinsnapVarying
                  ? TrajectoryType::kMinsnapVarying
                  : TrajectoryType::kMinsnap;
  spec.keypoints =
      make_keypoints(points, segment_times(points, speeds, config.family));
  return spec;
}

}  // namespace trackopt
