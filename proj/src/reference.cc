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

#include "trackopt/reference.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "trackopt/kvfile.h"

namespace trackopt {

SampledTrajectory::SampledTrajectory(std::vector<FlatReference> samples,
                                     double dt)
    : samples_(std::move(samples)), dt_(dt) {
  if (samples_.empty()) throw std::invalid_argument("empty trajectory");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  hold_.position = samples_.back().position;
  hold_.yaw = samples_.back().yaw;
}

const FlatReference& SampledTrajectory::at(long step) const {
  if (step < 0) return samples_.front();
  if (step >= static_cast<long>(samples_.size())) return hold_;
  return samples_[static_cast<std::size_t>(step)];
}

std::vector<Eigen::Vector3d> SampledTrajectory::coarse_positions(
    long step, int horizon, int stride) const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(horizon / stride + 1);
  for (int k = 0; k <= horizon; k += stride) {
    out.push_back(at(step + k).position);
  }
  return out;
}

namespace {

std::size_t sample_count(double duration, double dt) {
  return static_cast<std::size_t>(std::floor(duration / dt + 0.5)) + 1;
}

}  // namespace

SampledTrajectory sample_dense(const SplineTrajectory& spline, double dt) {
  const std::size_t n = sample_count(spline.duration(), dt);
  std::vector<FlatReference> samples(n);
  for (std::size_t k = 0; k < n; ++k) {
    samples[k] =
        spline.sample(std::min(static_cast<double>(k) * dt, spline.duration()));
  }
  return SampledTrajectory(std::move(samples), dt);
}

SampledTrajectory zigzag(const Keypoints& keypoints, double dt) {
  keypoints.validate();
  const auto& times = keypoints.times;
  const auto& pts = keypoints.positions;
  const std::size_t n = sample_count(times.back(), dt);
  std::vector<FlatReference> samples(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t seg = std::min<std::size_t>(
        static_cast<std::size_t>(std::max<long>(it - times.begin() - 1, 0)),
        keypoints.segments() - 1);
    const double span = times[seg + 1] - times[seg];
    const Eigen::Vector3d v = (pts[seg + 1] - pts[seg]) / span;
    samples[k].position = pts[seg] + v * (t - times[seg]);
    samples[k].velocity = v;
  }
  samples.back().position = pts.back();
  return SampledTrajectory(std::move(samples), dt);
}

FlatReference lissajous_at(const LissajousParams& p, double t) {
  FlatReference r;
  for (int k = 0; k < 3; ++k) {
    const double w = 2.0 * std::numbers::pi * p.frequencies[k];
    const double s = std::sin(w * t + p.phases[k]);
    const double c = std::cos(w * t + p.phases[k]);
    const double a = p.amplitudes[k];
    r.position[k] = p.center[k] + a * s;
    r.velocity[k] = a * w * c;
    r.acceleration[k] = -a * w * w * s;
    r.jerk[k] = -a * w * w * w * c;
  }
  return r;
}

SampledTrajectory lissajous(const LissajousParams& params, double dt) {
  if (!(params.duration > 0.0)) {
    throw std::invalid_argument("lissajous duration must be positive");
  }
  const std::size_t n = sample_count(params.duration, dt);
  std::vector<FlatReference> samples(n);
  for (std::size_t k = 0; k < n; ++k) {
    samples[k] = lissajous_at(params, static_cast<double>(k) * dt);
  }
  return SampledTrajectory(std::move(samples), dt);
}

namespace {

constexpr std::array<std::pair<TrajectoryType, const char*>, 5> kTypeNames = {{
    {TrajectoryType::kMinsnap, "minsnap"},
    {TrajectoryType::kMinsnapVarying, "minsnap-varying"},
    {TrajectoryType::kRandomPoly, "random-poly"},
    {TrajectoryType::kZigzag, "zigzag"},
    {TrajectoryType::kLissajous, "lissajous"},
}};

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::Vector3d vec3(const KeyValueFile& kv, const std::string& key) {
  const auto v = kv.numbers(key);
  if (v.size() != 3) throw ConfigError(key + " needs 3 numbers");
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

}  // namespace

const char* type_name(TrajectoryType type) {
  for (const auto& [t, name] : kTypeNames) {
    if (t == type) return name;
  }
  return "?";
}

TrajectoryType parse_type(const std::string& name) {
  for (const auto& [t, n] : kTypeNames) {
    if (name == n) return t;
  }
  throw ConfigError("unknown trajectory type '" + name + "'");
}

SplineTrajectory build_spline(const TrajectorySpec& spec) {
  if (!spec.is_spline()) {
    throw std::invalid_argument("trajectory type has no spline form");
  }
  const SplineTrajectory base = SplineTrajectory::minsnap(spec.keypoints);
  if (spec.phi.size() == 0) return base;
  return base.with_null_coordinates(spec.phi);
}

SampledTrajectory realize(const TrajectorySpec& spec, double dt) {
  switch (spec.type) {
    case TrajectoryType::kZigzag:
      return zigzag(spec.keypoints, dt);
    case TrajectoryType::kLissajous:
      return lissajous(spec.lissajous, dt);
    default:
      return sample_dense(build_spline(spec), dt);
  }
}

std::string format_trajectory(const TrajectorySpec& spec) {
  KeyValueFile kv;
  kv.set("type", std::string(type_name(spec.type)));
  if (spec.type == TrajectoryType::kLissajous) {
    const auto& p = spec.lissajous;
    kv.set("center", to_vector(p.center));
    kv.set("amplitudes", to_vector(p.amplitudes));
    kv.set("frequencies", to_vector(p.frequencies));
    kv.set("phases", to_vector(p.phases));
    kv.set("duration", p.duration);
    return kv.to_string();
  }
  kv.set("times", spec.keypoints.times);
  std::vector<double> flat;
  for (const auto& p : spec.keypoints.positions) {
    flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  }
  kv.set("positions", flat);
  if (spec.phi.size() > 0) kv.set("phi", to_vector(spec.phi));
  return kv.to_string();
}

TrajectorySpec parse_trajectory(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  TrajectorySpec spec;
  spec.type = parse_type(kv.raw("type"));
  if (spec.type == TrajectoryType::kLissajous) {
    auto& p = spec.lissajous;
    p.center = vec3(kv, "center");
    p.amplitudes = vec3(kv, "amplitudes");
    p.frequencies = vec3(kv, "frequencies");
    p.phases = vec3(kv, "phases");
    p.duration = kv.number("duration");
    return spec;
  }
  spec.keypoints.times = kv.numbers("times");
  const auto flat = kv.numbers("positions");
  if (flat.size() != 3 * spec.keypoints.times.size()) {
    throw ConfigError("positions must hold 3 numbers per keypoint time");
  }
  for (std::size_t i = 0; i < flat.size(); i += 3) {
    spec.keypoints.positions.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
  }
  try {
    spec.keypoints.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (kv.has("phi")) {
    if (spec.type == TrajectoryType::kZigzag) {
      throw ConfigError("zigzag trajectories take no phi");
    }
    const auto phi = kv.numbers("phi");
    spec.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size());
  }
  return spec;
}

TrajectorySpec load_trajectory(const std::string& path) {
  return parse_trajectory(KeyValueFile::load(path).to_string());
}

void save_trajectory(const TrajectorySpec& spec, const std::string& path) {
  KeyValueFile::parse(format_trajectory(spec)).save(path);
}

}  // namespace trackopt
