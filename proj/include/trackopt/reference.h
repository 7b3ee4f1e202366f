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

// Reference trajectories sampled at the simulator rate, and the text file
// that describes how to rebuild one.

#ifndef TRACKOPT_REFERENCE_H_
#define TRACKOPT_REFERENCE_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trackopt/controller.h"
#include "trackopt/spline.h"

namespace trackopt {

inline constexpr double kSimDt = 0.01;
inline constexpr int kHorizon = 100;       // H, simulator steps
inline constexpr int kCoarseStride = 5;    // Delta t / dt
inline constexpr int kCoarseSamples = kHorizon / kCoarseStride + 1;

// Dense references at t = k * dt for k = 0 .. size() - 1.
class SampledTrajectory {
 public:
  SampledTrajectory() = default;
  SampledTrajectory(std::vector<FlatReference> samples, double dt);

  double dt() const { return dt_; }
  std::size_t size() const { return samples_.size(); }
  double duration() const { return dt_ * static_cast<double>(size() - 1); }
  int last_step() const { return static_cast<int>(size()) - 1; }

  // Before the start the first sample is returned; past the end the final
  // position is held with zero derivatives.
  const FlatReference& at(long step) const;

  // Positions at step, step + stride, ..., step + horizon.
  std::vector<Eigen::Vector3d> coarse_positions(
      long step, int horizon = kHorizon, int stride = kCoarseStride) const;

  const std::vector<FlatReference>& samples() const { return samples_; }

 private:
  std::vector<FlatReference> samples_;
  FlatReference hold_;
  double dt_ = kSimDt;
};

SampledTrajectory sample_dense(const SplineTrajectory& spline,
                               double dt = kSimDt);

// Straight lines between keypoints. At a knot sample the outgoing
// segment's velocity is used; the final sample is at rest.
SampledTrajectory zigzag(const Keypoints& keypoints, double dt = kSimDt);

struct LissajousParams {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d amplitudes = Eigen::Vector3d::Zero();   // m
  Eigen::Vector3d frequencies = Eigen::Vector3d::Zero();  // Hz
  Eigen::Vector3d phases = Eigen::Vector3d::Zero();       // rad
  double duration = 0.0;                                  // s
};

// p(t) = center + A sin(2 pi f t + phase), per axis.
FlatReference lissajous_at(const LissajousParams& params, double t);
SampledTrajectory lissajous(const LissajousParams& params,
                            double dt = kSimDt);

enum class TrajectoryType { kMinsnap, kMinsnapVarying, kRandomPoly, kZigzag,
                            kLissajous };

const char* type_name(TrajectoryType type);
TrajectoryType parse_type(const std::string& name);  // throws ConfigError

// Everything needed to rebuild a reference. Spline types use keypoints and
// (optionally) phi; lissajous uses its own parameters.
struct TrajectorySpec {
  TrajectoryType type = TrajectoryType::kMinsnap;
  Keypoints keypoints;
  Eigen::VectorXd phi;  // empty means the min-snap solution
  LissajousParams lissajous;

  bool is_spline() const {
    return type != TrajectoryType::kZigzag &&
           type != TrajectoryType::kLissajous;
  }
};

// Throws std::invalid_argument for non-spline types.
SplineTrajectory build_spline(const TrajectorySpec& spec);
SampledTrajectory realize(const TrajectorySpec& spec, double dt = kSimDt);

std::string format_trajectory(const TrajectorySpec& spec);
TrajectorySpec parse_trajectory(const std::string& text);
TrajectorySpec load_trajectory(const std::string& path);
void save_trajectory(const TrajectorySpec& spec, const std::string& path);

}  // namespace trackopt

#endif  // TRACKOPT_REFERENCE_H_
