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

// Random trajectory families for training data and evaluation suites.

#ifndef TRACKOPT_FAMILIES_H_
#define TRACKOPT_FAMILIES_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trackopt/reference.h"

namespace trackopt {

// Training distribution: keypoints uniform in a cube, one average speed
// per trajectory (or one per segment for the varying family).
struct FamilyConfig {
  int keypoints = 5;
  double cube = 4.0;  // m, keypoints in [0, cube]^3
  double speed_min = 0.5;
  double speed_max = 3.0;
  double max_segment_time = 5.0;  // s
  double min_segment_time = 0.2;  // s
  // Random-poly deviation: phi is rescaled so that the largest position
  // offset from the min-snap path is uniform in this range (m).
  double poly_deviation_min = 0.1;
  double poly_deviation_max = 0.5;
};

// Segment durations |p_{i+1} - p_i| / v_i, clamped to the config limits.
std::vector<double> segment_times(const std::vector<Eigen::Vector3d>& points,
                                  const std::vector<double>& speeds,
                                  const FamilyConfig& config);

// One of the four training families (not lissajous).
TrajectorySpec sample_training_trajectory(TrajectoryType type,
                                          std::mt19937_64& rng,
                                          const FamilyConfig& config = {});

// Null coordinates along a random direction scaled so the largest position
// offset from `base` over its duration equals `deviation`.
Eigen::VectorXd random_null_coordinates(const SplineTrajectory& base,
                                        double deviation,
                                        std::mt19937_64& rng);

enum class Suite { kMinsnap, kMinsnapHard, kMinsnapVarying, kZigzag,
                   kLissajous };

const char* suite_name(Suite suite);
Suite parse_suite(const std::string& name);  // throws ConfigError

struct SuiteConfig {
  double duration_min = 6.0;  // s
  double duration_max = 10.0;
  FamilyConfig family;
};

// Trajectory `index` of a suite; a pure function of (suite, seed, index).
// Keypoints are drawn in the cube, then scaled about the first keypoint so
// that flying the path at the sampled speed takes the sampled duration.
TrajectorySpec suite_trajectory(Suite suite, std::uint64_t seed, int index,
                                const SuiteConfig& config = {});

}  // namespace trackopt

#endif  // TRACKOPT_FAMILIES_H_
