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

// Training data: random trajectories, random start states near them,
// random gains, and the simulated performance over the next H steps.

#ifndef TRACKOPT_DATAGEN_H_
#define TRACKOPT_DATAGEN_H_

#include <cstdint>
#include <string>

#include "trackopt/dataset.h"
#include "trackopt/families.h"
#include "trackopt/predictor.h"
#include "trackopt/quadrotor.h"
#include "trackopt/tuner.h"

namespace trackopt {

struct DatagenConfig {
  std::uint64_t seed = 1;
  std::size_t count = 200000;
  // Consecutive datapoints sharing one trajectory; each still draws its own
  // time, start offset and gains.
  int group_size = 16;
  FamilyConfig family;
  GainBounds bounds = default_gain_bounds();
  double position_offset = 0.25;  // m, uniform per axis
  double velocity_offset = 0.5;   // m/s, uniform per axis
  double attitude_offset_deg = 15.0;
  int threads = 1;

  static DatagenConfig load(const std::string& path);  // key = value
  std::string to_string() const;
  void validate() const;
};

struct DatagenStats {
  std::size_t resampled = 0;  // trajectories rebuilt after a failure
  std::size_t family_counts[4] = {0, 0, 0, 0};
  double seconds = 0.0;
};

// Records use the full input layout. Output is independent of the thread
// count. Throws std::runtime_error if more than 1% of trajectories fail.
Dataset generate_dataset(const QuadParams& params, const DatagenConfig& config,
                         DatagenStats* stats = nullptr);

// Context of record `index` of the dataset `config` describes, rebuilt
// without generating the rest. Lets held-out records be re-simulated with
// other gains.
struct RecordContext {
  SampledTrajectory traj;
  long step = 0;
  QuadState state;
  Gains gains;
};
RecordContext regenerate_record(const QuadParams& params,
                                const DatagenConfig& config, std::size_t index);

// Re-encodes full-layout records for another layout. The no-lookahead
// position error is the negated first reference offset.
Dataset project_layout(const Dataset& full, InputLayout layout);

}  // namespace trackopt

#endif  // TRACKOPT_DATAGEN_H_
