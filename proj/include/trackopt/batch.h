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

#ifndef TRACKOPT_BATCH_H_
#define TRACKOPT_BATCH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "trackopt/quadrotor.h"

namespace trackopt {

// Structure-of-arrays storage for B quadrotors. Every field array has
// length size().
class BatchState {
 public:
  explicit BatchState(std::size_t size = 1);

  std::size_t size() const { return size_; }

  QuadState get(std::size_t i) const;
  void set(std::size_t i, const QuadState& state);

  std::array<std::vector<double>, 3> position;
  std::array<std::vector<double>, 3> velocity;
  std::array<std::vector<double>, 4> attitude;  // w, x, y, z
  std::array<std::vector<double>, 3> body_rates;
  std::array<std::vector<double>, 4> motor_speeds;

 private:
  std::size_t size_;
};

// commands[r][i]: desired speed of rotor r on quad i.
using BatchCommand = std::array<std::vector<double>, 4>;

BatchCommand make_batch_command(std::size_t size);

// Data-parallel equivalent of step() for each quad. Lanes whose input is
// non-finite are left untouched and flagged in `diverged` (one byte per
// lane, optional). Throws std::invalid_argument on a size mismatch.
void step_batch(BatchState& states, const BatchCommand& commands,
                const QuadParams& params, double dt,
                std::vector<std::uint8_t>* diverged = nullptr);

}  // namespace trackopt

#endif  // TRACKOPT_BATCH_H_
