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

// Geometric SE(3) tracking controller and control allocation.

#ifndef TRACKOPT_CONTROLLER_H_
#define TRACKOPT_CONTROLLER_H_

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "trackopt/quadrotor.h"

namespace trackopt {

inline constexpr int kNumGains = 8;

// Flattened order: [kp_x, kp_y, kp_z, kv_x, kv_y, kv_z, kR, kOmega].
// Position and velocity gains are in N/m and N/(m/s); attitude gains act on
// the body moment directly.
struct Gains {
  Eigen::Vector3d kp = Eigen::Vector3d::Zero();
  Eigen::Vector3d kv = Eigen::Vector3d::Zero();
  double kr = 0.0;
  double komega = 0.0;

  std::array<double, kNumGains> to_array() const;
  static Gains from_array(std::span<const double> values);

  bool operator==(const Gains&) const = default;
};

// Hand-tuned gains for the default airframe (step-response tuned), used as
// the static baseline.
Gains nominal_gains();

struct FlatReference {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

struct Wrench {
  double thrust = 0.0;                            // N, along body z
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();  // N m, body frame
};

struct DesiredAttitude {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d rate = Eigen::Vector3d::Zero();      // body frame
  Eigen::Vector3d rate_dot = Eigen::Vector3d::Zero();  // body frame
};

class DegenerateReference : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Differential-flatness map from the reference to the desired rotation and
// its body rate / rate derivative, assuming zero snap and constant yaw.
// Throws DegenerateReference when m(a + g e3) nearly vanishes.
DesiredAttitude flat_to_attitude(const FlatReference& ref,
                                 const QuadParams& params);

// Collective thrust and body moment. World z is up; the desired force is
// -kp*e_p - kv*e_v + m g e3 + m a_d with e_p = p - p_d.
Wrench compute_wrench(const QuadState& state, const FlatReference& ref,
                      const Gains& gains, const QuadParams& params);

// allocation * [f, M], rotor thrusts clamped to [0, k_f w_max^2], then
// converted to motor speeds and clamped to the motor limits.
RotorCommand allocate(const Wrench& wrench, const QuadParams& params);

// Achieved wrench for given motor speeds (forward mixing).
Wrench mix(const RotorCommand& speeds, const QuadParams& params);

// Vectorized over quads; element i uses states[i], refs[i], gains[i].
std::vector<Wrench> compute_wrench_batch(std::span<const QuadState> states,
                                         std::span<const FlatReference> refs,
                                         std::span<const Gains> gains,
                                         const QuadParams& params);

}  // namespace trackopt

#endif  // TRACKOPT_CONTROLLER_H_
