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

// Quadrotor parameters, state, and the scalar rigid-body step.

#ifndef TRACKOPT_QUADROTOR_H_
#define TRACKOPT_QUADROTOR_H_

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace trackopt {

// Raised when a state or command is non-finite.
class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadParams {
  double mass = 0.03;                                 // kg
  Eigen::Vector3d inertia{1.4e-5, 1.4e-5, 2.2e-5};    // diagonal, kg m^2
  double arm_length = 0.046;                          // m
  double thrust_coefficient = 2.3e-8;                 // N / (rad/s)^2
  double torque_coefficient = 7.8e-10;                // N m / (rad/s)^2
  double motor_time_constant = 0.02;                  // s
  double motor_speed_min = 0.0;                       // rad/s
  double motor_speed_max = 2500.0;                    // rad/s
  double drag_coefficient = 0.015;                    // N / (m/s), linear
  double gravity = 9.81;                              // m/s^2

  QuadParams();

  // Maps [f, Mx, My, Mz] to the four rotor thrusts.
  const Eigen::Matrix4d& allocation() const { return allocation_; }
  // Inverse of allocation(): rotor thrusts to [f, M].
  const Eigen::Matrix4d& mixer() const { return mixer_; }
  // Throws ConfigError if singular.
  void set_allocation(const Eigen::Matrix4d& allocation);

  double max_rotor_thrust() const {
    return thrust_coefficient * motor_speed_max * motor_speed_max;
  }
  double hover_motor_speed() const;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  // X layout: rotors at (+a,-a), (+a,+a), (-a,+a), (-a,-a), a = arm/sqrt(2),
  // alternating spin direction starting with +1.
  static Eigen::Matrix4d default_allocation(double arm_length,
                                            double torque_to_thrust);

 private:
  Eigen::Matrix4d allocation_;
  Eigen::Matrix4d mixer_;
};

// Params files carry `version = 1`; other versions are rejected.
inline constexpr int kParamsVersion = 1;

// Reads `key = value` text. Missing keys keep their defaults; when no
// allocation key is given it is rebuilt from arm_length and the coefficients.
QuadParams load_params(const std::string& path);
QuadParams parse_params(const std::string& text);
std::string format_params(const QuadParams& params);

using RotorCommand = std::array<double, 4>;  // desired motor speeds, rad/s

struct QuadState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body->world
  Eigen::Vector3d body_rates = Eigen::Vector3d::Zero();
  std::array<double, 4> motor_speeds{};

  bool finite() const;
};

// Level, at rest, motors spinning at hover speed.
QuadState hover_state(const QuadParams& params,
                      const Eigen::Vector3d& position = Eigen::Vector3d::Zero());

// Advances one step: first-order motor lag (exact decay, then clamped),
// rotor thrusts k_f w^2, RK4 on the rigid body with the resulting wrench
// held over the step, linear drag, quaternion renormalization.
QuadState step(const QuadState& state, const RotorCommand& command,
               const QuadParams& params, double dt);

}  // namespace trackopt

#endif  // TRACKOPT_QUADROTOR_H_
