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

#include "trackopt/quadrotor.h"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "trackopt/kvfile.h"

namespace trackopt {

Eigen::Matrix4d QuadParams::default_allocation(double arm_length,
                                               double torque_to_thrust) {
  const double a = arm_length / std::sqrt(2.0);
  const double k = torque_to_thrust;
  Eigen::Matrix4d mix;
  mix << 1.0, 1.0, 1.0, 1.0,
         -a, a, a, -a,
         -a, -a, a, a,
         k, -k, k, -k;
  return mix.inverse();
}

QuadParams::QuadParams()
    : allocation_(default_allocation(arm_length,
                                     torque_coefficient / thrust_coefficient)),
      mixer_(allocation_.inverse()) {}

void QuadParams::set_allocation(const Eigen::Matrix4d& allocation) {
  Eigen::FullPivLU<Eigen::Matrix4d> lu(allocation);
  if (!allocation.allFinite() || !lu.isInvertible()) {
    throw ConfigError("allocation matrix is singular");
  }
  allocation_ = allocation;
  mixer_ = lu.inverse();
}

double QuadParams::hover_motor_speed() const {
  return std::sqrt(mass * gravity / (4.0 * thrust_coefficient));
}

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) {
    throw ConfigError("inertia entries must be positive");
  }
  if (!(thrust_coefficient > 0.0)) {
    throw ConfigError("thrust_coefficient must be positive");
  }
  if (!(motor_time_constant > 0.0)) {
    throw ConfigError("motor_time_constant must be positive");
  }
  if (!(motor_speed_min >= 0.0) || !(motor_speed_max > motor_speed_min)) {
    throw ConfigError("need motor_speed_max > motor_speed_min >= 0");
  }
  if (!(drag_coefficient >= 0.0)) {
    throw ConfigError("drag_coefficient must be nonnegative");
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(allocation_);
  if (!allocation_.allFinite() || !lu.isInvertible()) {
    throw ConfigError("allocation matrix is singular");
  }
}

QuadParams parse_params(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  if (kv.integer_or("version", kParamsVersion) != kParamsVersion) {
    throw ConfigError("unsupported params version " + kv.raw("version"));
  }
  QuadParams p;
  p.mass = kv.number_or("mass", p.mass);
  if (kv.has("inertia")) {
    const auto v = kv.numbers("inertia");
    if (v.size() != 3) throw ConfigError("inertia needs 3 diagonal entries");
    p.inertia = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  p.arm_length = kv.number_or("arm_length", p.arm_length);
  p.thrust_coefficient =
      kv.number_or("thrust_coefficient", p.thrust_coefficient);
  p.torque_coefficient =
      kv.number_or("torque_coefficient", p.torque_coefficient);
  p.motor_time_constant =
      kv.number_or("motor_time_constant", p.motor_time_constant);
  p.motor_speed_min = kv.number_or("motor_speed_min", p.motor_speed_min);
  p.motor_speed_max = kv.number_or("motor_speed_max", p.motor_speed_max);
  p.drag_coefficient = kv.number_or("drag_coefficient", p.drag_coefficient);
  p.gravity = kv.number_or("gravity", p.gravity);
  if (kv.has("allocation")) {
    const auto v = kv.numbers("allocation");
    if (v.size() != 16) throw ConfigError("allocation needs 16 entries");
    Eigen::Matrix4d a;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) a(r, c) = v[4 * r + c];
    }
    p.set_allocation(a);
  } else {
    if (!(p.thrust_coefficient > 0.0)) {
      throw ConfigError("thrust_coefficient must be positive");
    }
    p.set_allocation(QuadParams::default_allocation(
        p.arm_length, p.torque_coefficient / p.thrust_coefficient));
  }
  p.validate();
  return p;
}

QuadParams load_params(const std::string& path) {
  return parse_params(KeyValueFile::load(path).to_string());
}

std::string format_params(const QuadParams& p) {
  KeyValueFile kv;
  kv.set("version", static_cast<double>(kParamsVersion));
  kv.set("mass", p.mass);
  kv.set("inertia", std::vector<double>{p.inertia.x(), p.inertia.y(),
                                        p.inertia.z()});
  kv.set("arm_length", p.arm_length);
  kv.set("thrust_coefficient", p.thrust_coefficient);
  kv.set("torque_coefficient", p.torque_coefficient);
  kv.set("motor_time_constant", p.motor_time_constant);
  kv.set("motor_speed_min", p.motor_speed_min);
  kv.set("motor_speed_max", p.motor_speed_max);
  kv.set("drag_coefficient", p.drag_coefficient);
  kv.set("gravity", p.gravity);
  std::vector<double> alloc;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) alloc.push_back(p.allocation()(r, c));
  }
  kv.set("allocation", alloc);
  return kv.to_string();
}

bool QuadState::finite() const {
  return position.allFinite() && velocity.allFinite() &&
         attitude.coeffs().allFinite() && body_rates.allFinite() &&
         std::all_of(motor_speeds.begin(), motor_speeds.end(),
                     [](double w) { return std::isfinite(w); });
}

QuadState hover_state(const QuadParams& params,
                      const Eigen::Vector3d& position) {
  QuadState s;
  s.position = position;
  s.motor_speeds.fill(params.hover_motor_speed());
  return s;
}

namespace {

struct RigidBody {
  Eigen::Vector3d p, v;
  Eigen::Vector4d q;  // w, x, y, z
  Eigen::Vector3d w;
};

struct RigidBodyRate {
  Eigen::Vector3d dp, dv;
  Eigen::Vector4d dq;
  Eigen::Vector3d dw;
};

RigidBodyRate derivative(const RigidBody& s, double thrust,
                         const Eigen::Vector3d& moment, const QuadParams& p) {
  const double qw = s.q[0], qx = s.q[1], qy = s.q[2], qz = s.q[3];
  // Third column of the rotation matrix of q (not assumed unit inside a
  // stage, matching the usual RK4 treatment).
  const Eigen::Vector3d body_z(2.0 * (qx * qz + qw * qy),
                               2.0 * (qy * qz - qw * qx),
                               1.0 - 2.0 * (qx * qx + qy * qy));
  RigidBodyRate r;
  r.dp = s.v;
  r.dv = (thrust * body_z - p.drag_coefficient * s.v) / p.mass;
  r.dv.z() -= p.gravity;
  const Eigen::Vector3d& w = s.w;
  r.dq << -0.5 * (qx * w.x() + qy * w.y() + qz * w.z()),
           0.5 * (qw * w.x() + qy * w.z() - qz * w.y()),
           0.5 * (qw * w.y() + qz * w.x() - qx * w.z()),
           0.5 * (qw * w.z() + qx * w.y() - qy * w.x());
  const Eigen::Vector3d jw = p.inertia.cwiseProduct(w);
  r.dw = (moment - w.cross(jw)).cwiseQuotient(p.inertia);
  return r;
}

RigidBody advance(const RigidBody& s, const RigidBodyRate& r, double h) {
  return {s.p + h * r.dp, s.v + h * r.dv, s.q + h * r.dq, s.w + h * r.dw};
}

}  // namespace

QuadState step(const QuadState& state, const RotorCommand& command,
               const QuadParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!state.finite()) throw SimulationDiverged("non-finite state");
  for (double c : command) {
    if (!std::isfinite(c)) throw SimulationDiverged("non-finite command");
  }

  QuadState next = state;
  const double decay = std::exp(-dt / params.motor_time_constant);
  Eigen::Vector4d thrusts;
  for (int i = 0; i < 4; ++i) {
    const double target = std::clamp(command[i], params.motor_speed_min,
                                     params.motor_speed_max);
    const double w = target + (state.motor_speeds[i] - target) * decay;
    next.motor_speeds[i] =
        std::clamp(w, params.motor_speed_min, params.motor_speed_max);
    thrusts[i] = params.thrust_coefficient * next.motor_speeds[i] *
                 next.motor_speeds[i];
  }
  const Eigen::Vector4d wrench = params.mixer() * thrusts;
  const double thrust = wrench[0];
  const Eigen::Vector3d moment = wrench.tail<3>();

  RigidBody s0{state.position, state.velocity,
               Eigen::Vector4d(state.attitude.w(), state.attitude.x(),
                               state.attitude.y(), state.attitude.z()),
               state.body_rates};
  const RigidBodyRate k1 = derivative(s0, thrust, moment, params);
  const RigidBodyRate k2 =
      derivative(advance(s0, k1, 0.5 * dt), thrust, moment, params);
  const RigidBodyRate k3 =
      derivative(advance(s0, k2, 0.5 * dt), thrust, moment, params);
  const RigidBodyRate k4 =
      derivative(advance(s0, k3, dt), thrust, moment, params);
  const double w6 = dt / 6.0;
  next.position = s0.p + w6 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  next.velocity = s0.v + w6 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  Eigen::Vector4d q = s0.q + w6 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  q /= q.norm();
  next.attitude = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  next.body_rates = s0.w + w6 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
  return next;
}

}  // namespace trackopt
