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

#include "trackopt/controller.h"

#include <algorithm>
#include <cmath>

namespace trackopt {

std::array<double, kNumGains> Gains::to_array() const {
  return {kp.x(), kp.y(), kp.z(), kv.x(), kv.y(), kv.z(), kr, komega};
}

Gains Gains::from_array(std::span<const double> v) {
  if (v.size() != kNumGains) {
    throw std::invalid_argument("gain vector must have 8 entries");
  }
  Gains g;
  g.kp = Eigen::Vector3d(v[0], v[1], v[2]);
  g.kv = Eigen::Vector3d(v[3], v[4], v[5]);
  g.kr = v[6];
  g.komega = v[7];
  return g;
}

Gains nominal_gains() {
  Gains g;
  g.kp = Eigen::Vector3d(0.195, 0.195, 0.45);
  g.kv = Eigen::Vector3d(0.12, 0.12, 0.27);
  g.kr = 7.6e-3;
  g.komega = 6.5e-4;
  return g;
}

namespace {

// Second-order Taylor polynomial c0 + c1 t + c2 t^2 of a scalar signal.
struct Jet {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

Jet operator+(const Jet& a, const Jet& b) {
  return {a.c0 + b.c0, a.c1 + b.c1, a.c2 + b.c2};
}
Jet operator-(const Jet& a, const Jet& b) {
  return {a.c0 - b.c0, a.c1 - b.c1, a.c2 - b.c2};
}
Jet operator*(const Jet& a, const Jet& b) {
  return {a.c0 * b.c0, a.c0 * b.c1 + a.c1 * b.c0,
          a.c0 * b.c2 + a.c1 * b.c1 + a.c2 * b.c0};
}
Jet operator/(const Jet& a, const Jet& b) {
  Jet q;
  q.c0 = a.c0 / b.c0;
  q.c1 = (a.c1 - q.c0 * b.c1) / b.c0;
  q.c2 = (a.c2 - q.c0 * b.c2 - q.c1 * b.c1) / b.c0;
  return q;
}
Jet sqrt(const Jet& a) {
  Jet s;
  s.c0 = std::sqrt(a.c0);
  s.c1 = a.c1 / (2.0 * s.c0);
  s.c2 = (a.c2 - s.c1 * s.c1) / (2.0 * s.c0);
  return s;
}

using JetVec = std::array<Jet, 3>;

JetVec cross(const JetVec& a, const JetVec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
Jet dot(const JetVec& a, const JetVec& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
JetVec normalized(const JetVec& a) {
  const Jet n = sqrt(dot(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return Eigen::Vector3d(m(2, 1), m(0, 2), m(1, 0));
}

Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d frame_from_thrust_axis(const Eigen::Vector3d& b3,
                                       double yaw) {
  const Eigen::Vector3d heading(std::cos(yaw), std::sin(yaw), 0.0);
  Eigen::Vector3d b2 = b3.cross(heading);
  const double n = b2.norm();
  // Thrust axis along the heading: any perpendicular completes the frame.
  b2 = n > 1e-9 ? Eigen::Vector3d(b2 / n)
                : b3.cross(Eigen::Vector3d::UnitZ()).normalized();
  Eigen::Matrix3d r;
  r.col(0) = b2.cross(b3);
  r.col(1) = b2;
  r.col(2) = b3;
  return r;
}

constexpr double kDegenerateForce = 1e-9;

// Rates along the reference acceleration a(t) = a + j t. Returns false when
// the feedforward force vanishes.
bool reference_rates(const FlatReference& ref, const QuadParams& params,
                     DesiredAttitude& out) {
  const double m = params.mass;
  JetVec force;
  for (int k = 0; k < 3; ++k) {
    const double gravity = k == 2 ? params.gravity : 0.0;
    force[k] = {m * (ref.acceleration[k] + gravity), m * ref.jerk[k], 0.0};
  }
  if (std::sqrt(dot(force, force).c0) < kDegenerateForce) return false;

  const JetVec b3 = normalized(force);
  const JetVec heading = {Jet{std::cos(ref.yaw)}, Jet{std::sin(ref.yaw)},
                          Jet{}};
  JetVec b2 = cross(b3, heading);
  if (std::sqrt(dot(b2, b2).c0) < 1e-9) {
    b2 = cross(b3, JetVec{Jet{}, Jet{}, Jet{1.0}});
  }
  b2 = normalized(b2);
  const JetVec b1 = cross(b2, b3);

  Eigen::Matrix3d r, r_dot, r_ddot;
  const JetVec* cols[3] = {&b1, &b2, &b3};
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 3; ++k) {
      r(k, c) = (*cols[c])[k].c0;
      r_dot(k, c) = (*cols[c])[k].c1;
      r_ddot(k, c) = 2.0 * (*cols[c])[k].c2;
    }
  }
  out.rotation = r;
  const Eigen::Matrix3d w_hat = r.transpose() * r_dot;
  out.rate = 0.5 * vee(w_hat - w_hat.transpose());
  // d/dt (R^T R') = R'^T R' + R^T R''; the first term is symmetric.
  const Eigen::Matrix3d a_hat = r.transpose() * r_ddot;
  out.rate_dot = 0.5 * vee(a_hat - a_hat.transpose());
  return true;
}

}  // namespace

DesiredAttitude flat_to_attitude(const FlatReference& ref,
                                 const QuadParams& params) {
  DesiredAttitude out;
  if (!reference_rates(ref, params, out)) {
    throw DegenerateReference("reference acceleration cancels gravity");
  }
  return out;
}

Wrench compute_wrench(const QuadState& state, const FlatReference& ref,
                      const Gains& gains, const QuadParams& params) {
  const double m = params.mass;
  const Eigen::Matrix3d r = state.attitude.toRotationMatrix();
  const Eigen::Vector3d body_z = r.col(2);
  const Eigen::Vector3d& w = state.body_rates;

  const Eigen::Vector3d e_p = state.position - ref.position;
  const Eigen::Vector3d e_v = state.velocity - ref.velocity;
  Eigen::Vector3d force = -gains.kp.cwiseProduct(e_p) -
                          gains.kv.cwiseProduct(e_v) +
                          m * ref.acceleration;
  force.z() += m * params.gravity;

  const double force_norm = force.norm();
  const Eigen::Vector3d b3d =
      force_norm < kDegenerateForce ? body_z : Eigen::Vector3d(force / force_norm);
  const Eigen::Matrix3d r_d = frame_from_thrust_axis(b3d, ref.yaw);

  DesiredAttitude ff;
  if (!reference_rates(ref, params, ff)) {
    ff.rate.setZero();
    ff.rate_dot.setZero();
  }

  Wrench out;
  out.thrust = force.dot(body_z);
  const Eigen::Matrix3d rt_rd = r.transpose() * r_d;
  const Eigen::Vector3d e_r =
      0.5 * vee(r_d.transpose() * r - r.transpose() * r_d);
  const Eigen::Vector3d rate_d = rt_rd * ff.rate;
  const Eigen::Vector3d e_w = w - rate_d;
  const Eigen::Vector3d jw = params.inertia.cwiseProduct(w);
  out.moment = -gains.kr * e_r - gains.komega * e_w + w.cross(jw) -
               params.inertia.cwiseProduct(hat(w) * rate_d -
                                           rt_rd * ff.rate_dot);
  return out;
}

RotorCommand allocate(const Wrench& wrench, const QuadParams& params) {
  const Eigen::Vector4d thrusts =
      params.allocation() *
      Eigen::Vector4d(wrench.thrust, wrench.moment.x(), wrench.moment.y(),
                      wrench.moment.z());
  const double max_thrust = params.max_rotor_thrust();
  RotorCommand cmd;
  for (int i = 0; i < 4; ++i) {
    // NaN thrust maps to zero.
    const double t = std::clamp(std::isfinite(thrusts[i]) ? thrusts[i] : 0.0,
                                0.0, max_thrust);
    cmd[i] = std::clamp(std::sqrt(t / params.thrust_coefficient),
                        params.motor_speed_min, params.motor_speed_max);
  }
  return cmd;
}

Wrench mix(const RotorCommand& speeds, const QuadParams& params) {
  Eigen::Vector4d thrusts;
  for (int i = 0; i < 4; ++i) {
    thrusts[i] = params.thrust_coefficient * speeds[i] * speeds[i];
  }
  const Eigen::Vector4d w = params.mixer() * thrusts;
  return {w[0], w.tail<3>()};
}

std::vector<Wrench> compute_wrench_batch(std::span<const QuadState> states,
                                         std::span<const FlatReference> refs,
                                         std::span<const Gains> gains,
                                         const QuadParams& params) {
  if (refs.size() != states.size() || gains.size() != states.size()) {
    throw std::invalid_argument("batch size mismatch");
  }
  std::vector<Wrench> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i] = compute_wrench(states[i], refs[i], gains[i], params);
  }
  return out;
}

}  // namespace trackopt
