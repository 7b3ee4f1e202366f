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

#include "trackopt/batch.h"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace trackopt {

BatchState::BatchState(std::size_t size) : size_(size) {
  if (size == 0) throw std::invalid_argument("batch size must be >= 1");
  for (auto* group : {&position, &velocity, &body_rates}) {
    for (auto& v : *group) v.assign(size, 0.0);
  }
  for (auto& v : attitude) v.assign(size, 0.0);
  attitude[0].assign(size, 1.0);
  for (auto& v : motor_speeds) v.assign(size, 0.0);
}

QuadState BatchState::get(std::size_t i) const {
  QuadState s;
  for (int k = 0; k < 3; ++k) {
    s.position[k] = position[k][i];
    s.velocity[k] = velocity[k][i];
    s.body_rates[k] = body_rates[k][i];
  }
  s.attitude = Eigen::Quaterniond(attitude[0][i], attitude[1][i],
                                  attitude[2][i], attitude[3][i]);
  for (int r = 0; r < 4; ++r) s.motor_speeds[r] = motor_speeds[r][i];
  return s;
}

void BatchState::set(std::size_t i, const QuadState& s) {
  for (int k = 0; k < 3; ++k) {
    position[k][i] = s.position[k];
    velocity[k][i] = s.velocity[k];
    body_rates[k][i] = s.body_rates[k];
  }
  attitude[0][i] = s.attitude.w();
  attitude[1][i] = s.attitude.x();
  attitude[2][i] = s.attitude.y();
  attitude[3][i] = s.attitude.z();
  for (int r = 0; r < 4; ++r) motor_speeds[r][i] = s.motor_speeds[r];
}

BatchCommand make_batch_command(std::size_t size) {
  BatchCommand c;
  for (auto& v : c) v.assign(size, 0.0);
  return c;
}

namespace {

// Rigid-body state of one lane in registers: p, v, q (w,x,y,z), w.
struct Lane {
  double p[3], v[3], q[4], w[3];
};

struct LaneConstants {
  double inv_mass, drag, gravity;
  double inertia[3], inv_inertia[3];
};

// Same arithmetic order as the scalar derivative() so lanes agree with
// step() to rounding.
inline void lane_derivative(const Lane& s, double thrust, double mx,
                            double my, double mz, const LaneConstants& c,
                            Lane& d) {
  const double qw = s.q[0], qx = s.q[1], qy = s.q[2], qz = s.q[3];
  const double bz0 = 2.0 * (qx * qz + qw * qy);
  const double bz1 = 2.0 * (qy * qz - qw * qx);
  const double bz2 = 1.0 - 2.0 * (qx * qx + qy * qy);
  d.p[0] = s.v[0];
  d.p[1] = s.v[1];
  d.p[2] = s.v[2];
  d.v[0] = (thrust * bz0 - c.drag * s.v[0]) * c.inv_mass;
  d.v[1] = (thrust * bz1 - c.drag * s.v[1]) * c.inv_mass;
  d.v[2] = (thrust * bz2 - c.drag * s.v[2]) * c.inv_mass - c.gravity;
  const double wx = s.w[0], wy = s.w[1], wz = s.w[2];
  d.q[0] = -0.5 * (qx * wx + qy * wy + qz * wz);
  d.q[1] = 0.5 * (qw * wx + qy * wz - qz * wy);
  d.q[2] = 0.5 * (qw * wy + qz * wx - qx * wz);
  d.q[3] = 0.5 * (qw * wz + qx * wy - qy * wx);
  const double jx = c.inertia[0] * wx, jy = c.inertia[1] * wy,
               jz = c.inertia[2] * wz;
  d.w[0] = (mx - (wy * jz - wz * jy)) * c.inv_inertia[0];
  d.w[1] = (my - (wz * jx - wx * jz)) * c.inv_inertia[1];
  d.w[2] = (mz - (wx * jy - wy * jx)) * c.inv_inertia[2];
}

inline void lane_advance(const Lane& s, const Lane& d, double h, Lane& out) {
  for (int k = 0; k < 3; ++k) {
    out.p[k] = s.p[k] + h * d.p[k];
    out.v[k] = s.v[k] + h * d.v[k];
    out.w[k] = s.w[k] + h * d.w[k];
  }
  for (int k = 0; k < 4; ++k) out.q[k] = s.q[k] + h * d.q[k];
}

inline double clamp_value(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace

void step_batch(BatchState& states, const BatchCommand& commands,
                const QuadParams& params, double dt,
                std::vector<std::uint8_t>* diverged) {
  const std::size_t n = states.size();
  for (const auto& c : commands) {
    if (c.size() != n) {
      throw std::invalid_argument("command batch size does not match states");
    }
  }
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  std::vector<std::uint8_t> local_flags;
  std::vector<std::uint8_t>& flag_store = diverged ? *diverged : local_flags;
  flag_store.assign(n, 0);

  LaneConstants c;
  c.inv_mass = 1.0 / params.mass;
  c.drag = params.drag_coefficient;
  c.gravity = params.gravity;
  for (int k = 0; k < 3; ++k) {
    c.inertia[k] = params.inertia[k];
    c.inv_inertia[k] = 1.0 / params.inertia[k];
  }
  double mix[4][4];
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < 4; ++k) mix[r][k] = params.mixer()(r, k);
  }
  const double decay = std::exp(-dt / params.motor_time_constant);
  const double kf = params.thrust_coefficient;
  const double wmin = params.motor_speed_min, wmax = params.motor_speed_max;
  const double half = 0.5 * dt, sixth = dt / 6.0;

  double* px = states.position[0].data();
  double* py = states.position[1].data();
  double* pz = states.position[2].data();
  double* vx = states.velocity[0].data();
  double* vy = states.velocity[1].data();
  double* vz = states.velocity[2].data();
  double* qw = states.attitude[0].data();
  double* qx = states.attitude[1].data();
  double* qy = states.attitude[2].data();
  double* qz = states.attitude[3].data();
  double* wx = states.body_rates[0].data();
  double* wy = states.body_rates[1].data();
  double* wz = states.body_rates[2].data();
  double* m0 = states.motor_speeds[0].data();
  double* m1 = states.motor_speeds[1].data();
  double* m2 = states.motor_speeds[2].data();
  double* m3 = states.motor_speeds[3].data();
  const double* c0 = commands[0].data();
  const double* c1 = commands[1].data();
  const double* c2 = commands[2].data();
  const double* c3 = commands[3].data();
  // Non-finite lanes are saved here and restored after the kernel.
  std::vector<std::pair<std::size_t, QuadState>> frozen;
  for (std::size_t i = 0; i < n; ++i) {
    // (x - x) is NaN for any non-finite x.
    const double probe =
        (px[i] - px[i]) + (py[i] - py[i]) + (pz[i] - pz[i]) +
        (vx[i] - vx[i]) + (vy[i] - vy[i]) + (vz[i] - vz[i]) +
        (qw[i] - qw[i]) + (qx[i] - qx[i]) + (qy[i] - qy[i]) +
        (qz[i] - qz[i]) + (wx[i] - wx[i]) + (wy[i] - wy[i]) +
        (wz[i] - wz[i]) + (m0[i] - m0[i]) + (m1[i] - m1[i]) +
        (m2[i] - m2[i]) + (m3[i] - m3[i]) + (c0[i] - c0[i]) +
        (c1[i] - c1[i]) + (c2[i] - c2[i]) + (c3[i] - c3[i]);
    if (!(probe == 0.0)) {
      flag_store[i] = 1;
      frozen.emplace_back(i, states.get(i));
    }
  }

#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    double speed[4];
    const double cmd[4] = {c0[i], c1[i], c2[i], c3[i]};
    const double cur[4] = {m0[i], m1[i], m2[i], m3[i]};
    double thrust[4];
    for (int r = 0; r < 4; ++r) {
      const double target = clamp_value(cmd[r], wmin, wmax);
      const double w = target + (cur[r] - target) * decay;
      speed[r] = clamp_value(w, wmin, wmax);
      thrust[r] = kf * speed[r] * speed[r];
    }
    double wrench[4];
    for (int r = 0; r < 4; ++r) {
      wrench[r] = mix[r][0] * thrust[0] + mix[r][1] * thrust[1] +
                  mix[r][2] * thrust[2] + mix[r][3] * thrust[3];
    }
    const double f = wrench[0];
    const double mx = wrench[1], my = wrench[2], mz = wrench[3];

    Lane s0{{px[i], py[i], pz[i]},
            {vx[i], vy[i], vz[i]},
            {qw[i], qx[i], qy[i], qz[i]},
            {wx[i], wy[i], wz[i]}};
    Lane k1, k2, k3, k4, tmp;
    lane_derivative(s0, f, mx, my, mz, c, k1);
    lane_advance(s0, k1, half, tmp);
    lane_derivative(tmp, f, mx, my, mz, c, k2);
    lane_advance(s0, k2, half, tmp);
    lane_derivative(tmp, f, mx, my, mz, c, k3);
    lane_advance(s0, k3, dt, tmp);
    lane_derivative(tmp, f, mx, my, mz, c, k4);

    Lane out;
    for (int k = 0; k < 3; ++k) {
      out.p[k] = s0.p[k] + sixth * (k1.p[k] + 2.0 * k2.p[k] +
                                    2.0 * k3.p[k] + k4.p[k]);
      out.v[k] = s0.v[k] + sixth * (k1.v[k] + 2.0 * k2.v[k] +
                                    2.0 * k3.v[k] + k4.v[k]);
      out.w[k] = s0.w[k] + sixth * (k1.w[k] + 2.0 * k2.w[k] +
                                    2.0 * k3.w[k] + k4.w[k]);
    }
    for (int k = 0; k < 4; ++k) {
      out.q[k] = s0.q[k] + sixth * (k1.q[k] + 2.0 * k2.q[k] +
                                    2.0 * k3.q[k] + k4.q[k]);
    }
    const double inv_norm =
        1.0 / std::sqrt(out.q[0] * out.q[0] + out.q[1] * out.q[1] +
                        out.q[2] * out.q[2] + out.q[3] * out.q[3]);

    px[i] = out.p[0];
    py[i] = out.p[1];
    pz[i] = out.p[2];
    vx[i] = out.v[0];
    vy[i] = out.v[1];
    vz[i] = out.v[2];
    qw[i] = out.q[0] * inv_norm;
    qx[i] = out.q[1] * inv_norm;
    qy[i] = out.q[2] * inv_norm;
    qz[i] = out.q[3] * inv_norm;
    wx[i] = out.w[0];
    wy[i] = out.w[1];
    wz[i] = out.w[2];
    m0[i] = speed[0];
    m1[i] = speed[1];
    m2[i] = speed[2];
    m3[i] = speed[3];
  }

  for (const auto& [i, s] : frozen) states.set(i, s);
}

}  // namespace trackopt
