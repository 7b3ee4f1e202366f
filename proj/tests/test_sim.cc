// Rigid-body step, batch kernel and params file.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "trackopt/batch.h"
#include "trackopt/kvfile.h"
#include "trackopt/quadrotor.h"

namespace trackopt {
namespace {

// Independent reference: explicit midpoint on (p, v, R, w) with the
// rotation advanced by the exponential map, many substeps.
struct Ref {
  Eigen::Vector3d p, v, w;
  Eigen::Matrix3d r;
};

Eigen::Matrix3d expm_so3(const Eigen::Vector3d& phi) {
  return Eigen::AngleAxisd(phi.norm(), phi.norm() > 0 ? phi.normalized()
                                                      : Eigen::Vector3d::UnitX())
      .toRotationMatrix();
}

Ref integrate_reference(Ref s, double f, const Eigen::Vector3d& m,
                        const QuadParams& q, double t, int n) {
  const double h = t / n;
  const Eigen::Matrix3d j = q.inertia.asDiagonal();
  auto acc = [&](const Eigen::Matrix3d& r, const Eigen::Vector3d& v) {
    return Eigen::Vector3d(f * r.col(2) / q.mass - q.drag_coefficient * v / q.mass -
                           q.gravity * Eigen::Vector3d::UnitZ());
  };
  auto wdot = [&](const Eigen::Vector3d& w) {
    return Eigen::Vector3d(j.inverse() * (m - w.cross(j * w)));
  };
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d wm = s.w + 0.5 * h * wdot(s.w);
    const Eigen::Matrix3d rm = s.r * expm_so3(0.5 * h * s.w);
    const Eigen::Vector3d vm = s.v + 0.5 * h * acc(s.r, s.v);
    s.p += h * vm;
    s.v += h * acc(rm, vm);
    s.r = s.r * expm_so3(h * wm);
    s.w += h * wdot(wm);
  }
  return s;
}

TEST(Quadrotor, HoverIsEquilibrium) {
  const QuadParams p;
  QuadState s = hover_state(p, {1, 2, 3});
  RotorCommand c;
  c.fill(p.hover_motor_speed());
  for (int i = 0; i < 500; ++i) s = step(s, c, p, 0.01);
  EXPECT_LT((s.position - Eigen::Vector3d(1, 2, 3)).norm(), 1e-9);
  EXPECT_LT(s.velocity.norm(), 1e-9);
  EXPECT_LT(s.body_rates.norm(), 1e-9);
}

TEST(Quadrotor, FreeFallWithDragMatchesClosedForm) {
  QuadParams p;
  QuadState s;
  s.velocity = {1.0, -0.5, 2.0};
  const RotorCommand off{0, 0, 0, 0};
  const double t = 1.0;
  for (int i = 0; i < 100; ++i) s = step(s, off, p, 0.01);
  // dv/dt = -g e3 - (c/m) v, solved per axis.
  const double k = p.drag_coefficient / p.mass;
  const Eigen::Vector3d v0(1.0, -0.5, 2.0);
  const Eigen::Vector3d vinf(0, 0, -p.gravity / k);
  const Eigen::Vector3d v = vinf + (v0 - vinf) * std::exp(-k * t);
  const Eigen::Vector3d x = vinf * t + (v0 - vinf) * (1 - std::exp(-k * t)) / k;
  EXPECT_LT((s.velocity - v).norm(), 1e-8);
  EXPECT_LT((s.position - x).norm(), 1e-8);
}

TEST(Quadrotor, MatchesIndependentIntegrator) {
  QuadParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    QuadState s;
    s.velocity = {u(rng), u(rng), u(rng)};
    s.attitude = Eigen::Quaterniond(Eigen::AngleAxisd(
        0.3 * u(rng), Eigen::Vector3d(u(rng), u(rng), 1).normalized()));
    s.body_rates = {2 * u(rng), 2 * u(rng), u(rng)};
    // Constant motor speeds, so the wrench is held over the whole run.
    const double h = p.hover_motor_speed();
    for (int r = 0; r < 4; ++r) s.motor_speeds[r] = h * (1 + 0.01 * u(rng));
    RotorCommand c = s.motor_speeds;
    const Eigen::Vector4d th(
        p.thrust_coefficient * c[0] * c[0], p.thrust_coefficient * c[1] * c[1],
        p.thrust_coefficient * c[2] * c[2], p.thrust_coefficient * c[3] * c[3]);
    const Eigen::Vector4d wr = p.mixer() * th;

    Ref ref{s.position, s.velocity, s.body_rates,
            s.attitude.toRotationMatrix()};
    ref = integrate_reference(ref, wr[0], wr.tail<3>(), p, 0.5, 200000);
    QuadState x = s;
    for (int i = 0; i < 50; ++i) x = step(x, c, p, 0.01);
    EXPECT_LT((x.position - ref.p).norm(), 1e-6);
    EXPECT_LT((x.velocity - ref.v).norm(), 1e-6);
    EXPECT_LT((x.body_rates - ref.w).norm(), 1e-5);
    EXPECT_LT((x.attitude.toRotationMatrix() - ref.r).norm(), 1e-6);
    EXPECT_NEAR(x.attitude.norm(), 1.0, 1e-12);
  }
}

TEST(Quadrotor, MotorLagIsExactFirstOrder) {
  const QuadParams p;
  QuadState s = hover_state(p);
  const double w0 = s.motor_speeds[0];
  RotorCommand c;
  c.fill(w0 + 200.0);
  s = step(s, c, p, 0.01);
  const double expected =
      w0 + 200.0 + (w0 - (w0 + 200.0)) * std::exp(-0.01 / p.motor_time_constant);
  EXPECT_NEAR(s.motor_speeds[0], expected, 1e-9);
  c.fill(1e6);
  for (int i = 0; i < 100; ++i) s = step(s, c, p, 0.01);
  EXPECT_LE(s.motor_speeds[0], p.motor_speed_max);
}

TEST(Quadrotor, NonFiniteInputThrows) {
  const QuadParams p;
  QuadState s = hover_state(p);
  RotorCommand c{NAN, 0, 0, 0};
  EXPECT_THROW(step(s, c, p, 0.01), SimulationDiverged);
  s.velocity.x() = INFINITY;
  c.fill(0);
  EXPECT_THROW(step(s, c, p, 0.01), SimulationDiverged);
}

TEST(Batch, MatchesScalarStep) {
  const QuadParams p;
  const std::size_t n = 37;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  BatchState b(n);
  std::vector<QuadState> ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    QuadState s = hover_state(p, {u(rng), u(rng), u(rng)});
    s.velocity = {u(rng), u(rng), u(rng)};
    s.attitude = Eigen::Quaterniond(
        Eigen::AngleAxisd(0.2 * u(rng), Eigen::Vector3d(u(rng), 1, 0).normalized()));
    ref[i] = s;
    b.set(i, s);
  }
  BatchCommand cmd = make_batch_command(n);
  for (int k = 0; k < 300; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      RotorCommand c;
      for (int r = 0; r < 4; ++r) {
        c[r] = p.hover_motor_speed() * (1 + 0.02 * std::sin(0.1 * k + i + r));
        cmd[r][i] = c[r];
      }
      ref[i] = step(ref[i], c, p, 0.01);
    }
    step_batch(b, cmd, p, 0.01);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const QuadState s = b.get(i);
    EXPECT_LT((s.position - ref[i].position).norm(), 1e-12);
    EXPECT_LT((s.velocity - ref[i].velocity).norm(), 1e-12);
    EXPECT_LT((s.body_rates - ref[i].body_rates).norm(), 1e-12);
    EXPECT_LT(std::abs(s.attitude.dot(ref[i].attitude)) - 1.0, 1e-12);
  }
}

TEST(Batch, FlagsDivergedLanesOnly) {
  const QuadParams p;
  BatchState b(3);
  for (int i = 0; i < 3; ++i) b.set(i, hover_state(p));
  BatchCommand cmd = make_batch_command(3);
  for (int r = 0; r < 4; ++r) {
    for (int i = 0; i < 3; ++i) cmd[r][i] = p.hover_motor_speed();
  }
  cmd[2][1] = NAN;
  std::vector<std::uint8_t> bad;
  step_batch(b, cmd, p, 0.01, &bad);
  ASSERT_EQ(bad.size(), 3u);
  EXPECT_EQ(bad[0], 0);
  EXPECT_EQ(bad[1], 1);
  EXPECT_EQ(bad[2], 0);
  EXPECT_TRUE(b.get(1).finite());
  EXPECT_THROW(step_batch(b, make_batch_command(2), p, 0.01),
               std::invalid_argument);
}

TEST(Params, RoundTripAndValidation) {
  QuadParams p;
  p.mass = 0.032;
  p.drag_coefficient = 0.0;
  const QuadParams q = parse_params(format_params(p));
  EXPECT_DOUBLE_EQ(q.mass, 0.032);
  EXPECT_DOUBLE_EQ(q.drag_coefficient, 0.0);
  EXPECT_LT((q.allocation() - p.allocation()).norm(), 1e-15);
  EXPECT_THROW(parse_params("mass = -1\n"), ConfigError);
  EXPECT_THROW(parse_params("mass = abc\n"), ConfigError);
  EXPECT_THROW(parse_params("version = 2\n"), ConfigError);
  const QuadParams shipped = load_params(TRACKOPT_SOURCE_DIR "/config/crazyflie.params");
  const QuadParams defaults;
  EXPECT_EQ(shipped.mass, defaults.mass);
  EXPECT_EQ(shipped.drag_coefficient, defaults.drag_coefficient);
  EXPECT_EQ(shipped.motor_speed_max, defaults.motor_speed_max);
  EXPECT_LT((shipped.mixer() - defaults.mixer()).norm(), 1e-12);
  Eigen::Matrix4d singular = Eigen::Matrix4d::Zero();
  EXPECT_THROW(p.set_allocation(singular), ConfigError);
}

TEST(Params, MixerInvertsAllocation) {
  const QuadParams p;
  EXPECT_LT((p.mixer() * p.allocation() - Eigen::Matrix4d::Identity()).norm(),
            1e-12);
}

}  // namespace
}  // namespace trackopt
