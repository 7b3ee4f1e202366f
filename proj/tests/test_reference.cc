#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "trackopt/families.h"
#include "trackopt/kvfile.h"
#include "trackopt/metrics.h"
#include "trackopt/parallel.h"

namespace trackopt {
namespace {

Keypoints square() {
  Keypoints kp;
  kp.positions = {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  kp.times = {0.0, 1.0, 2.0, 3.0};
  return kp;
}

TEST(Sampled, HoldsEndsAndMatchesSpline) {
  const SplineTrajectory s = SplineTrajectory::minsnap(square());
  const SampledTrajectory d = sample_dense(s);
  EXPECT_EQ(d.last_step(), 300);
  EXPECT_NEAR(d.duration(), 3.0, 1e-12);
  EXPECT_LT((d.at(123).position - s.sample(1.23).position).norm(), 1e-12);
  EXPECT_LT((d.at(-5).position - d.at(0).position).norm(), 0.0 + 1e-15);
  const FlatReference& past = d.at(10000);
  EXPECT_LT((past.position - Eigen::Vector3d(0, 1, 1)).norm(), 1e-9);
  EXPECT_EQ(past.velocity.norm(), 0.0);
  const auto c = d.coarse_positions(290);
  ASSERT_EQ(c.size(), static_cast<std::size_t>(kCoarseSamples));
  EXPECT_LT((c[1] - d.at(295).position).norm(), 1e-15);
  EXPECT_LT((c.back() - past.position).norm(), 1e-15);
}

TEST(Zigzag, StraightSegmentsWithOutgoingVelocity) {
  const SampledTrajectory z = zigzag(square());
  EXPECT_LT((z.at(50).position - Eigen::Vector3d(0.5, 0, 1)).norm(), 1e-12);
  EXPECT_LT((z.at(50).velocity - Eigen::Vector3d(1, 0, 0)).norm(), 1e-12);
  // The knot at t = 1 takes the second segment's velocity.
  EXPECT_LT((z.at(100).velocity - Eigen::Vector3d(0, 1, 0)).norm(), 1e-12);
  EXPECT_EQ(z.at(300).velocity.norm(), 0.0);
  EXPECT_EQ(z.at(150).acceleration.norm(), 0.0);
}

TEST(Lissajous, DerivativesAreAnalytic) {
  LissajousParams p;
  p.center = {2, 2, 2};
  p.amplitudes = {1.0, 0.5, 0.25};
  p.frequencies = {0.3, 0.5, 0.2};
  p.phases = {0.1, 1.0, 2.0};
  p.duration = 4.0;
  const double t = 1.3, w = 2 * std::numbers::pi * 0.3;
  const FlatReference r = lissajous_at(p, t);
  EXPECT_NEAR(r.position.x(), 2 + std::sin(w * t + 0.1), 1e-12);
  EXPECT_NEAR(r.velocity.x(), w * std::cos(w * t + 0.1), 1e-12);
  EXPECT_NEAR(r.acceleration.x(), -w * w * std::sin(w * t + 0.1), 1e-12);
  EXPECT_NEAR(r.jerk.x(), -w * w * w * std::cos(w * t + 0.1), 1e-12);
  EXPECT_EQ(lissajous(p).last_step(), 400);
}

TEST(TrajectoryFile, RoundTripsEveryType) {
  std::mt19937_64 rng(4);
  for (TrajectoryType type :
       {TrajectoryType::kMinsnap, TrajectoryType::kMinsnapVarying,
        TrajectoryType::kRandomPoly, TrajectoryType::kZigzag}) {
    const TrajectorySpec spec = sample_training_trajectory(type, rng);
    const TrajectorySpec back = parse_trajectory(format_trajectory(spec));
    EXPECT_EQ(back.type, spec.type);
    const SampledTrajectory a = realize(spec), b = realize(back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); k += 37) {
      EXPECT_LT((a.at(k).position - b.at(k).position).norm(), 1e-12);
    }
  }
  const TrajectorySpec l = suite_trajectory(Suite::kLissajous, 1, 0);
  const TrajectorySpec lb = parse_trajectory(format_trajectory(l));
  EXPECT_LT((realize(l).at(77).position - realize(lb).at(77).position).norm(),
            1e-12);
  EXPECT_THROW(parse_type("spiral"), ConfigError);
  EXPECT_THROW(parse_trajectory("type = minsnap\ntimes = 0 1\n"), ConfigError);
}

TEST(Suites, DeterministicAndWithinDuration) {
  for (Suite s : {Suite::kMinsnap, Suite::kMinsnapHard, Suite::kMinsnapVarying,
                  Suite::kZigzag, Suite::kLissajous}) {
    for (int i = 0; i < 5; ++i) {
      const TrajectorySpec a = suite_trajectory(s, 9, i);
      const TrajectorySpec b = suite_trajectory(s, 9, i);
      EXPECT_EQ(format_trajectory(a), format_trajectory(b));
      const double d = realize(a).duration();
      EXPECT_GT(d, 0.5);
      EXPECT_LE(d, 10.0 + 1e-9);
    }
  }
  EXPECT_THROW(parse_suite("bogus"), ConfigError);
}

// --- metrics ---------------------------------------------------------------

TEST(Metrics, HandBuiltLog) {
  StateLog log;
  for (int k = 0; k < 4; ++k) {
    LogEntry e;
    e.state.position = {0.1 * k, -0.2, 0.0};
    e.state.velocity = {0.0, 0.0, 0.5};
    e.state.body_rates = {0.0, 0.3, 0.4};
    e.command.thrust = -0.3;
    e.command.moment = {0.0, 3e-3, 4e-3};
    log.entries.push_back(e);
  }
  const PerfVector c = compute_perf(log, 4);
  EXPECT_NEAR(c[0], 0.15, 1e-12);
  EXPECT_NEAR(c[1], 0.2, 1e-12);
  EXPECT_NEAR(c[2], 0.0, 1e-12);
  EXPECT_NEAR(c[3], 0.5, 1e-12);
  EXPECT_NEAR(c[4], 0.5, 1e-12);
  EXPECT_NEAR(c[5], 0.3, 1e-12);
  EXPECT_NEAR(c[6], 5e-3, 1e-12);
  EXPECT_NEAR(c[7], std::hypot(0.3, 0.2), 1e-12);
  EXPECT_THROW(compute_perf(log, 5), std::invalid_argument);
  log.diverged = true;
  for (double v : compute_perf(log, 5)) EXPECT_EQ(v, kSentinel);
}

TEST(Metrics, ScalarizeAndWeights) {
  PerfVector c{};
  c[0] = 2.0;
  c[7] = 3.0;
  CostWeights w{};
  w.w[0] = 0.5;
  w.w[7] = 1.0;
  EXPECT_DOUBLE_EQ(scalarize(c, w), 4.0);
  CostWeights bad{};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.w[0] = -1.0;
  bad.w[1] = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_NO_THROW(default_weights().validate());
}

TEST(Metrics, BatchedWindowsMatchScalarRollouts) {
  const QuadParams p;
  std::mt19937_64 rng(8);
  const SampledTrajectory t =
      realize(sample_training_trajectory(TrajectoryType::kMinsnap, rng));
  std::uniform_real_distribution<double> u(0.3, 2.0);
  std::vector<WindowTask> tasks;
  for (int i = 0; i < 20; ++i) {
    WindowTask w;
    w.start = (i * 37) % t.last_step();
    w.initial = hover_state(p, t.at(w.start).position +
                                   Eigen::Vector3d(0.1, -0.1, 0.05));
    w.gains = nominal_gains();
    w.gains.kp *= u(rng);
    w.gains.kr *= u(rng);
    w.traj = &t;
    tasks.push_back(w);
  }
  // A lane that diverges must not disturb the others.
  tasks[3].gains.kr = 1e6;
  const auto batch = evaluate_windows(tasks, p);
  for (int i = 0; i < 20; ++i) {
    const PerfVector c = compute_perf(
        rollout(tasks[i].initial, tasks[i].gains, t, p, kHorizon, tasks[i].start));
    for (int k = 0; k < kPerfDim; ++k) {
      EXPECT_NEAR(batch[i][k], c[k], 1e-9 * (1 + std::abs(c[k]))) << i << " " << k;
    }
  }
}

TEST(Metrics, CsvHasSchemaVersion) {
  std::ostringstream out;
  write_metrics_header(out);
  write_metrics_row(out, "t0", nominal_gains(), PerfVector{}, 0.0);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("schema_version,", 0), 0u);
  EXPECT_NE(s.find("\n1,t0,"), std::string::npos);
}

// --- parallel --------------------------------------------------------------

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  static_assert(derive_seed(1, 2) != derive_seed(1, 3));
  static_assert(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST(Parallel, ThreadCountFromEnvironment) {
  ::setenv("TRACKOPT_THREADS", "3", 1);
  EXPECT_EQ(default_thread_count(), 3);
  ::unsetenv("TRACKOPT_THREADS");
  EXPECT_GE(default_thread_count(), 1);
}

}  // namespace
}  // namespace trackopt
