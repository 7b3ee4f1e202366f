#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "trackopt/adapter.h"
#include "trackopt/families.h"
#include "trackopt/kvfile.h"

namespace trackopt {
namespace {

BasicPredictor<double> random_model(std::uint64_t seed) {
  BasicPredictor<double> p(InputLayout::kFull, {32, 32});
  std::mt19937_64 rng(seed);
  p.net().init_he(rng);
  std::normal_distribution<double> g(0.0, 0.2);
  for (int l = 0; l < p.net().layers(); ++l) {
    for (double& b : p.net().biases(l)) b = g(rng);
  }
  p.input_norm().mean.assign(kFullInputDim, 0.0);
  p.input_norm().stddev.assign(kFullInputDim, 0.5);
  p.output_norm().mean.assign(kPerfDim, -1.0);
  p.output_norm().stddev.assign(kPerfDim, 0.3);
  return p;
}

SplineTrajectory test_spline(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build_spline(sample_training_trajectory(TrajectoryType::kMinsnap, rng));
}

TEST(Adapter, ObjectiveGradientMatchesFiniteDifferences) {
  const auto model = random_model(1);
  const SplineTrajectory s = test_spline(2);
  QuadState st = hover_state(QuadParams{}, s.sample(0.5).position);
  st.position += Eigen::Vector3d(0.1, -0.05, 0.02);
  const CostWeights w = default_weights();
  Eigen::VectorXd grad;
  window_objective(model, s, st, nominal_gains(), 50, w, &grad);
  ASSERT_EQ(grad.size(), s.null_dimension());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  // Directional derivatives along random null-space directions.
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd dir(s.null_dimension());
    for (auto& v : dir) v = g(rng);
    dir.normalize();
    const double h = 1e-6;
    const double jp = window_objective(
        model, s.with_null_coordinates(s.null_coordinates() + h * dir), st,
        nominal_gains(), 50, w, nullptr);
    const double jm = window_objective(
        model, s.with_null_coordinates(s.null_coordinates() - h * dir), st,
        nominal_gains(), 50, w, nullptr);
    const double fd = (jp - jm) / (2 * h);
    const double an = grad.dot(dir);
    EXPECT_LT(std::abs(fd - an), 1e-4 * std::max(1e-6, std::abs(fd))) << trial;
  }
}

TEST(Adapter, KeepsConstraintsAndZeroStepIsNoOp) {
  const auto model = random_model(4);
  const SplineTrajectory s = test_spline(5);
  const QuadState st = hover_state(QuadParams{}, s.sample(1.0).position);
  AdaptConfig cfg;
  cfg.steps = 0;
  AdaptResult r = adapt_window(model, s, st, nominal_gains(), 100,
                               default_weights(), cfg);
  EXPECT_EQ(r.trajectory.null_coordinates(), s.null_coordinates());
  cfg.steps = 50;
  cfg.learning_rate = 0.0;
  r = adapt_window(model, s, st, nominal_gains(), 100, default_weights(), cfg);
  EXPECT_EQ(r.trajectory.null_coordinates(), s.null_coordinates());
  cfg.learning_rate = 1.0;
  r = adapt_window(model, s, st, nominal_gains(), 100, default_weights(), cfg);
  EXPECT_GT(r.trajectory.null_coordinates().norm(), 0.0);
  const double b = s.constraints().rhs.cwiseAbs().maxCoeff();
  EXPECT_LE(r.trajectory.constraint_residual(), 1e-8 * (1 + b));
  for (std::size_t i = 0; i < s.keypoints().size(); ++i) {
    EXPECT_LT((r.trajectory.sample(s.keypoints().times[i]).position -
               s.keypoints().positions[i]).norm(),
              1e-8);
  }
}

TEST(Adapter, PredictedCostUsuallyDecreases) {
  const auto model = random_model(6);
  int improved = 0;
  for (int i = 0; i < 100; ++i) {
    const SplineTrajectory s = test_spline(100 + i);
    const long step = (37 * i) % static_cast<long>(s.duration() / kSimDt);
    QuadState st = hover_state(QuadParams{}, s.sample(step * kSimDt).position);
    const AdaptResult r =
        adapt_window(model, s, st, nominal_gains(), step, default_weights());
    if (r.cost_after <= r.cost_before) ++improved;
  }
  EXPECT_GE(improved, 90);
}

TEST(Adapter, RejectsModelWithoutLookahead) {
  BasicPredictor<double> nt(InputLayout::kNoTraj, {8});
  const SplineTrajectory s = test_spline(7);
  EXPECT_THROW(adapt_window(nt, s, hover_state(QuadParams{}), nominal_gains(),
                            0, default_weights()),
               std::invalid_argument);
}

TEST(Adapter, DisabledMatchesNominalRun) {
  const auto model = random_model(8);
  const SplineTrajectory s = test_spline(9);
  AdaptRunConfig cfg;
  cfg.mode = AdaptMode::kNone;
  const AdaptRunResult a =
      receding_horizon_adapt(model, s, QuadParams{}, default_weights(), cfg);
  const RunResult b = run_receding(sample_dense(s), QuadParams{},
                                   fixed_gains_policy(nominal_gains()), {});
  ASSERT_EQ(a.run.log.size(), b.log.size());
  for (std::size_t k = 0; k < b.log.size(); ++k) {
    ASSERT_EQ(a.run.log[k].state.position, b.log[k].state.position);
  }
  EXPECT_TRUE(a.windows.empty());
  EXPECT_EQ(a.keypoint_errors.size(), s.keypoints().size() - 2);
  const auto direct = keypoint_errors(s, b.log);
  EXPECT_EQ(direct, a.keypoint_errors);
}

TEST(Adapter, RecedingRunKeepsKeypoints) {
  const auto model = random_model(10);
  const SplineTrajectory s = test_spline(11);
  AdaptRunConfig cfg;
  cfg.mode = AdaptMode::kTrajOnly;
  cfg.adapt.steps = 5;
  const AdaptRunResult r =
      receding_horizon_adapt(model, s, QuadParams{}, default_weights(), cfg);
  ASSERT_FALSE(r.run.crashed);
  EXPECT_EQ(r.windows.size(),
            static_cast<std::size_t>((sample_dense(s).last_step() + 99) / 100));
  EXPECT_EQ(r.keypoint_errors.size(), s.keypoints().size() - 2);
  cfg.mode = AdaptMode::kTrajAndGains;
  cfg.search.samples = 32;
  cfg.search.perturbations = 8;
  cfg.search.iterations = 2;
  const AdaptRunResult g =
      receding_horizon_adapt(model, s, QuadParams{}, default_weights(), cfg);
  ASSERT_FALSE(g.run.schedule.empty());
  EXPECT_TRUE(default_gain_bounds().contains(g.run.schedule.front().gains));
  std::ostringstream out;
  write_adapt_csv(out, "s0", r, true);
  EXPECT_EQ(out.str().rfind("schema_version,", 0), 0u);
  EXPECT_NE(out.str().find(",window,"), std::string::npos);
  EXPECT_EQ(parse_adapt_mode("traj+gains"), AdaptMode::kTrajAndGains);
  EXPECT_THROW(parse_adapt_mode("both"), ConfigError);
}

}  // namespace
}  // namespace trackopt
