#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "trackopt/experiments.h"
#include "trackopt/kvfile.h"

namespace trackopt {
namespace {

TEST(Spearman, MatchesHandComputedValues) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  // Ranks (1,2,3,4,5) vs (2,1,4,3,5): 1 - 6*4/(5*24) = 0.8.
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.8, 1e-12);
  // Ties take the mean rank: (1.5,1.5,3) vs (1,2,3).
  EXPECT_NEAR(spearman({7, 7, 9}, {1, 2, 3}), std::sqrt(0.75), 1e-12);
  EXPECT_THROW(spearman({1}, {1}), std::invalid_argument);
}

TEST(Eval, SummaryFiltersFailures) {
  std::vector<TrajectoryOutcome> runs(3);
  runs[0].run.mean_error = 0.1;
  runs[1].run.mean_error = 0.3;
  runs[2].run.mean_error = 4.0;
  runs[2].run.crashed = true;
  const EvalSummary s = summarize(runs);
  EXPECT_EQ(s.count, 3);
  EXPECT_EQ(s.failures, 1);
  EXPECT_NEAR(s.mean_error, 0.2, 1e-15);
  runs.resize(1);
  runs[0].run.crashed = true;
  EXPECT_TRUE(std::isnan(summarize(runs).mean_error));
}

TEST(Eval, NominalSuiteIsFiniteAndThreadIndependent) {
  EvalConfig c;
  c.count = 5;
  c.seed = 4;
  c.threads = 1;
  const auto a = evaluate_suite(c, QuadParams{}, nullptr);
  c.threads = 3;
  const auto b = evaluate_suite(c, QuadParams{}, nullptr);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::isfinite(a[i].run.mean_error));
    EXPECT_EQ(a[i].run.mean_error, b[i].run.mean_error);
    EXPECT_EQ(a[i].id, b[i].id);
  }
  c.method = Method::kTaco;
  EXPECT_THROW(evaluate_suite(c, QuadParams{}, nullptr), ConfigError);
  EXPECT_THROW(parse_method("mpc"), ConfigError);
  std::ostringstream out;
  write_eval_summary_header(out);
  write_eval_summary_row(out, "minsnap", "nominal", summarize(a));
  EXPECT_EQ(out.str().rfind("schema_version,", 0), 0u);
}

TEST(Crossval, MatrixIsSquareFiniteAndReproducible) {
  CrossvalConfig c;
  c.oracle.samples = 16;
  c.oracle.perturbations = 4;
  c.oracle.iterations = 2;
  c.threads = 2;
  const auto specs = crossval_trajectories(c);
  ASSERT_EQ(specs.size(), 4u);
  // Same shape, slower means longer.
  for (std::size_t i = 1; i < specs.size(); ++i) {
    EXPECT_EQ(specs[i].keypoints.positions, specs[0].keypoints.positions);
    EXPECT_LT(specs[i].keypoints.times.back(), specs[i - 1].keypoints.times.back());
  }
  const CrossvalResult a = crossval(c, QuadParams{}, nullptr);
  const CrossvalResult b = crossval(c, QuadParams{}, nullptr);
  ASSERT_EQ(a.error.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(a.error[i].size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_TRUE(std::isfinite(a.error[i][j]));
      EXPECT_EQ(a.error[i][j], b.error[i][j]);
    }
  }
  std::ostringstream out;
  write_crossval_csv(out, a);
  EXPECT_EQ(out.str().rfind("schema_version,trajectory,tuned_slow,", 0), 0u);
  c.tuner = CrossvalTuner::kTaco;
  EXPECT_THROW(crossval(c, QuadParams{}, nullptr), ConfigError);
  EXPECT_THROW(speed_level("warp"), ConfigError);
}

TEST(Bench, RowIsConsistent) {
  const BenchRow r = bench_dynamics(QuadParams{}, 8, 0.01);
  EXPECT_EQ(r.batch, 8);
  EXPECT_GT(r.scalar_steps_per_s, 0.0);
  EXPECT_NEAR(r.speedup, r.batched_steps_per_s / r.scalar_steps_per_s, 1e-12);
  EXPECT_THROW(bench_dynamics(QuadParams{}, 0, 0.01), ConfigError);
}

TEST(Datagen, RegeneratedRecordMatchesDataset) {
  DatagenConfig c;
  c.count = 100;
  c.seed = 12;
  const Dataset d = generate_dataset(QuadParams{}, c);
  for (std::size_t i : {0u, 17u, 99u}) {
    const RecordContext r = regenerate_record(QuadParams{}, c, i);
    const auto x = encode(InputLayout::kFull, r.gains, r.state, r.traj, r.step);
    for (int k = 0; k < kFullInputDim; ++k) {
      EXPECT_EQ(static_cast<float>(x[k]), d.input(i)[k]) << i << " " << k;
    }
    const PerfVector c2 = compute_perf(rollout(r.state, r.gains, r.traj,
                                               QuadParams{}, kHorizon, r.step));
    for (int k = 0; k < kPerfDim; ++k) {
      EXPECT_NEAR(c2[k], d.output(i)[k], 1e-6 * (1 + c2[k]));
    }
  }
}

// Fake model: predicted cost falls with the first position gain.
class GainModel : public CostModel {
 public:
  InputLayout layout() const override { return InputLayout::kFull; }
  void predict(const double* x, int batch, double* c) const override {
    for (int i = 0; i < batch; ++i) {
      for (int k = 0; k < kPerfDim; ++k) c[i * kPerfDim + k] = 0.0;
      c[i * kPerfDim] = 1.0 / (1.0 + x[i * kFullInputDim]);
    }
  }
  double cost_gradient(const double*, const CostWeights&, double*) const override {
    return 0.0;
  }
};

TEST(Validation, ReportFieldsAndRankCheck) {
  DatagenConfig c;
  c.count = 64;
  c.seed = 5;
  const Dataset d = generate_dataset(QuadParams{}, c);
  const GainModel m;
  const ValidationReport r = validation_report(m, d, 32, 64, default_weights());
  EXPECT_EQ(r.pairs, 32u);
  ASSERT_EQ(r.target_mae.size(), static_cast<std::size_t>(kPerfDim));
  std::ostringstream out;
  write_validation_report(out, r);
  const KeyValueFile kv = KeyValueFile::parse(out.str());
  EXPECT_TRUE(kv.has("target_mae"));
  EXPECT_TRUE(kv.has("cost_spearman"));
  const RankCheck rc =
      rank_check(m, QuadParams{}, c, 0, 64, 3, 16, default_weights(), 1);
  EXPECT_EQ(rc.contexts, 3);
  EXPECT_GE(rc.mean_spearman, -1.0);
  EXPECT_LE(rc.mean_spearman, 1.0);
}

}  // namespace
}  // namespace trackopt
