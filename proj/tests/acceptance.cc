// Acceptance runner: one PASS/FAIL line per criterion, thresholds pinned
// below. Builds its own dataset and models in --work-dir (reused with
// --reuse). Exits 0 once every criterion has been evaluated; --strict also
// turns any FAIL into exit 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.h"
#include "trackopt/batch.h"
#include "trackopt/experiments.h"
#include "trackopt/kvfile.h"

namespace trackopt {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned thresholds.
constexpr int kCrossvalMinDiagonal = 3;
constexpr double kCrossvalMaxSeconds = 30 * 60;
constexpr double kTacoNominalRatio = 0.7;
constexpr double kPipelineMaxSeconds = 20 * 60;
constexpr double kFullNoTrajRatio = 0.85;
constexpr double kAdaptRatio = 0.9;
constexpr double kLatencyMs = 50.0;
constexpr double kResidualTol = 1e-8;
constexpr double kContinuityTol = 1e-9;
constexpr double kGradientTol = 1e-4;
constexpr double kEquivalenceTol = 1e-12;
constexpr double kSpeedupFloor = 5.0;
constexpr double kKktTol = 1e-6;
constexpr double kSpearmanFloor = 0.7;

// Pinned experiment sizes.
constexpr std::size_t kDataCount = 200000;
constexpr std::uint64_t kDataSeed = 3;
constexpr std::uint64_t kSuiteSeed = 1;
constexpr int kTacoSuite = 20;
constexpr int kOracleSuite = 10;
constexpr int kAdaptSuite = 10;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

struct Report {
  std::vector<std::string> lines;
  int failures = 0;

  void add(int id, bool pass, const std::string& detail) {
    const std::string line = "criterion " + std::to_string(id) +
                             (pass ? " PASS " : " FAIL ") + detail;
    std::cout << line << std::endl;
    lines.push_back(line);
    if (!pass) ++failures;
  }
};

struct Options {
  std::string work_dir = "acceptance_work";
  bool reuse = false;
  bool strict = false;
  std::string only;
  int threads = 0;
};

// Dataset and both models, built once and shared by criteria 2, 3, 5, 6, 11.
class Artifacts {
 public:
  explicit Artifacts(const Options& o) : options_(o) {
    fs::create_directories(o.work_dir);
    data_config_.seed = kDataSeed;
    data_config_.count = kDataCount;
    data_config_.threads = threads();
  }

  int threads() const {
    return options_.threads > 0 ? options_.threads : default_thread_count();
  }
  const DatagenConfig& data_config() const { return data_config_; }
  const TrainConfig& train_config() const { return train_config_; }

  const Predictor& model(InputLayout layout) {
    Predictor& m = layout == InputLayout::kFull ? full_ : no_traj_;
    bool& ready = layout == InputLayout::kFull ? full_ready_ : no_traj_ready_;
    if (ready) return m;
    const std::string path =
        path_of(std::string("model_") + layout_name(layout) + ".bin");
    if (options_.reuse && fs::exists(path)) {
      m = load_model(path);
    } else {
      const Dataset& d = dataset();
      const auto t0 = Clock::now();
      m = Predictor(layout, train_config_.hidden);
      const TrainReport r = train(m, project_layout(d, layout), train_config_);
      save_model(m, path);
      record(std::string("train_seconds_") + layout_name(layout), seconds_since(t0));
      record(std::string("best_validation_loss_") + layout_name(layout),
             r.best_validation_loss);
    }
    ready = true;
    return m;
  }

  // Seconds spent building artifacts, from this run or the recorded one.
  double recorded(const std::string& key) const {
    const std::string p = path_of("timings.txt");
    if (!fs::exists(p)) return NAN;
    return KeyValueFile::load(p).number_or(key, NAN);
  }

 private:
  std::string path_of(const std::string& name) const {
    return (fs::path(options_.work_dir) / name).string();
  }

  void record(const std::string& key, double value) {
    const std::string p = path_of("timings.txt");
    KeyValueFile kv = fs::exists(p) ? KeyValueFile::load(p) : KeyValueFile{};
    kv.set(key, value);
    kv.save(p);
  }

  const Dataset& dataset() {
    if (data_ready_) return data_;
    const std::string path = path_of("data.bin");
    if (options_.reuse && fs::exists(path)) {
      data_ = read_dataset(path);
    } else {
      DatagenStats stats;
      data_ = generate_dataset(QuadParams{}, data_config_, &stats);
      write_dataset(data_, path);
      record("datagen_seconds", stats.seconds);
    }
    data_ready_ = true;
    return data_;
  }

  Options options_;
  DatagenConfig data_config_;
  TrainConfig train_config_;
  Dataset data_;
  bool data_ready_ = false;
  Predictor full_, no_traj_;
  bool full_ready_ = false, no_traj_ready_ = false;
};

// --- 1 ------------------------------------------------------------------------

void crossval_criterion(Artifacts& a, Report& report) {
  CrossvalConfig c;
  c.seed = kSuiteSeed;
  c.threads = a.threads();
  const CrossvalResult r = crossval(c, QuadParams{}, nullptr);
  std::ostringstream rows;
  for (std::size_t i = 0; i < r.error.size(); ++i) {
    rows << (i ? " | " : "");
    for (std::size_t j = 0; j < r.error[i].size(); ++j) {
      rows << (j ? " " : "") << fmt(r.error[i][j], 3)
           << (r.crashed[i][j] ? "x" : "");
    }
  }
  report.add(1,
             r.diagonal_row_minima >= kCrossvalMinDiagonal &&
                 r.seconds <= kCrossvalMaxSeconds,
             "diagonal row minima " + std::to_string(r.diagonal_row_minima) +
                 "/4 (need >= 3), " + fmt(r.seconds, 3) + " s; rows " + rows.str());
}

// --- 2, 3 ---------------------------------------------------------------------

EvalSummary run_suite(Method m, const CostModel* model, int n, int threads) {
  EvalConfig c;
  c.method = m;
  c.count = n;
  c.seed = kSuiteSeed;
  c.threads = threads;
  const auto t0 = Clock::now();
  EvalSummary s = summarize(evaluate_suite(c, QuadParams{}, model));
  s.seconds = seconds_since(t0);
  return s;
}

std::string describe(const EvalSummary& s) {
  return fmt(s.mean_error) + " m (" + std::to_string(s.failures) + " failed)";
}

void taco_criteria(Artifacts& a, Report& report, bool want2, bool want3) {
  const Predictor& full = a.model(InputLayout::kFull);
  const EvalSummary nominal = run_suite(Method::kNominal, nullptr, kTacoSuite, a.threads());
  const EvalSummary taco = run_suite(Method::kTaco, &full, kTacoSuite, a.threads());
  if (want2) {
    const double pipeline = a.recorded("datagen_seconds") +
                            a.recorded("train_seconds_full") + nominal.seconds +
                            taco.seconds;
    const double ratio = taco.mean_error / nominal.mean_error;
    report.add(2, ratio <= kTacoNominalRatio && pipeline <= kPipelineMaxSeconds,
               "taco " + describe(taco) + " vs nominal " + describe(nominal) +
                   ", ratio " + fmt(ratio) + " (need <= 0.7); datagen+train+eval " +
                   fmt(pipeline, 4) + " s on " + std::to_string(kDataCount) +
                   " records");
  }
  if (want3) {
    const Predictor& nt = a.model(InputLayout::kNoTraj);
    const EvalSummary no_traj =
        run_suite(Method::kTacoNoTraj, &nt, kTacoSuite, a.threads());
    const double ratio = taco.mean_error / no_traj.mean_error;
    report.add(3, ratio <= kFullNoTrajRatio,
               "full " + describe(taco) + " vs no-traj " + describe(no_traj) +
                   ", ratio " + fmt(ratio) + " (need <= 0.85)");
  }
}

// --- 4 ------------------------------------------------------------------------

void oracle_criterion(Artifacts& a, Report& report) {
  const EvalSummary nominal = run_suite(Method::kNominal, nullptr, kOracleSuite, a.threads());
  const EvalSummary fixed = run_suite(Method::kOracleStatic, nullptr, kOracleSuite, a.threads());
  const EvalSummary adaptive =
      run_suite(Method::kOracleAdaptive, nullptr, kOracleSuite, a.threads());
  report.add(4,
             adaptive.mean_error <= fixed.mean_error &&
                 fixed.mean_error <= nominal.mean_error,
             "adaptive " + describe(adaptive) + " <= static " + describe(fixed) +
                 " <= nominal " + describe(nominal));
}

// --- 5 ------------------------------------------------------------------------

void adapt_criterion(Artifacts& a, Report& report) {
  const Predictor& full = a.model(InputLayout::kFull);
  AdaptSuiteConfig c;
  c.count = kAdaptSuite;
  c.seed = kSuiteSeed;
  c.threads = a.threads();
  c.run.mode = AdaptMode::kTrajOnly;
  const AdaptSummary traj = summarize(adapt_suite(c, QuadParams{}, full));
  c.run.mode = AdaptMode::kTrajAndGains;
  const AdaptSummary both = summarize(adapt_suite(c, QuadParams{}, full));
  const double ratio = traj.adapted_keypoint_error / traj.baseline_keypoint_error;
  report.add(5,
             ratio <= kAdaptRatio &&
                 both.adapted_keypoint_error <= traj.adapted_keypoint_error,
             "keypoint error adapted " + fmt(traj.adapted_keypoint_error) +
                 " vs static " + fmt(traj.baseline_keypoint_error) + " m, ratio " +
                 fmt(ratio) + " (need <= 0.9); traj+gains " +
                 fmt(both.adapted_keypoint_error) + " m (need <= traj-only)");
}

// --- 6 ------------------------------------------------------------------------

void latency_criterion(Artifacts& a, Report& report) {
  const Predictor& full = a.model(InputLayout::kFull);
  const SampledTrajectory t = realize(suite_trajectory(Suite::kMinsnap, kSuiteSeed, 0));
  const QuadParams p;
  std::vector<double> ms;
  for (int i = 0; i < 50; ++i) {
    const long step = (i * 37) % t.last_step();
    SearchConfig s;
    s.seed = static_cast<std::uint64_t>(i);
    const QuadState st = hover_state(p, t.at(step).position);
    const auto t0 = Clock::now();
    optimize_gains(full, st, t, step, default_weights(), s);
    ms.push_back(1e3 * seconds_since(t0));
  }
  std::nth_element(ms.begin(), ms.begin() + 25, ms.end());
  const double median = ms[25];
  report.add(6, median <= kLatencyMs,
             "median optimize_gains latency " + fmt(median, 3) +
                 " ms over 50 calls (N=512, 4 iterations; need <= 50)");
}

// --- 7 ------------------------------------------------------------------------

void nullspace_criterion(Report& report) {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> scale(0.0, 1.5);
  int failures = 0;
  double worst_res = 0.0, worst_cont = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Keypoints kp = random_keypoints(rng, 2 + i % 7);
    const SplineTrajectory s = random_polynomial(kp, scale(rng), rng);
    const double b = s.constraints().rhs.cwiseAbs().maxCoeff();
    const double tol = kResidualTol * (1.0 + b);
    const KnotCheck k = check_knots(s);
    const double res = std::max(s.constraint_residual(), k.keypoint_error);
    worst_res = std::max(worst_res, res / (1.0 + b));
    worst_cont = std::max(worst_cont, k.continuity);
    if (res > tol || k.continuity > kContinuityTol) ++failures;
  }
  report.add(7, failures == 0,
             std::to_string(failures) + " failures over 1000 pairs; worst residual/(1+|b|) " +
                 fmt(worst_res, 3) + ", worst C1-C3 jump " + fmt(worst_cont, 3));
}

// --- 8 ------------------------------------------------------------------------

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

BasicPredictor<double> random_predictor(std::mt19937_64& rng) {
  BasicPredictor<double> p(InputLayout::kFull, {64, 64});
  p.net().init_he(rng);
  std::normal_distribution<double> g(0.0, 0.2);
  std::uniform_real_distribution<double> u(0.3, 2.0);
  for (int l = 0; l < p.net().layers(); ++l) {
    for (double& b : p.net().biases(l)) b = g(rng);
  }
  p.input_norm().mean.assign(kFullInputDim, 0.0);
  p.input_norm().stddev.clear();
  for (int k = 0; k < kFullInputDim; ++k) p.input_norm().stddev.push_back(u(rng));
  p.output_norm().mean.assign(kPerfDim, -1.0);
  p.output_norm().stddev.assign(kPerfDim, 0.3);
  return p;
}

void gradient_criterion(Report& report) {
  constexpr double h = 1e-5;
  double worst_w = 0.0, worst_x = 0.0, worst_phi = 0.0;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    const BasicPredictor<double> model = random_predictor(rng);
    const Mlp<double>& net = model.net();

    // Weights: 0.5 |y - target|^2 on a small batch.
    const int batch = 3;
    std::vector<double> x(batch * kFullInputDim), target(batch * kPerfDim);
    for (double& v : x) v = g(rng);
    for (double& v : target) v = g(rng);
    auto loss = [&](const Mlp<double>& m) {
      Mlp<double>::Workspace ws;
      const double* y = m.forward(x.data(), batch, ws);
      double s = 0.0;
      for (int i = 0; i < batch * kPerfDim; ++i) {
        s += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
      }
      return s;
    };
    Mlp<double>::Workspace ws;
    const double* y = net.forward(x.data(), batch, ws);
    std::vector<double> dy(batch * kPerfDim);
    for (int i = 0; i < batch * kPerfDim; ++i) dy[i] = y[i] - target[i];
    Mlp<double> grad = net;
    net.backward(ws, dy.data(), &grad, nullptr);
    for (int probe = 0; probe < 20; ++probe) {
      const int l = static_cast<int>(rng() % net.layers());
      const bool bias = rng() % 4 == 0;
      const std::size_t size = bias ? net.biases(l).size() : net.weights(l).size();
      const std::size_t i = rng() % size;
      Mlp<double> p = net, m = net;
      (bias ? p.biases(l) : p.weights(l))[i] += h;
      (bias ? m.biases(l) : m.weights(l))[i] -= h;
      const double fd = (loss(p) - loss(m)) / (2 * h);
      worst_w = std::max(
          worst_w, rel_err(fd, bias ? grad.biases(l)[i] : grad.weights(l)[i]));
    }

    // Input gradient of the scalarized prediction.
    std::vector<double> in(kFullInputDim), gin(kFullInputDim);
    for (double& v : in) v = g(rng);
    const CostWeights w = default_weights();
    model.cost_gradient(in.data(), w, gin.data());
    for (int k = 0; k < kFullInputDim; ++k) {
      auto ip = in, im = in;
      ip[k] += h;
      im[k] -= h;
      PerfVector cp, cm;
      model.predict(ip.data(), 1, cp.data());
      model.predict(im.data(), 1, cm.data());
      worst_x = std::max(worst_x,
                         rel_err((scalarize(cp, w) - scalarize(cm, w)) / (2 * h), gin[k]));
    }

    // Chained through the trajectory: dJ/dphi along random directions.
    const SplineTrajectory s =
        build_spline(sample_training_trajectory(TrajectoryType::kMinsnap, rng));
    const long step = static_cast<long>(rng() % static_cast<std::uint64_t>(
                                            s.duration() / kSimDt));
    QuadState st = hover_state(QuadParams{}, s.sample(step * kSimDt).position);
    st.position += Eigen::Vector3d(0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng));
    Eigen::VectorXd gphi;
    window_objective(model, s, st, nominal_gains(), step, w, &gphi);
    for (int d = 0; d < 5; ++d) {
      Eigen::VectorXd dir(s.null_dimension());
      for (int k = 0; k < dir.size(); ++k) dir[k] = g(rng);
      dir.normalize();
      const double jp = window_objective(
          model, s.with_null_coordinates(s.null_coordinates() + h * dir), st,
          nominal_gains(), step, w, nullptr);
      const double jm = window_objective(
          model, s.with_null_coordinates(s.null_coordinates() - h * dir), st,
          nominal_gains(), step, w, nullptr);
      worst_phi = std::max(worst_phi, rel_err((jp - jm) / (2 * h), gphi.dot(dir)));
    }
  }
  report.add(8,
             worst_w <= kGradientTol && worst_x <= kGradientTol &&
                 worst_phi <= kGradientTol,
             "max relative error over 50 instances: weights " + fmt(worst_w, 3) +
                 ", inputs " + fmt(worst_x, 3) + ", dJ/dphi " + fmt(worst_phi, 3) +
                 " (need <= 1e-4)");
}

// --- 9 ------------------------------------------------------------------------

void simulator_criterion(Report& report) {
  const QuadParams p;
  constexpr std::size_t kLanes = 32;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> motor(0.3 * p.motor_speed_max,
                                               0.9 * p.motor_speed_max);
  BatchState batch(kLanes);
  for (std::size_t i = 0; i < kLanes; ++i) {
    QuadState s;
    s.position = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
    s.velocity = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 2.0;
    s.attitude = Eigen::Quaterniond(1.0, 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng))
                     .normalized();
    s.body_rates = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
    for (double& w : s.motor_speeds) w = motor(rng);
    batch.set(i, s);
  }
  double worst = 0.0;
  BatchCommand cmd = make_batch_command(kLanes);
  for (int k = 0; k < 1000; ++k) {
    std::vector<QuadState> before(kLanes);
    std::vector<RotorCommand> rc(kLanes);
    for (std::size_t i = 0; i < kLanes; ++i) {
      before[i] = batch.get(i);
      for (int r = 0; r < 4; ++r) cmd[r][i] = rc[i][r] = motor(rng);
    }
    step_batch(batch, cmd, p, kSimDt);
    for (std::size_t i = 0; i < kLanes; ++i) {
      const QuadState s = step(before[i], rc[i], p, kSimDt);
      const QuadState b = batch.get(i);
      auto cmp = [&](double x, double y) {
        worst = std::max(worst, std::abs(x - y) / (1.0 + std::abs(x)));
      };
      for (int a = 0; a < 3; ++a) {
        cmp(s.position[a], b.position[a]);
        cmp(s.velocity[a], b.velocity[a]);
        cmp(s.body_rates[a], b.body_rates[a]);
      }
      cmp(s.attitude.w(), b.attitude.w());
      cmp(s.attitude.x(), b.attitude.x());
      cmp(s.attitude.y(), b.attitude.y());
      cmp(s.attitude.z(), b.attitude.z());
      for (int r = 0; r < 4; ++r) cmp(s.motor_speeds[r], b.motor_speeds[r]);
    }
  }
  const BenchRow row = bench_dynamics(p, 1024, 1.0);
  report.add(9, worst <= kEquivalenceTol && row.speedup >= kSpeedupFloor,
             "batch vs scalar worst relative difference " + fmt(worst, 3) +
                 " over 1000 steps x 32 lanes (need <= 1e-12); B=1024 speedup " +
                 fmt(row.speedup, 3) + "x (need >= 5)");
}

// --- 10 -----------------------------------------------------------------------

void minsnap_criterion(Report& report) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  int snap_drops = 0;
  for (int i = 0; i < 20; ++i) {
    const Keypoints kp = random_keypoints(rng, 2 + i % 7);
    const ConstraintSystem sys = build_constraints(kp);
    const Eigen::MatrixXd h = quadrature_hessian(kp, kDefaultDegree);
    const Eigen::VectorXd expect = kkt_minsnap(sys, h);
    const SplineTrajectory s = SplineTrajectory::minsnap(kp);
    worst = std::max(worst, (s.coefficients() - expect).norm() / expect.norm());
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd phi(s.null_dimension());
      const double sigma = std::pow(10.0, -4 + (k % 5));
      for (int k = 0; k < phi.size(); ++k) phi[k] = sigma * g(rng);
      if (s.with_null_coordinates(phi).snap_cost() < s.snap_cost() * (1.0 - 1e-12)) {
        ++snap_drops;
      }
    }
  }
  report.add(10, worst <= kKktTol && snap_drops == 0,
             "worst coefficient error vs dense KKT " + fmt(worst, 3) +
                 " relative over 20 instances (need <= 1e-6); " +
                 std::to_string(snap_drops) + " of 400 null-space perturbations lowered snap");
}

// --- 11 -----------------------------------------------------------------------

void spearman_criterion(Artifacts& a, Report& report) {
  const Predictor& full = a.model(InputLayout::kFull);
  const std::size_t begin = training_count(a.train_config(), kDataCount);
  const RankCheck r = rank_check(full, QuadParams{}, a.data_config(), begin,
                                 kDataCount, 50, 256, default_weights(), 11);
  report.add(11, r.contexts == 50 && r.mean_spearman >= kSpearmanFloor,
             "mean Spearman " + fmt(r.mean_spearman) + " (min " +
                 fmt(r.min_spearman, 3) + ") over " + std::to_string(r.contexts) +
                 " held-out contexts x 256 gains (need >= 0.7)");
}

}  // namespace
}  // namespace trackopt

int main(int argc, char** argv) {
  using namespace trackopt;
  Options o;
  CLI::App app{"trackopt acceptance runner"};
  app.add_option("--work-dir", o.work_dir, "Dataset, models and results");
  app.add_flag("--reuse", o.reuse, "Reuse dataset and models in the work dir");
  app.add_flag("--strict", o.strict, "Exit 1 if any criterion fails");
  app.add_option("--only", o.only, "Comma separated criteria to run");
  app.add_option("--threads", o.threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);

  std::set<int> want;
  {
    std::stringstream in(o.only);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) want.insert(std::stoi(item));
    }
  }
  auto on = [&](int id) { return want.empty() || want.count(id) > 0; };

  try {
    Artifacts art(o);
    Report report;
    const auto t0 = Clock::now();
    if (on(1)) crossval_criterion(art, report);
    if (on(2) || on(3)) taco_criteria(art, report, on(2), on(3));
    if (on(4)) oracle_criterion(art, report);
    if (on(5)) adapt_criterion(art, report);
    if (on(6)) latency_criterion(art, report);
    if (on(7)) nullspace_criterion(report);
    if (on(8)) gradient_criterion(report);
    if (on(9)) simulator_criterion(report);
    if (on(10)) minsnap_criterion(report);
    if (on(11)) spearman_criterion(art, report);
    std::cout << report.lines.size() - report.failures << " of "
              << report.lines.size() << " criteria pass (" << seconds_since(t0)
              << " s)" << std::endl;
    std::ofstream out(fs::path(o.work_dir) / "acceptance.txt");
    for (const auto& l : report.lines) out << l << '\n';
    return o.strict && report.failures > 0 ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "acceptance run failed: " << e.what() << '\n';
    return 3;
  }
}
