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

#include "trackopt/predictor.h"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <cblas.h>

#include "trackopt/kvfile.h"

namespace trackopt {

// --- encoding -------------------------------------------------------------

int input_dim(InputLayout layout) {
  return layout == InputLayout::kFull ? kFullInputDim : kNoTrajInputDim;
}

const char* layout_name(InputLayout layout) {
  return layout == InputLayout::kFull ? "full" : "no-traj";
}

InputLayout parse_layout(const std::string& name) {
  if (name == "full") return InputLayout::kFull;
  if (name == "no-traj") return InputLayout::kNoTraj;
  throw ConfigError("unknown input layout '" + name + "'");
}

void set_gains(const Gains& gains, double* encoded) {
  const auto g = gains.to_array();
  std::copy(g.begin(), g.end(), encoded + kGainOffset);
}

void encode(InputLayout layout, const Gains& gains, const QuadState& state,
            const SampledTrajectory& traj, long step, double* out) {
  set_gains(gains, out);
  double* o = out + kObsOffset;
  for (int k = 0; k < 3; ++k) o[k] = state.velocity[k];
  // q and -q are the same attitude; keep the representative with w >= 0.
  const double sign = state.attitude.w() < 0.0 ? -1.0 : 1.0;
  o[3] = sign * state.attitude.w();
  o[4] = sign * state.attitude.x();
  o[5] = sign * state.attitude.y();
  o[6] = sign * state.attitude.z();
  for (int k = 0; k < 3; ++k) o[7 + k] = state.body_rates[k];
  double* t = out + kTrajOffset;
  if (layout == InputLayout::kNoTraj) {
    const Eigen::Vector3d e_p = state.position - traj.at(step).position;
    for (int k = 0; k < 3; ++k) t[k] = e_p[k];
    return;
  }
  for (int i = 0; i < kCoarseSamples; ++i) {
    const Eigen::Vector3d d =
        traj.at(step + i * kCoarseStride).position - state.position;
    for (int k = 0; k < 3; ++k) t[3 * i + k] = d[k];
  }
}

std::vector<double> encode(InputLayout layout, const Gains& gains,
                           const QuadState& state,
                           const SampledTrajectory& traj, long step) {
  std::vector<double> out(input_dim(layout));
  encode(layout, gains, state, traj, step, out.data());
  return out;
}

// --- MLP ------------------------------------------------------------------

namespace {

// Row-major C = alpha op(A) op(B) + beta C.
void gemm(bool ta, bool tb, int m, int n, int k, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, lda, b, ldb,
              beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b, ldb,
              beta, c, ldc);
}

}  // namespace

template <typename Scalar>
Mlp<Scalar>::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("MLP needs >= 2 dims");
  for (int d : dims_) {
    if (d <= 0) throw std::invalid_argument("MLP dims must be positive");
  }
  for (int l = 0; l < layers(); ++l) {
    weights_.emplace_back(static_cast<std::size_t>(dims_[l]) * dims_[l + 1],
                          Scalar(0));
    biases_.emplace_back(dims_[l + 1], Scalar(0));
  }
}

template <typename Scalar>
std::size_t Mlp<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layers(); ++l) {
    n += weights_[l].size() + biases_[l].size();
  }
  return n;
}

template <typename Scalar>
void Mlp<Scalar>::init_he(std::mt19937_64& rng) {
  for (int l = 0; l < layers(); ++l) {
    // Linear head gets unit-gain scaling, ReLU layers the factor 2.
    const double gain = l + 1 == layers() ? 1.0 : 2.0;
    std::normal_distribution<double> normal(0.0,
                                            std::sqrt(gain / dims_[l]));
    for (auto& w : weights_[l]) w = static_cast<Scalar>(normal(rng));
    std::fill(biases_[l].begin(), biases_[l].end(), Scalar(0));
  }
}

template <typename Scalar>
void Mlp<Scalar>::set_zero() {
  for (int l = 0; l < layers(); ++l) {
    std::fill(weights_[l].begin(), weights_[l].end(), Scalar(0));
    std::fill(biases_[l].begin(), biases_[l].end(), Scalar(0));
  }
}

template <typename Scalar>
const Scalar* Mlp<Scalar>::forward(const Scalar* x, int batch,
                                   Workspace& ws) const {
  ws.batch = batch;
  ws.act.resize(dims_.size());
  ws.act[0].assign(x, x + static_cast<std::size_t>(batch) * dims_[0]);
  for (int l = 0; l < layers(); ++l) {
    const int in = dims_[l], out = dims_[l + 1];
    auto& y = ws.act[l + 1];
    y.resize(static_cast<std::size_t>(batch) * out);
    for (int b = 0; b < batch; ++b) {
      std::copy(biases_[l].begin(), biases_[l].end(),
                y.begin() + static_cast<std::size_t>(b) * out);
    }
    gemm(false, true, batch, out, in, ws.act[l].data(), in,
         weights_[l].data(), in, Scalar(1), y.data(), out);
    if (l + 1 < layers()) {
      for (auto& v : y) v = v > Scalar(0) ? v : Scalar(0);
    }
  }
  return ws.act.back().data();
}

template <typename Scalar>
void Mlp<Scalar>::backward(Workspace& ws, const Scalar* dy, Mlp* grad,
                           Scalar* dx) const {
  const int batch = ws.batch;
  std::vector<Scalar> delta(dy,
                            dy + static_cast<std::size_t>(batch) * dims_.back());
  std::vector<Scalar> prev;
  for (int l = layers() - 1; l >= 0; --l) {
    const int in = dims_[l], out = dims_[l + 1];
    const Scalar* x = ws.act[l].data();
    if (grad) {
      gemm(true, false, out, in, batch, delta.data(), out, x, in, Scalar(0),
           grad->weights_[l].data(), in);
      auto& db = grad->biases_[l];
      std::fill(db.begin(), db.end(), Scalar(0));
      for (int b = 0; b < batch; ++b) {
        const Scalar* row = delta.data() + static_cast<std::size_t>(b) * out;
        for (int j = 0; j < out; ++j) db[j] += row[j];
      }
    }
    if (l == 0 && !dx) break;
    prev.resize(static_cast<std::size_t>(batch) * in);
    gemm(false, false, batch, in, out, delta.data(), out, weights_[l].data(),
         in, Scalar(0), prev.data(), in);
    if (l == 0) {
      std::copy(prev.begin(), prev.end(), dx);
      break;
    }
    // x holds the ReLU output of layer l - 1.
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!(x[i] > Scalar(0))) prev[i] = Scalar(0);
    }
    delta.swap(prev);
  }
}

template <typename Scalar>
template <typename Other>
Mlp<Other> Mlp<Scalar>::cast() const {
  Mlp<Other> m(dims_);
  for (int l = 0; l < layers(); ++l) {
    std::transform(weights_[l].begin(), weights_[l].end(),
                   m.weights_[l].begin(),
                   [](Scalar v) { return static_cast<Other>(v); });
    std::transform(biases_[l].begin(), biases_[l].end(), m.biases_[l].begin(),
                   [](Scalar v) { return static_cast<Other>(v); });
  }
  return m;
}

template class Mlp<float>;
template class Mlp<double>;
template Mlp<double> Mlp<float>::cast<double>() const;
template Mlp<float> Mlp<double>::cast<float>() const;
template Mlp<float> Mlp<float>::cast<float>() const;
template Mlp<double> Mlp<double>::cast<double>() const;

Normalization Normalization::fit(const float* rows, std::size_t count,
                                 int dim,
                                 std::span<const std::size_t> indices) {
  Normalization n;
  n.mean.assign(dim, 0.0);
  n.stddev.assign(dim, 1.0);
  if (indices.empty()) return n;
  (void)count;
  std::vector<double> sq(dim, 0.0);
  for (std::size_t i : indices) {
    const float* r = rows + i * dim;
    for (int k = 0; k < dim; ++k) n.mean[k] += r[k];
  }
  for (double& m : n.mean) m /= static_cast<double>(indices.size());
  for (std::size_t i : indices) {
    const float* r = rows + i * dim;
    for (int k = 0; k < dim; ++k) {
      const double d = r[k] - n.mean[k];
      sq[k] += d * d;
    }
  }
  for (int k = 0; k < dim; ++k) {
    n.stddev[k] = std::max(
        std::sqrt(sq[k] / static_cast<double>(indices.size())), kMinStd);
  }
  return n;
}

// --- predictor --------------------------------------------------------------

std::vector<int> default_hidden_layers() { return {512, 512, 256, 256}; }

template <typename Scalar>
BasicPredictor<Scalar>::BasicPredictor(InputLayout layout,
                                       const std::vector<int>& hidden)
    : layout_(layout) {
  std::vector<int> dims{input_dim(layout)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(kPerfDim);
  net_ = Mlp<Scalar>(dims);
  input_norm_.mean.assign(dims.front(), 0.0);
  input_norm_.stddev.assign(dims.front(), 1.0);
  output_norm_.mean.assign(kPerfDim, 0.0);
  output_norm_.stddev.assign(kPerfDim, 1.0);
}

template <typename Scalar>
double BasicPredictor<Scalar>::to_target(int k, double c) const {
  const double y = target_transform_ == kTargetLog1p ? std::log1p(c) : c;
  return (y - output_norm_.mean[k]) / output_norm_.stddev[k];
}

template <typename Scalar>
double BasicPredictor<Scalar>::from_target(int k, double z) const {
  const double y = z * output_norm_.stddev[k] + output_norm_.mean[k];
  return target_transform_ == kTargetLog1p ? std::expm1(y) : y;
}

template <typename Scalar>
void BasicPredictor<Scalar>::normalize_input(const double* raw,
                                             Scalar* out) const {
  for (int k = 0; k < net_.input_dim(); ++k) {
    out[k] = static_cast<Scalar>((raw[k] - input_norm_.mean[k]) /
                                 input_norm_.stddev[k]);
  }
}

template <typename Scalar>
void BasicPredictor<Scalar>::normalize_input(const float* raw,
                                             Scalar* out) const {
  for (int k = 0; k < net_.input_dim(); ++k) {
    out[k] = static_cast<Scalar>((raw[k] - input_norm_.mean[k]) /
                                 input_norm_.stddev[k]);
  }
}

template <typename Scalar>
void BasicPredictor<Scalar>::predict(const double* x, int batch,
                                     double* c) const {
  const int in = net_.input_dim();
  const std::size_t total = static_cast<std::size_t>(batch) * in;
  if (!std::all_of(x, x + total, [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("non-finite predictor input");
  }
  std::vector<Scalar> xn(total);
  for (int b = 0; b < batch; ++b) {
    normalize_input(x + static_cast<std::size_t>(b) * in,
                    xn.data() + static_cast<std::size_t>(b) * in);
  }
  typename Mlp<Scalar>::Workspace ws;
  const Scalar* y = net_.forward(xn.data(), batch, ws);
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < kPerfDim; ++k) {
      c[b * kPerfDim + k] = from_target(k, y[b * kPerfDim + k]);
    }
  }
}

template <typename Scalar>
double BasicPredictor<Scalar>::cost_gradient(const double* x,
                                             const CostWeights& w,
                                             double* grad) const {
  const int in = net_.input_dim();
  if (!std::all_of(x, x + in, [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("non-finite predictor input");
  }
  std::vector<Scalar> xn(in);
  normalize_input(x, xn.data());
  typename Mlp<Scalar>::Workspace ws;
  const Scalar* z = net_.forward(xn.data(), 1, ws);
  double cost = 0.0;
  std::vector<Scalar> dz(kPerfDim);
  for (int k = 0; k < kPerfDim; ++k) {
    const double s = output_norm_.stddev[k];
    const double y = static_cast<double>(z[k]) * s + output_norm_.mean[k];
    double dc_dz = s;
    if (target_transform_ == kTargetLog1p) {
      cost += w.w[k] * std::expm1(y);
      dc_dz *= std::exp(y);
    } else {
      cost += w.w[k] * y;
    }
    dz[k] = static_cast<Scalar>(w.w[k] * dc_dz);
  }
  std::vector<Scalar> dx(in);
  net_.backward(ws, dz.data(), nullptr, dx.data());
  for (int k = 0; k < in; ++k) {
    grad[k] = static_cast<double>(dx[k]) / input_norm_.stddev[k];
  }
  return cost;
}

template <typename Scalar>
template <typename Other>
BasicPredictor<Other> BasicPredictor<Scalar>::cast() const {
  BasicPredictor<Other> p;
  p.layout_ = layout_;
  p.net_ = net_.template cast<Other>();
  p.input_norm_ = input_norm_;
  p.output_norm_ = output_norm_;
  p.target_transform_ = target_transform_;
  return p;
}

template class BasicPredictor<float>;
template class BasicPredictor<double>;
template BasicPredictor<double> BasicPredictor<float>::cast<double>() const;
template BasicPredictor<float> BasicPredictor<double>::cast<float>() const;

// --- training ---------------------------------------------------------------

TrainConfig TrainConfig::load(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  TrainConfig c;
  c.seed = static_cast<std::uint64_t>(kv.integer_or("seed", 1));
  c.epochs = static_cast<int>(kv.integer_or("epochs", c.epochs));
  c.learning_rate = kv.number_or("learning_rate", c.learning_rate);
  c.batch_size = static_cast<int>(kv.integer_or("batch_size", c.batch_size));
  c.validation_fraction =
      kv.number_or("validation_fraction", c.validation_fraction);
  if (kv.has("hidden")) {
    c.hidden.clear();
    for (double h : kv.numbers("hidden")) c.hidden.push_back(static_cast<int>(h));
  }
  if (c.epochs < 1 || c.batch_size < 1 || !(c.learning_rate > 0.0) ||
      c.validation_fraction < 0.0 || c.validation_fraction >= 1.0) {
    throw ConfigError("invalid training config in " + path);
  }
  return c;
}

std::string TrainConfig::to_string() const {
  KeyValueFile kv;
  kv.set("seed", static_cast<double>(seed));
  kv.set("epochs", static_cast<double>(epochs));
  kv.set("learning_rate", learning_rate);
  kv.set("batch_size", static_cast<double>(batch_size));
  kv.set("validation_fraction", validation_fraction);
  kv.set("hidden", std::vector<double>(hidden.begin(), hidden.end()));
  return kv.to_string();
}

namespace {

template <typename Scalar>
struct AdamState {
  Mlp<Scalar> m, v;
  long t = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename Scalar>
void adam_update(std::vector<Scalar>& p, const std::vector<Scalar>& g,
                 std::vector<Scalar>& m, std::vector<Scalar>& v, double lr,
                 double c1, double c2) {
  const Scalar b1 = static_cast<Scalar>(kBeta1);
  const Scalar b2 = static_cast<Scalar>(kBeta2);
  const Scalar step = static_cast<Scalar>(lr / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  const Scalar eps = static_cast<Scalar>(kAdamEps);
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (Scalar(1) - b1) * g[i];
    v[i] = b2 * v[i] + (Scalar(1) - b2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
  }
}

// Standardized targets for every record.
template <typename Scalar>
std::vector<Scalar> standardized_targets(const BasicPredictor<Scalar>& model,
                                         const Dataset& data) {
  std::vector<Scalar> z(data.outputs.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int k = 0; k < kPerfDim; ++k) {
      z[i * kPerfDim + k] =
          static_cast<Scalar>(model.to_target(k, data.output(i)[k]));
    }
  }
  return z;
}

template <typename Scalar>
double loss_on_range(const BasicPredictor<Scalar>& model, const Dataset& data,
                     const std::vector<Scalar>& targets, std::size_t begin,
                     std::size_t end) {
  if (end <= begin) return 0.0;
  const int in = data.input_dim;
  constexpr std::size_t kChunk = 4096;
  std::vector<Scalar> xb;
  typename Mlp<Scalar>::Workspace ws;
  double sum = 0.0;
  for (std::size_t s = begin; s < end; s += kChunk) {
    const std::size_t n = std::min(kChunk, end - s);
    xb.resize(n * in);
    for (std::size_t i = 0; i < n; ++i) {
      model.normalize_input(data.input(s + i), xb.data() + i * in);
    }
    const Scalar* y = model.net().forward(xb.data(), static_cast<int>(n), ws);
    for (std::size_t i = 0; i < n * kPerfDim; ++i) {
      const double d = static_cast<double>(y[i]) -
                       static_cast<double>(targets[s * kPerfDim + i]);
      sum += d * d;
    }
  }
  return sum / static_cast<double>((end - begin) * kPerfDim);
}

void check_dims(InputLayout layout, const Dataset& data) {
  if (data.input_dim != input_dim(layout) || data.output_dim != kPerfDim) {
    throw ConfigError("dataset dims " + std::to_string(data.input_dim) + "/" +
                      std::to_string(data.output_dim) +
                      " do not match the model layout " + layout_name(layout));
  }
}

}  // namespace

template <typename Scalar>
double evaluate_loss(const BasicPredictor<Scalar>& model, const Dataset& data,
                     std::size_t begin, std::size_t end) {
  check_dims(model.layout(), data);
  return loss_on_range(model, data, standardized_targets(model, data), begin,
                       end);
}

std::size_t training_count(const TrainConfig& config, std::size_t n) {
  return n - static_cast<std::size_t>(
                 std::floor(config.validation_fraction * static_cast<double>(n)));
}

template <typename Scalar>
TrainReport train(BasicPredictor<Scalar>& model, const Dataset& data,
                  const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  check_dims(model.layout(), data);
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("empty dataset");
  const std::size_t n_train = training_count(config, n);
  const std::size_t n_val = n - n_train;
  if (n_train == 0) throw ConfigError("no training records after the split");

  TrainReport report;
  report.train_count = n_train;
  report.validation_count = n_val;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  model.input_norm() =
      Normalization::fit(data.inputs.data(), n, data.input_dim, order);
  {
    std::vector<float> transformed(n_train * kPerfDim);
    for (std::size_t i = 0; i < n_train * kPerfDim; ++i) {
      const double c = data.outputs[i];
      transformed[i] = static_cast<float>(
          model.target_transform() == kTargetLog1p ? std::log1p(c) : c);
    }
    model.output_norm() =
        Normalization::fit(transformed.data(), n_train, kPerfDim, order);
  }
  const std::vector<Scalar> targets = standardized_targets(model, data);

  std::mt19937_64 rng(config.seed);
  model.net().init_he(rng);
  Mlp<Scalar> grad(model.net().dims());
  AdamState<Scalar> adam{Mlp<Scalar>(model.net().dims()),
                         Mlp<Scalar>(model.net().dims()), 0};
  Mlp<Scalar> best = model.net();
  double best_loss = std::numeric_limits<double>::infinity();

  const int in = data.input_dim;
  const std::size_t batch = std::min<std::size_t>(config.batch_size, n_train);
  const std::size_t steps_per_epoch = (n_train + batch - 1) / batch;
  const double total_steps =
      static_cast<double>(steps_per_epoch) * config.epochs;
  std::vector<Scalar> xb(batch * in), zb(batch * kPerfDim),
      dy(batch * kPerfDim);
  typename Mlp<Scalar>::Workspace ws;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double lr = config.learning_rate;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t first = s * batch;
      const std::size_t nb = std::min(batch, n_train - first);
      for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t r = order[first + i];
        model.normalize_input(data.input(r), xb.data() + i * in);
        std::copy_n(targets.begin() + r * kPerfDim, kPerfDim,
                    zb.begin() + i * kPerfDim);
      }
      const Scalar* y = model.net().forward(xb.data(), static_cast<int>(nb), ws);
      double loss = 0.0;
      const Scalar scale = static_cast<Scalar>(2.0 / (nb * kPerfDim));
      for (std::size_t i = 0; i < nb * kPerfDim; ++i) {
        const Scalar d = y[i] - zb[i];
        loss += static_cast<double>(d) * d;
        dy[i] = scale * d;
      }
      loss /= static_cast<double>(nb * kPerfDim);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training loss became non-finite in epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(s));
      }
      loss_sum += loss * static_cast<double>(nb);
      model.net().backward(ws, dy.data(), &grad, nullptr);

      const double progress =
          (static_cast<double>(epoch) * steps_per_epoch + s) / total_steps;
      lr = 0.5 * config.learning_rate *
           (1.0 + std::cos(std::numbers::pi * progress));
      ++adam.t;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
      for (int l = 0; l < model.net().layers(); ++l) {
        adam_update(model.net().weights(l), grad.weights(l), adam.m.weights(l),
                    adam.v.weights(l), lr, c1, c2);
        adam_update(model.net().biases(l), grad.biases(l), adam.m.biases(l),
                    adam.v.biases(l), lr, c1, c2);
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n_train);
    stats.validation_loss =
        n_val > 0 ? loss_on_range(model, data, targets, n_train, n)
                  : stats.train_loss;
    stats.learning_rate = lr;
    stats.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    if (!std::isfinite(stats.validation_loss)) {
      throw TrainingDiverged("validation loss became non-finite in epoch " +
                             std::to_string(epoch));
    }
    if (stats.validation_loss < best_loss) {
      best_loss = stats.validation_loss;
      best = model.net();
      report.best_epoch = epoch;
    }
    report.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  model.net() = std::move(best);
  report.best_validation_loss = best_loss;
  return report;
}

template TrainReport train<float>(BasicPredictor<float>&, const Dataset&,
                                  const TrainConfig&,
                                  const std::function<void(const EpochStats&)>&);
template TrainReport train<double>(
    BasicPredictor<double>&, const Dataset&, const TrainConfig&,
    const std::function<void(const EpochStats&)>&);
template double evaluate_loss<float>(const BasicPredictor<float>&,
                                     const Dataset&, std::size_t, std::size_t);
template double evaluate_loss<double>(const BasicPredictor<double>&,
                                      const Dataset&, std::size_t,
                                      std::size_t);

// --- model file -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "file IO assumes a little-endian host");

constexpr char kModelMagic[8] = {'T', 'R', 'K', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put(std::ostream& out, const T* v, std::size_t n) {
  out.write(reinterpret_cast<const char*>(v), sizeof(T) * n);
}

class Reader {
 public:
  Reader(std::vector<char> buf, std::string path)
      : buf_(std::move(buf)), path_(std::move(path)) {}
  template <typename T>
  void get(T* out, std::size_t n) {
    const std::size_t bytes = sizeof(T) * n;
    if (offset_ + bytes > buf_.size()) {
      throw ModelFormatError(path_ + ": truncated at byte " +
                             std::to_string(offset_));
    }
    std::memcpy(out, buf_.data() + offset_, bytes);
    offset_ += bytes;
  }
  template <typename T>
  T get() {
    T v;
    get(&v, 1);
    return v;
  }
  bool done() const { return offset_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_model(const Predictor& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kModelMagic, sizeof(kModelMagic));
  const auto& dims = model.net().dims();
  const std::uint32_t header[5] = {
      kModelVersion, static_cast<std::uint32_t>(model.layout()),
      kActivationRelu, model.target_transform(),
      static_cast<std::uint32_t>(dims.size())};
  put(out, header, 5);
  for (int d : dims) {
    const auto u = static_cast<std::uint32_t>(d);
    put(out, &u, 1);
  }
  for (int l = 0; l < model.net().layers(); ++l) {
    put(out, model.net().weights(l).data(), model.net().weights(l).size());
    put(out, model.net().biases(l).data(), model.net().biases(l).size());
  }
  for (const Normalization* n : {&model.input_norm(), &model.output_norm()}) {
    put(out, n->mean.data(), n->mean.size());
    put(out, n->stddev.data(), n->stddev.size());
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

Predictor load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>()),
           path);
  char magic[8];
  r.get(magic, 8);
  if (std::memcmp(magic, kModelMagic, 8) != 0) {
    throw ModelFormatError(path + ": not a model file (bad magic)");
  }
  if (r.get<std::uint32_t>() != kModelVersion) {
    throw ModelFormatError(path + ": unsupported model version");
  }
  const auto layout_tag = r.get<std::uint32_t>();
  if (layout_tag > 1) throw ModelFormatError(path + ": unknown input layout");
  const auto layout = static_cast<InputLayout>(layout_tag);
  if (r.get<std::uint32_t>() != kActivationRelu) {
    throw ModelFormatError(path + ": unknown activation");
  }
  const auto transform = r.get<std::uint32_t>();
  if (transform != kTargetLog1p && transform != kTargetIdentity) {
    throw ModelFormatError(path + ": unknown target transform");
  }
  const auto ndims = r.get<std::uint32_t>();
  if (ndims < 2 || ndims > 64) throw ModelFormatError(path + ": bad dims");
  std::vector<int> dims(ndims);
  for (auto& d : dims) d = static_cast<int>(r.get<std::uint32_t>());
  if (dims.front() != input_dim(layout) || dims.back() != kPerfDim) {
    throw ModelFormatError(path + ": dims do not match the layout");
  }
  std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
  Predictor model(layout, hidden);
  model.set_target_transform(transform);
  for (int l = 0; l < model.net().layers(); ++l) {
    r.get(model.net().weights(l).data(), model.net().weights(l).size());
    r.get(model.net().biases(l).data(), model.net().biases(l).size());
  }
  for (Normalization* n : {&model.input_norm(), &model.output_norm()}) {
    r.get(n->mean.data(), n->mean.size());
    r.get(n->stddev.data(), n->stddev.size());
  }
  if (!r.done()) throw ModelFormatError(path + ": trailing bytes");
  return model;
}

}  // namespace trackopt
