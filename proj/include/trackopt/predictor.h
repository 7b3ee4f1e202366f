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

// Learned performance model: input encoding, a ReLU MLP with hand-written
// forward and backward passes, training, and the model file.
//
// Full input layout (81):
//   [0, 8)    gains
//   [8, 18)   v (3), q (4, w >= 0), omega (3)
//   [18, 81)  21 reference positions at steps n, n+5, ..., n+100, minus p_n
// The no-lookahead layout (21) replaces the last block with e_p = p_n - p_d.
//
// Targets are trained as log1p(c), then standardized.

#ifndef TRACKOPT_PREDICTOR_H_
#define TRACKOPT_PREDICTOR_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trackopt/controller.h"
#include "trackopt/dataset.h"
#include "trackopt/metrics.h"
#include "trackopt/reference.h"

namespace trackopt {

enum class InputLayout : std::uint32_t { kFull = 0, kNoTraj = 1 };

inline constexpr int kGainOffset = 0;
inline constexpr int kObsOffset = kNumGains;
inline constexpr int kObsDim = 10;
inline constexpr int kTrajOffset = kObsOffset + kObsDim;
inline constexpr int kFullInputDim = kTrajOffset + 3 * kCoarseSamples;
inline constexpr int kNoTrajInputDim = kTrajOffset + 3;

int input_dim(InputLayout layout);
const char* layout_name(InputLayout layout);
InputLayout parse_layout(const std::string& name);  // "full" | "no-traj"

// Writes input_dim(layout) values. The reference window starts at `step`.
void encode(InputLayout layout, const Gains& gains, const QuadState& state,
            const SampledTrajectory& traj, long step, double* out);
std::vector<double> encode(InputLayout layout, const Gains& gains,
                           const QuadState& state,
                           const SampledTrajectory& traj, long step);

// Overwrites the gain slice of an encoded input.
void set_gains(const Gains& gains, double* encoded);

template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;
  // dims = {input, hidden..., output}; hidden layers use ReLU.
  explicit Mlp(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int layers() const { return static_cast<int>(dims_.size()) - 1; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  // Layer l maps dims[l] -> dims[l+1]; weights are row-major
  // dims[l+1] x dims[l].
  std::vector<Scalar>& weights(int l) { return weights_[l]; }
  const std::vector<Scalar>& weights(int l) const { return weights_[l]; }
  std::vector<Scalar>& biases(int l) { return biases_[l]; }
  const std::vector<Scalar>& biases(int l) const { return biases_[l]; }
  std::size_t parameter_count() const;

  void init_he(std::mt19937_64& rng);
  void set_zero();

  struct Workspace {
    int batch = 0;
    std::vector<std::vector<Scalar>> act;  // act[0] input, act[l+1] layer l
  };

  // x is batch x input_dim, row-major. Returns batch x output_dim inside ws.
  const Scalar* forward(const Scalar* x, int batch, Workspace& ws) const;

  // Backpropagates dL/dy (batch x output_dim) through the pass stored in
  // ws. Writes parameter gradients into *grad (same dims) and dL/dx into
  // dx (batch x input_dim); either may be null.
  void backward(Workspace& ws, const Scalar* dy, Mlp* grad,
                Scalar* dx) const;

  template <typename Other>
  Mlp<Other> cast() const;

 private:
  template <typename>
  friend class Mlp;

  std::vector<int> dims_;
  std::vector<std::vector<Scalar>> weights_;
  std::vector<std::vector<Scalar>> biases_;
};

struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;  // entries >= kMinStd

  static constexpr double kMinStd = 1e-8;
  // Column statistics of a row-major table.
  static Normalization fit(const float* rows, std::size_t count, int dim,
                           std::span<const std::size_t> indices);
};

// Interface used by the gain search and trajectory adaptation.
class CostModel {
 public:
  virtual ~CostModel() = default;
  virtual InputLayout layout() const = 0;
  int input_size() const { return input_dim(layout()); }
  // x: batch x input_size() raw encoded inputs; c: batch x kPerfDim.
  // Throws std::invalid_argument on non-finite input.
  virtual void predict(const double* x, int batch, double* c) const = 0;
  // Returns w^T c_hat(x) and writes its gradient w.r.t. the raw input.
  virtual double cost_gradient(const double* x, const CostWeights& w,
                               double* grad) const = 0;
};

inline constexpr std::uint32_t kActivationRelu = 0;
inline constexpr std::uint32_t kTargetLog1p = 1;
inline constexpr std::uint32_t kTargetIdentity = 0;

template <typename Scalar>
class BasicPredictor : public CostModel {
 public:
  BasicPredictor() = default;
  BasicPredictor(InputLayout layout, const std::vector<int>& hidden);

  InputLayout layout() const override { return layout_; }
  void predict(const double* x, int batch, double* c) const override;
  double cost_gradient(const double* x, const CostWeights& w,
                       double* grad) const override;

  Mlp<Scalar>& net() { return net_; }
  const Mlp<Scalar>& net() const { return net_; }
  Normalization& input_norm() { return input_norm_; }
  const Normalization& input_norm() const { return input_norm_; }
  Normalization& output_norm() { return output_norm_; }
  const Normalization& output_norm() const { return output_norm_; }
  std::uint32_t target_transform() const { return target_transform_; }
  void set_target_transform(std::uint32_t t) { target_transform_ = t; }

  // c -> standardized training target, and back.
  double to_target(int k, double c) const;
  double from_target(int k, double z) const;
  // Input scaling used before the first layer.
  void normalize_input(const double* raw, Scalar* out) const;
  void normalize_input(const float* raw, Scalar* out) const;

  template <typename Other>
  BasicPredictor<Other> cast() const;

 private:
  template <typename>
  friend class BasicPredictor;

  InputLayout layout_ = InputLayout::kFull;
  Mlp<Scalar> net_;
  Normalization input_norm_;
  Normalization output_norm_;
  std::uint32_t target_transform_ = kTargetLog1p;
};

using Predictor = BasicPredictor<float>;

std::vector<int> default_hidden_layers();  // {512, 512, 256, 256}

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  // Small batches and few epochs: with ~200k records larger batches train
  // far slower per second, and validation loss stops improving near 20.
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 512;
  double validation_fraction = 0.1;
  std::vector<int> hidden = default_hidden_layers();

  static TrainConfig load(const std::string& path);  // key = value
  std::string to_string() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> curve;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
};

// Records [0, training_count) train; the rest validate.
std::size_t training_count(const TrainConfig& config, std::size_t n);

// Validation is the trailing fraction of the records, so the split is a
// pure function of the dataset order. The model's layout must match the
// dataset input dim. Returns best-on-validation weights in `model`.
template <typename Scalar>
TrainReport train(BasicPredictor<Scalar>& model, const Dataset& data,
                  const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

// Mean squared error on standardized targets over records [begin, end).
template <typename Scalar>
double evaluate_loss(const BasicPredictor<Scalar>& model, const Dataset& data,
                     std::size_t begin, std::size_t end);

// Binary model file:
//   char[8] "TRKMODEL", u32 version 1, u32 layout, u32 activation,
//   u32 target transform, u32 number of dims, u32 dims[],
//   per layer float32 weights then float32 biases,
//   float64 input mean/std, float64 output mean/std.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
void save_model(const Predictor& model, const std::string& path);
Predictor load_model(const std::string& path);

}  // namespace trackopt

#endif  // TRACKOPT_PREDICTOR_H_
