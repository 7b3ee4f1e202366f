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

#include "trackopt/spline.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace trackopt {
namespace {

constexpr double kRankTolerance = 1e-10;
constexpr const char* kAxisNames[3] = {"x", "y", "z"};
constexpr const char* kOrderNames[4] = {"pos", "vel", "acc", "jerk"};

// d^order/dt^order t^k = k!/(k-order)! t^(k-order)
double falling_factorial(int k, int order) {
  double f = 1.0;
  for (int i = 0; i < order; ++i) f *= static_cast<double>(k - i);
  return f;
}

struct AxisSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  std::vector<std::string> labels;
};

// Per-axis system over the local columns segment * (degree + 1) + k.
AxisSystem axis_system(const Keypoints& kp, int degree, int axis) {
  const int ns = static_cast<int>(kp.segments());
  const int nc = degree + 1;
  const int rows = 2 * ns + 3 * (ns - 1) + 4;
  AxisSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(rows, ns * nc);
  sys.rhs = Eigen::VectorXd::Zero(rows);
  const std::string name = kAxisNames[axis];
  int row = 0;
  auto put = [&](int segment, double tau, int order, double sign) {
    sys.matrix.block(row, segment * nc, 1, nc) +=
        sign * monomial_row(tau, degree, order);
  };
  for (int i = 0; i < ns; ++i) {
    const double duration = kp.times[i + 1] - kp.times[i];
    put(i, 0.0, 0, 1.0);
    sys.rhs[row] = kp.positions[i][axis];
    sys.labels.push_back(name + " pos start seg " + std::to_string(i));
    ++row;
    put(i, duration, 0, 1.0);
    sys.rhs[row] = kp.positions[i + 1][axis];
    sys.labels.push_back(name + " pos end seg " + std::to_string(i));
    ++row;
  }
  for (int knot = 1; knot < ns; ++knot) {
    const double left = kp.times[knot] - kp.times[knot - 1];
    for (int order = 1; order <= 3; ++order) {
      put(knot - 1, left, order, 1.0);
      put(knot, 0.0, order, -1.0);
      sys.labels.push_back(name + " " + kOrderNames[order] +
                           " continuity knot " + std::to_string(knot));
      ++row;
    }
  }
  const double last = kp.times[ns] - kp.times[ns - 1];
  for (int order = 1; order <= 2; ++order) {
    put(0, 0.0, order, 1.0);
    sys.labels.push_back(name + " " + kOrderNames[order] + " start");
    ++row;
    put(ns - 1, last, order, 1.0);
    sys.labels.push_back(name + " " + kOrderNames[order] + " end");
    ++row;
  }
  return sys;
}

Eigen::MatrixXd segment_snap_hessian(double duration, int degree) {
  const int nc = degree + 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nc, nc);
  for (int j = 4; j <= degree; ++j) {
    for (int k = 4; k <= degree; ++k) {
      const int p = j + k - 7;
      q(j, k) = falling_factorial(j, 4) * falling_factorial(k, 4) *
                std::pow(duration, p) / p;
    }
  }
  return q;
}

// SVD-based min-norm particular solution and null basis of A x = b.
struct Factored {
  Eigen::MatrixXd basis;
  Eigen::VectorXd particular;
  int rank = 0;
};

Factored factor(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Factored f;
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) {
    f.basis = Eigen::MatrixXd::Identity(n, n);
    f.particular = Eigen::VectorXd::Zero(n);
    return f;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU |
                                            Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() ? kRankTolerance * s[0] : 0.0;
  int rank = 0;
  while (rank < s.size() && s[rank] > cutoff) ++rank;
  f.rank = rank;
  f.basis = svd.matrixV().rightCols(n - rank);
  f.particular = svd.matrixV().leftCols(rank) *
                 (svd.matrixU().leftCols(rank).transpose() * b)
                     .cwiseQuotient(s.head(rank));
  return f;
}

// Rows of A that are linear combinations of others.
std::vector<int> dependent_rows(const Eigen::MatrixXd& a) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
  qr.setThreshold(kRankTolerance);
  const auto perm = qr.colsPermutation().indices();
  std::vector<int> out;
  for (Eigen::Index i = qr.rank(); i < perm.size(); ++i) {
    out.push_back(perm[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void require_full_rank(const Eigen::MatrixXd& a, int rank,
                       const std::vector<std::string>& labels) {
  if (rank == a.rows()) return;
  std::string msg = "constraint matrix is rank deficient (rank " +
                    std::to_string(rank) + " of " + std::to_string(a.rows()) +
                    "); dependent rows:";
  for (int r : dependent_rows(a)) {
    msg += " [" + std::to_string(r) + "] " +
           (r < static_cast<int>(labels.size()) ? labels[r] : "?") + ";";
  }
  throw RankDeficientConstraints(msg);
}

Eigen::VectorXd minimize_on_affine_set(const Factored& f,
                                       const Eigen::MatrixXd& hessian) {
  if (f.basis.cols() == 0) return f.particular;
  const Eigen::MatrixXd qv = hessian * f.basis;
  const Eigen::MatrixXd reduced = f.basis.transpose() * qv;
  const Eigen::VectorXd rhs = -(qv.transpose() * f.particular);
  const Eigen::VectorXd z = reduced.ldlt().solve(rhs);
  return f.particular + f.basis * z;
}

}  // namespace

void Keypoints::validate() const {
  if (positions.size() < 2) {
    throw std::invalid_argument("need at least two keypoints");
  }
  if (times.size() != positions.size()) {
    throw std::invalid_argument("keypoint positions and times differ in count");
  }
  if (times.front() != 0.0) throw std::invalid_argument("t_0 must be 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("keypoint times must strictly increase (" +
                                  std::to_string(i) + ")");
    }
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) throw std::invalid_argument("non-finite keypoint");
  }
}

int coefficient_index(int segment, int axis, int power, int degree) {
  return (3 * segment + axis) * (degree + 1) + power;
}

Eigen::RowVectorXd monomial_row(double t, int degree, int order) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(degree + 1);
  for (int k = order; k <= degree; ++k) {
    row[k] = falling_factorial(k, order) * std::pow(t, k - order);
  }
  return row;
}

ConstraintSystem build_constraints(const Keypoints& keypoints, int degree) {
  keypoints.validate();
  if (degree < 7) throw std::invalid_argument("degree must be >= 7");
  const int ns = static_cast<int>(keypoints.segments());
  const int nc = degree + 1;
  ConstraintSystem out;
  std::vector<AxisSystem> axes;
  Eigen::Index rows = 0;
  for (int a = 0; a < 3; ++a) {
    axes.push_back(axis_system(keypoints, degree, a));
    rows += axes.back().matrix.rows();
  }
  out.matrix = Eigen::MatrixXd::Zero(rows, 3 * ns * nc);
  out.rhs = Eigen::VectorXd::Zero(rows);
  Eigen::Index row = 0;
  for (int a = 0; a < 3; ++a) {
    const AxisSystem& s = axes[a];
    for (int seg = 0; seg < ns; ++seg) {
      out.matrix.block(row, coefficient_index(seg, a, 0, degree), s.matrix.rows(),
                       nc) = s.matrix.middleCols(seg * nc, nc);
    }
    out.rhs.segment(row, s.rhs.size()) = s.rhs;
    out.row_labels.insert(out.row_labels.end(), s.labels.begin(),
                          s.labels.end());
    row += s.matrix.rows();
  }
  return out;
}

Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& a) {
  return factor(a, Eigen::VectorXd::Zero(a.rows())).basis;
}

Eigen::MatrixXd snap_hessian(const Keypoints& keypoints, int degree) {
  keypoints.validate();
  const int ns = static_cast<int>(keypoints.segments());
  const int nc = degree + 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3 * ns * nc, 3 * ns * nc);
  for (int seg = 0; seg < ns; ++seg) {
    const Eigen::MatrixXd block = segment_snap_hessian(
        keypoints.times[seg + 1] - keypoints.times[seg], degree);
    for (int a = 0; a < 3; ++a) {
      const int c = coefficient_index(seg, a, 0, degree);
      q.block(c, c, nc, nc) = block;
    }
  }
  return q;
}

Eigen::VectorXd solve_minsnap(const ConstraintSystem& system,
                              const Keypoints& keypoints, int degree) {
  const Factored f = factor(system.matrix, system.rhs);
  require_full_rank(system.matrix, f.rank, system.row_labels);
  return minimize_on_affine_set(f, snap_hessian(keypoints, degree));
}

SplineTrajectory::SplineTrajectory(std::shared_ptr<const Shared> shared,
                                   Eigen::VectorXd phi)
    : shared_(std::move(shared)), phi_(std::move(phi)) {
  coefficients_ = shared_->base + shared_->nullspace * phi_;
}

SplineTrajectory SplineTrajectory::minsnap(const Keypoints& keypoints,
                                           int degree) {
  auto shared = std::make_shared<Shared>();
  shared->keypoints = keypoints;
  shared->degree = degree;
  shared->system = build_constraints(keypoints, degree);
  shared->hessian = snap_hessian(keypoints, degree);

  // A is block diagonal over axes with identical blocks (same knot times),
  // so the stacked null space is the per-axis one embedded three times.
  const int ns = static_cast<int>(keypoints.segments());
  const int nc = degree + 1;
  const Eigen::Index n = 3 * ns * nc;
  std::vector<Eigen::MatrixXd> axis_basis(3);
  shared->base = Eigen::VectorXd::Zero(n);
  Eigen::Index null_cols = 0;
  for (int a = 0; a < 3; ++a) {
    const AxisSystem sys = axis_system(keypoints, degree, a);
    const Factored f = factor(sys.matrix, sys.rhs);
    require_full_rank(sys.matrix, f.rank, sys.labels);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(ns * nc, ns * nc);
    for (int seg = 0; seg < ns; ++seg) {
      hess.block(seg * nc, seg * nc, nc, nc) = segment_snap_hessian(
          keypoints.times[seg + 1] - keypoints.times[seg], degree);
    }
    const Eigen::VectorXd local = minimize_on_affine_set(f, hess);
    for (int seg = 0; seg < ns; ++seg) {
      shared->base.segment(coefficient_index(seg, a, 0, degree), nc) =
          local.segment(seg * nc, nc);
    }
    axis_basis[a] = f.basis;
    null_cols += f.basis.cols();
  }
  shared->nullspace = Eigen::MatrixXd::Zero(n, null_cols);
  Eigen::Index col = 0;
  for (int a = 0; a < 3; ++a) {
    const Eigen::MatrixXd& basis = axis_basis[a];
    for (int seg = 0; seg < ns; ++seg) {
      shared->nullspace.block(coefficient_index(seg, a, 0, degree), col, nc,
                              basis.cols()) = basis.middleRows(seg * nc, nc);
    }
    col += basis.cols();
  }
  const Eigen::Index dim = shared->nullspace.cols();
  return SplineTrajectory(std::move(shared), Eigen::VectorXd::Zero(dim));
}

SplineTrajectory SplineTrajectory::with_null_coordinates(
    const Eigen::VectorXd& phi) const {
  if (phi.size() != null_dimension()) {
    throw std::invalid_argument("null coordinate dimension mismatch");
  }
  return SplineTrajectory(shared_, phi);
}

int SplineTrajectory::segment_at(double t) const {
  const auto& times = shared_->keypoints.times;
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const int idx = static_cast<int>(it - times.begin()) - 1;
  return std::clamp(idx, 0, static_cast<int>(times.size()) - 2);
}

FlatReference SplineTrajectory::sample(double t) const {
  FlatReference out;
  const auto& kp = shared_->keypoints;
  if (t <= 0.0 || t >= duration()) {
    out.position = t <= 0.0 ? kp.positions.front() : kp.positions.back();
    if (t != 0.0 && t != duration()) return out;
  }
  const int seg = segment_at(t);
  const double tau = t - kp.times[seg];
  const int d = shared_->degree;
  for (int a = 0; a < 3; ++a) {
    const double* c =
        coefficients_.data() + coefficient_index(seg, a, 0, d);
    double p = 0.0, v = 0.0, acc = 0.0, j = 0.0;
    // Horner for p and its Taylor terms p', p''/2, p'''/6.
    for (int k = d; k >= 0; --k) {
      j = j * tau + acc;
      acc = acc * tau + v;
      v = v * tau + p;
      p = p * tau + c[k];
    }
    out.position[a] = p;
    out.velocity[a] = v;
    out.acceleration[a] = 2.0 * acc;
    out.jerk[a] = 6.0 * j;
  }
  return out;
}

Eigen::MatrixXd SplineTrajectory::position_jacobian(double t) const {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, null_dimension());
  if (t < 0.0 || t > duration()) return jac;
  const int seg = segment_at(t);
  const int d = shared_->degree;
  const Eigen::RowVectorXd alpha =
      monomial_row(t - shared_->keypoints.times[seg], d, 0);
  for (int a = 0; a < 3; ++a) {
    jac.row(a) = alpha * shared_->nullspace.middleRows(
                             coefficient_index(seg, a, 0, d), d + 1);
  }
  return jac;
}

double SplineTrajectory::snap_cost() const {
  return coefficients_.dot(shared_->hessian * coefficients_);
}

double SplineTrajectory::constraint_residual() const {
  return (shared_->system.matrix * coefficients_ - shared_->system.rhs)
      .cwiseAbs()
      .maxCoeff();
}

SplineTrajectory random_polynomial(const Keypoints& keypoints, double scale,
                                   std::mt19937_64& rng, int degree) {
  const SplineTrajectory base = SplineTrajectory::minsnap(keypoints, degree);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd phi(base.null_dimension());
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = scale * normal(rng);
  return base.with_null_coordinates(phi);
}

}  // namespace trackopt
