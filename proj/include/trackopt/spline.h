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

// Piecewise-polynomial reference trajectories through keypoints.
//
// Coefficients are stacked segment-major, then axis, then power:
//   index(segment, axis, k) = (3 * segment + axis) * (degree + 1) + k
// and segment i is evaluated in local time (t - t_i). The constraint rows
// fix each segment's endpoints to the keypoints, make velocity, acceleration
// and jerk continuous at interior knots, and put the trajectory at rest
// (zero velocity and acceleration) at both ends. Any displacement V * phi in
// the null space of A keeps all of these satisfied.

#ifndef TRACKOPT_SPLINE_H_
#define TRACKOPT_SPLINE_H_

#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trackopt/controller.h"

namespace trackopt {

inline constexpr int kDefaultDegree = 7;

struct Keypoints {
  std::vector<Eigen::Vector3d> positions;
  std::vector<double> times;  // t_0 = 0, strictly increasing

  std::size_t size() const { return positions.size(); }
  std::size_t segments() const { return positions.size() - 1; }
  // Throws std::invalid_argument on a malformed set.
  void validate() const;
};

struct ConstraintSystem {
  Eigen::MatrixXd matrix;               // A
  Eigen::VectorXd rhs;                  // b
  std::vector<std::string> row_labels;  // e.g. "y vel continuity knot 2"
};

class RankDeficientConstraints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int coefficient_index(int segment, int axis, int power, int degree);

// Stacked system for all three axes. Rows are grouped by axis.
ConstraintSystem build_constraints(const Keypoints& keypoints,
                                   int degree = kDefaultDegree);

// Orthonormal basis of null(A) from an SVD; singular values below
// 1e-10 * sigma_max count as zero. May have zero columns.
Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& a);

// Block-diagonal Hessian Q of the integrated squared snap, so that the
// cost of coefficients s is s^T Q s.
Eigen::MatrixXd snap_hessian(const Keypoints& keypoints,
                             int degree = kDefaultDegree);

// Minimum-snap coefficients subject to A s = b. Throws
// RankDeficientConstraints naming dependent rows when A lacks full row rank.
Eigen::VectorXd solve_minsnap(const ConstraintSystem& system,
                              const Keypoints& keypoints,
                              int degree = kDefaultDegree);

// Monomial derivative row: d^order/dt^order of [1, t, ..., t^degree].
Eigen::RowVectorXd monomial_row(double t, int degree, int order);

// Immutable spline: base coefficients sigma (min-snap), null basis V, and
// null coordinates phi. Variants with other phi share the expensive parts.
class SplineTrajectory {
 public:
  // Min-snap trajectory with phi = 0.
  static SplineTrajectory minsnap(const Keypoints& keypoints,
                                  int degree = kDefaultDegree);

  SplineTrajectory with_null_coordinates(const Eigen::VectorXd& phi) const;

  const Keypoints& keypoints() const { return shared_->keypoints; }
  int degree() const { return shared_->degree; }
  double duration() const { return shared_->keypoints.times.back(); }
  const ConstraintSystem& constraints() const { return shared_->system; }
  const Eigen::MatrixXd& nullspace() const { return shared_->nullspace; }
  const Eigen::VectorXd& base_coefficients() const {
    return shared_->base;
  }
  const Eigen::VectorXd& null_coordinates() const { return phi_; }
  // sigma + V phi
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  int null_dimension() const {
    return static_cast<int>(shared_->nullspace.cols());
  }

  // Segment i with t_i <= t < t_{i+1}; the last segment includes t_end.
  int segment_at(double t) const;

  // Position and derivatives. Outside [0, t_end] the endpoint position is
  // held with zero derivatives.
  FlatReference sample(double t) const;

  // d position(t) / d phi, 3 x null_dimension(); zero outside [0, t_end].
  Eigen::MatrixXd position_jacobian(double t) const;

  // Integrated squared snap of the current coefficients.
  double snap_cost() const;

  // max_i |(A c - b)_i|
  double constraint_residual() const;

 private:
  struct Shared {
    Keypoints keypoints;
    int degree = kDefaultDegree;
    ConstraintSystem system;
    Eigen::MatrixXd nullspace;
    Eigen::MatrixXd hessian;
    Eigen::VectorXd base;
  };

  SplineTrajectory(std::shared_ptr<const Shared> shared, Eigen::VectorXd phi);

  std::shared_ptr<const Shared> shared_;
  Eigen::VectorXd phi_;
  Eigen::VectorXd coefficients_;
};

// Constraint-satisfying random trajectory: phi ~ N(0, scale^2 I).
SplineTrajectory random_polynomial(const Keypoints& keypoints, double scale,
                                   std::mt19937_64& rng,
                                   int degree = kDefaultDegree);

}  // namespace trackopt

#endif  // TRACKOPT_SPLINE_H_
