// Copyright 2026 The ioc Authors
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

#include "ioc/model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace ioc {
namespace {

Matrix pitch_A() {
  Matrix A(3, 3);
  A << 0.9654, 5.4572, 0.0, -0.0013, 0.9545, 0.0, -0.0038, 5.5437, 1.0;
  return A;
}

Matrix pitch_B() {
  Matrix B(3, 2);
  B << 0.0284, 0.0142, 0.0020, 0.0010, 0.0056, 0.0028;
  return B;
}

TEST(QuadraticBasis, GradientsMatchHandValues) {
  const BasisSpec basis = make_quadratic_basis(1, 1);
  ASSERT_EQ(basis.dim, 2);
  const Vector x = Vector::Constant(1, 10.0);
  const Vector u = Vector::Constant(1, -3.58);

  const Matrix Lu = basis.jac_u(0, x, u);
  ASSERT_EQ(Lu.rows(), 1);
  ASSERT_EQ(Lu.cols(), 2);
  EXPECT_DOUBLE_EQ(Lu(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(Lu(0, 1), -7.16);

  const Matrix Lx = basis.jac_x(0, x, u);
  EXPECT_DOUBLE_EQ(Lx(0, 0), 20.0);
  EXPECT_DOUBLE_EQ(Lx(0, 1), 0.0);

  const Vector L = basis.value(0, x, u);
  EXPECT_DOUBLE_EQ(L[0], 100.0);
  EXPECT_DOUBLE_EQ(L[1], -3.58 * -3.58);
}

TEST(QuadraticBasis, PitchDimensions) {
  const BasisSpec basis = make_quadratic_basis(3, 2);
  EXPECT_EQ(basis.dim, 5);
  const Vector x = (Vector(3) << 0.5, 0.0, 0.2).finished();
  const Vector u = (Vector(2) << 0.01, -0.02).finished();
  EXPECT_EQ(basis.jac_x(0, x, u).rows(), 3);
  EXPECT_EQ(basis.jac_x(0, x, u).cols(), 5);
  EXPECT_EQ(basis.jac_u(0, x, u).rows(), 2);
  EXPECT_EQ(basis.jac_u(0, x, u).cols(), 5);
}

TEST(QuadraticBasis, ZeroPoint) {
  const BasisSpec basis = make_quadratic_basis(2, 2);
  const Vector z = Vector::Zero(2);
  EXPECT_EQ(basis.jac_x(0, z, z).norm(), 0.0);
  EXPECT_EQ(basis.jac_u(0, z, z).norm(), 0.0);
}

TEST(LtiModel, SingleIntegrator) {
  const ProblemModel model = make_lti_model(
      Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0),
      make_quadratic_basis(1, 1));
  EXPECT_EQ(model.state_dim, 1);
  EXPECT_EQ(model.control_dim, 1);
  EXPECT_EQ(model.basis_dim, 2);
  const Vector x = Vector::Constant(1, 10.0);
  const Vector u = Vector::Constant(1, -3.58);
  EXPECT_DOUBLE_EQ(model.dynamics_at(0, x, u)[0], 6.42);
  EXPECT_DOUBLE_EQ(model.dynamics_jac_x_at(0, x, u)(0, 0), 1.0);
}

TEST(LtiModel, PitchJacobianConvention) {
  const ProblemModel model =
      make_lti_model(pitch_A(), pitch_B(), make_quadratic_basis(3, 2));
  const Vector x = Vector::Zero(3);
  const Vector u = Vector::Zero(2);
  // Column-gradient layout: stored state Jacobian is A', control Jacobian B'.
  EXPECT_TRUE(model.dynamics_jac_x_at(0, x, u).isApprox(pitch_A().transpose()));
  EXPECT_TRUE(model.dynamics_jac_u_at(0, x, u).isApprox(pitch_B().transpose()));
}

TEST(LtiModel, IdentityCase) {
  const ProblemModel model = make_lti_model(
      Matrix::Identity(2, 2), Matrix::Identity(2, 2), make_quadratic_basis(2, 2));
  const Vector z = Vector::Zero(2);
  EXPECT_TRUE(model.dynamics_jac_x_at(0, z, z).isIdentity(1e-15));
}

TEST(LtiModel, SingularTransitionMatrixRejected) {
  Matrix A(2, 2);
  A << 1.0, 2.0, 2.0, 4.0;
  EXPECT_THROW(make_lti_model(A, Matrix::Identity(2, 2), make_quadratic_basis(2, 2)),
               AssumptionViolated);
}

TEST(LtiModel, JacobianShapesCompose) {
  const ProblemModel model =
      make_lti_model(pitch_A(), pitch_B(), make_quadratic_basis(3, 2));
  const Vector x = (Vector(3) << 0.1, -0.2, 0.3).finished();
  const Vector u = (Vector(2) << 0.05, -0.01).finished();
  EXPECT_EQ(model.dynamics_jac_x_at(0, x, u).rows(), 3);
  EXPECT_EQ(model.dynamics_jac_x_at(0, x, u).cols(), 3);
  EXPECT_EQ(model.dynamics_jac_u_at(0, x, u).rows(), 2);
  EXPECT_EQ(model.dynamics_jac_u_at(0, x, u).cols(), 3);
  EXPECT_EQ(model.basis_jac_x_at(0, x, u).rows(), 3);
  EXPECT_EQ(model.basis_jac_x_at(0, x, u).cols(), 5);
  EXPECT_EQ(model.basis_jac_u_at(0, x, u).rows(), 2);
  EXPECT_EQ(model.basis_jac_u_at(0, x, u).cols(), 5);
}

TEST(ConstraintSet, InteriorExamples) {
  const ConstraintSet square = ConstraintSet::symmetric_box(2, 0.09);
  EXPECT_FALSE(square.is_interior((Vector(2) << 0.09, 0.01).finished()));
  EXPECT_TRUE(square.is_interior((Vector(2) << 0.05, 0.01).finished()));

  const ConstraintSet unit = ConstraintSet::symmetric_box(1, 1.0);
  EXPECT_TRUE(unit.is_interior(Vector::Zero(1)));

  // Within the activity tolerance of the boundary counts as active.
  const ConstraintSet narrow = ConstraintSet::symmetric_box(1, 0.09);
  EXPECT_FALSE(narrow.is_interior(Vector::Constant(1, 0.09 - 1e-12)));
  EXPECT_TRUE(narrow.is_interior(Vector::Constant(1, 0.09 - 1e-6)));
}

TEST(ConstraintSet, DimensionMismatchRejected) {
  const ConstraintSet box = ConstraintSet::symmetric_box(2, 1.0);
  EXPECT_THROW(box.is_interior(Vector::Zero(3)), std::invalid_argument);
}

TEST(ConstraintSet, EmptyInteriorRejected) {
  EXPECT_THROW(
      ConstraintSet::box(Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)),
      std::invalid_argument);
}

TEST(ConstraintSet, MonotoneUnderEnlargement) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector lo(2), hi(2), grow(2), u(2);
    for (int i = 0; i < 2; ++i) {
      const double b1 = dist(rng), b2 = dist(rng);
      lo[i] = std::min(b1, b2) - 1e-3;
      hi[i] = std::max(b1, b2) + 1e-3;
      grow[i] = std::abs(dist(rng));
      u[i] = dist(rng);
    }
    const ConstraintSet inner = ConstraintSet::box(lo, hi, 1e-9);
    const ConstraintSet outer = ConstraintSet::box(lo - grow, hi + grow, 1e-9);
    if (inner.is_interior(u)) EXPECT_TRUE(outer.is_interior(u));
  }
}

TEST(ConstraintSet, UnboundedContainsEverything) {
  const ConstraintSet cs = ConstraintSet::unbounded(2);
  EXPECT_TRUE(cs.is_interior(Vector::Constant(2, 1e12)));
  EXPECT_FALSE(cs.bounded());
}

TEST(JacobianCheck, LtiModelsMatchFiniteDifferences) {
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testutil::random_instance(rng);
    const ProblemModel model = lq_model(inst.lq);
    for (int point = 0; point < 10; ++point) {
      Vector x(model.state_dim), u(model.control_dim);
      for (int i = 0; i < model.state_dim; ++i) x[i] = 3.0 * gauss(rng);
      for (int i = 0; i < model.control_dim; ++i) u[i] = 3.0 * gauss(rng);
      const JacobianCheck check = check_jacobians(model, point, x, u);
      EXPECT_LT(check.max_error(), 1e-5)
          << "trial " << trial << " point " << point;
    }
  }
}

TEST(JacobianCheck, NonlinearClosuresMatchFiniteDifferences) {
  const ProblemModel model = testutil::nonlinear_test_model();
  std::mt19937 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int point = 0; point < 100; ++point) {
    Vector x(2), u(2);
    for (int i = 0; i < 2; ++i) {
      x[i] = 2.0 * gauss(rng);
      u[i] = 2.0 * gauss(rng);
    }
    const JacobianCheck check = check_jacobians(model, point, x, u);
    EXPECT_LT(check.max_error(), 1e-5) << "point " << point;
  }
}

TEST(ModelEval, WrongShapeFromCallableIsReported) {
  ProblemModel model = testutil::nonlinear_test_model();
  model.basis_jac_u = [](int, const Vector&, const Vector&) {
    return Matrix::Zero(3, 2);  // transposed shape
  };
  EXPECT_THROW(model.basis_jac_u_at(0, Vector::Zero(2), Vector::Zero(2)),
               std::invalid_argument);
}

TEST(TrajectoryType, ValidationAndConsistency) {
  const ProblemModel model = make_lti_model(
      Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0),
      make_quadratic_basis(1, 1));
  Trajectory traj;
  traj.states = {Vector::Constant(1, 1.0), Vector::Constant(1, 1.5)};
  traj.controls = {Vector::Constant(1, 0.5), Vector::Zero(1)};
  EXPECT_NO_THROW(traj.validate());
  EXPECT_TRUE(is_dynamics_consistent(model, traj));

  traj.states[1][0] += 1e-3;
  EXPECT_FALSE(is_dynamics_consistent(model, traj));

  Trajectory broken;
  broken.states = {Vector::Zero(1)};
  EXPECT_THROW(broken.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ioc
