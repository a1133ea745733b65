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

#include "ioc/batch.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace ioc {
namespace {

LQProblem single_integrator_lq() {
  LQProblem p;
  p.A = Matrix::Constant(1, 1, 1.0);
  p.B = Matrix::Constant(1, 1, 1.0);
  p.state_weights = Vector::Constant(1, 1.0);
  p.control_weights = Vector::Constant(1, 5.0);
  p.x0 = Vector::Constant(1, 10.0);
  p.horizon = 9;
  p.box = ConstraintSet::unbounded(1);
  return p;
}

TEST(BatchEstimateTest, SingleIntegratorMatchesOnline) {
  const LQProblem p = single_integrator_lq();
  const Trajectory traj = solve_unconstrained_lq(p);
  const ProblemModel model = lq_model(p);
  const ParameterNormalization norm;

  const BatchEstimate batch = batch_estimate(model, p.box, norm, traj);
  ASSERT_TRUE(batch.unique);
  EXPECT_NEAR(batch.theta[0], 1.0, 1e-12);
  EXPECT_NEAR(batch.theta[1], 5.0, 1e-8);
  EXPECT_LE(batch.residual, 1e-12);

  const auto online = run(model, p.box, norm, traj, EstimatorOptions{});
  const Vector online_theta = *online.back().theta;
  EXPECT_LE((batch.theta - online_theta).norm() / online_theta.norm(), 1e-8);

  // The initial costate agrees with the backward recursion at the truth.
  const auto lambdas = backward_costates(model, traj, true_theta(p));
  EXPECT_NEAR(batch.lambda0[0], lambdas[0][0], 1e-6);
}

TEST(BatchEstimateTest, ZeroTrajectoryNotUnique) {
  LQProblem p = single_integrator_lq();
  p.x0 = Vector::Zero(1);
  const Trajectory traj = solve_unconstrained_lq(p);
  const ProblemModel model = lq_model(p);
  const BatchEstimate batch =
      batch_estimate(model, p.box, ParameterNormalization{}, traj);
  EXPECT_FALSE(batch.unique);
  EXPECT_DOUBLE_EQ(batch.theta[0], 1.0);  // pinned coefficient survives
}

TEST(BatchEstimateTest, RandomUnconstrainedAgreement) {
  std::mt19937 rng(314);
  testutil::InstanceOptions opts;
  opts.min_samples = 20;
  opts.max_samples = 60;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testutil::random_instance(rng, opts);
    const Trajectory traj = solve_unconstrained_lq(inst.lq);
    const ProblemModel model = lq_model(inst.lq);
    const ParameterNormalization norm;

    const auto online = run(model, inst.lq.box, norm, traj, EstimatorOptions{});
    if (!online.back().unique) continue;
    const BatchEstimate batch = batch_estimate(model, inst.lq.box, norm, traj);
    ASSERT_TRUE(batch.unique) << "trial " << trial;
    const Vector online_theta = *online.back().theta;
    EXPECT_LE((batch.theta - online_theta).norm() / online_theta.norm(), 1e-8)
        << "trial " << trial;
  }
}

TEST(BatchEstimateTest, ConstrainedDataFinalAgreement) {
  std::mt19937 rng(2718);
  testutil::InstanceOptions opts;
  opts.min_samples = 30;
  opts.max_samples = 80;
  opts.with_box = true;
  int compared = 0;
  for (int trial = 0; trial < 12 && compared < 5; ++trial) {
    const auto inst = testutil::random_instance(rng, opts);
    const Trajectory traj = solve_box_constrained_lq(inst.lq);
    if (count_active_steps(inst.lq.box, traj) == 0) continue;
    const ProblemModel model = lq_model(inst.lq);
    const ParameterNormalization norm;
    const auto online = run(model, inst.lq.box, norm, traj, EstimatorOptions{});
    if (!online.back().unique) continue;
    const BatchEstimate batch = batch_estimate(model, inst.lq.box, norm, traj);
    ASSERT_TRUE(batch.unique);
    const Vector online_theta = *online.back().theta;
    EXPECT_LE((batch.theta - online_theta).norm() / online_theta.norm(), 1e-6)
        << "trial " << trial;
    ++compared;
  }
  EXPECT_GT(compared, 0);
}

TEST(BatchSystemTest, ShapeFormulas) {
  std::mt19937 rng(11);
  testutil::InstanceOptions opts;
  opts.min_samples = 5;
  opts.max_samples = 40;
  opts.with_box = true;
  for (int trial = 0; trial < 8; ++trial) {
    const auto inst = testutil::random_instance(rng, opts);
    const Trajectory traj = solve_box_constrained_lq(inst.lq);
    const ProblemModel model = lq_model(inst.lq);
    const BatchSystem sys = describe_batch_system(model, inst.lq.box, traj);

    const long n = model.state_dim;
    const long m = model.control_dim;
    const long N = model.basis_dim;
    const long K = traj.length() - 1;
    long inactive = 0;
    for (int k = 0; k <= K; ++k)
      if (inst.lq.box.is_interior(traj.controls[k])) ++inactive;

    EXPECT_EQ(sys.rows, n * (K + 1) + m * inactive);
    EXPECT_EQ(sys.decision_variables, N + n * (K + 2));
    EXPECT_EQ(sys.reduced_dimension, (N - 1) + n * (K + 1));
    EXPECT_EQ(sys.inactive_steps, inactive);

    const BatchEstimate est =
        batch_estimate(model, inst.lq.box, ParameterNormalization{}, traj);
    EXPECT_EQ(est.variable_count, sys.decision_variables);
    EXPECT_EQ(est.row_count, sys.rows);
  }
}

TEST(BatchEstimateTest, SingularJacobianRaises) {
  ProblemModel model = testutil::nonlinear_test_model();
  model.dynamics_jac_x = [](int k, const Vector&, const Vector&) {
    if (k == 2) return Matrix::Zero(2, 2).eval();
    return Matrix::Identity(2, 2).eval();
  };
  Trajectory traj;
  for (int k = 0; k < 5; ++k) {
    traj.states.push_back(Vector::Constant(2, 0.3));
    traj.controls.push_back(Vector::Constant(2, 0.1));
  }
  EXPECT_THROW(batch_estimate(model, ConstraintSet::unbounded(2),
                              ParameterNormalization{}, traj),
               AssumptionViolated);
}

TEST(BatchEstimateTest, PinnedIndexVariant) {
  const LQProblem p = single_integrator_lq();
  const Trajectory traj = solve_unconstrained_lq(p);
  const ProblemModel model = lq_model(p);
  const BatchEstimate batch =
      batch_estimate(model, p.box, ParameterNormalization{5.0, 1}, traj);
  ASSERT_TRUE(batch.unique);
  EXPECT_DOUBLE_EQ(batch.theta[1], 5.0);
  EXPECT_NEAR(batch.theta[0], 1.0, 1e-8);
}

TEST(TimingComparison, SmallestCaseRunsAndAgrees) {
  LQProblem p = single_integrator_lq();
  const std::vector<TimingRow> rows =
      timing_comparison(p, ParameterNormalization{}, {2, 10});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].horizon_samples, 2);
  EXPECT_EQ(rows[0].online_state_elements, rows[1].online_state_elements);
  // N + n(K+2) with K = samples - 1.
  EXPECT_EQ(rows[0].batch_variable_count, 2 + 1 * (1 + 2));
  EXPECT_EQ(rows[1].batch_variable_count, 2 + 1 * (9 + 2));
  EXPECT_GT(rows[0].online_total_s, 0.0);
  EXPECT_GT(rows[0].batch_s, 0.0);
}

}  // namespace
}  // namespace ioc
