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

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ioc/estimator.hpp"
#include "ioc/forward.hpp"
#include "ioc/log.hpp"
#include "ioc/model.hpp"
#include "ioc/types.hpp"

namespace ioc {

// Offline baseline: solve the stacked least-squares system whose unknowns are
// the parameter vector together with the whole costate trajectory, the way
// batch methods do. Its decision vector grows linearly with the trajectory
// and its solve cost cubically: the costs the online recursion avoids.

/// Shape of the stacked system for a given trajectory. Unknowns are
/// (theta, lambda_0..lambda_{K+1}); rows are the costate equations at every
/// step plus the stationarity equations at interior-control steps. The
/// terminal costate and the pinned coefficient are eliminated before the
/// solve, which is what reduced_dimension counts.
struct BatchSystem {
  long rows = 0;                // n(K+1) + m * inactive_steps
  long decision_variables = 0;  // N + n(K+2)
  long reduced_dimension = 0;   // (N-1) + n(K+1)
  int inactive_steps = 0;
  int horizon = 0;  // K
};

inline BatchSystem describe_batch_system(const ProblemModel& model,
                                         const ConstraintSet& cs,
                                         const Trajectory& traj) {
  traj.validate();
  const long n = model.state_dim;
  const long m = model.control_dim;
  const long N = model.basis_dim;
  const long K = traj.length() - 1;
  BatchSystem sys;
  sys.horizon = static_cast<int>(K);
  for (int k = 0; k <= K; ++k)
    if (cs.is_interior(traj.controls[k])) ++sys.inactive_steps;
  sys.rows = n * (K + 1) + m * sys.inactive_steps;
  sys.decision_variables = N + n * (K + 2);
  sys.reduced_dimension = (N - 1) + n * (K + 1);
  return sys;
}

namespace detail {

// One block row of the reduced stacked system: parts are (global column
// offset, coefficient matrix) with a shared row count, rhs the moved pinned
// column. Streaming the blocks avoids materializing the system.
struct BatchBlock {
  std::vector<std::pair<long, Matrix>> parts;
  Vector rhs;
};

template <typename Visitor>
void visit_batch_blocks(const ProblemModel& model, const ConstraintSet& cs,
                        const Trajectory& traj,
                        const ParameterNormalization& norm, Visitor&& visit) {
  const int n = model.state_dim;
  const int N = model.basis_dim;
  const int K = traj.length() - 1;
  const int pin = norm.fixed_index;
  const double a = norm.fixed_value;
  const long lambda_base = N - 1;

  const auto drop_pinned_column = [&](const Matrix& full) {
    Matrix reduced(full.rows(), N - 1);
    reduced.leftCols(pin) = full.leftCols(pin);
    reduced.rightCols(N - 1 - pin) = full.rightCols(N - 1 - pin);
    return reduced;
  };

  for (int k = 0; k <= K; ++k) {
    const Vector& x = traj.states[k];
    const Vector& u = traj.controls[k];
    const Matrix Lx = model.basis_jac_x_at(k, x, u);
    const Matrix fx = model.dynamics_jac_x_at(k, x, u);
    if (!fx.allFinite())
      throw AssumptionViolated("dynamics state Jacobian is not finite at step " +
                               std::to_string(k));
    if (!(Eigen::PartialPivLU<Matrix>(fx).rcond() > 1e-12))
      throw AssumptionViolated("dynamics state Jacobian is singular at step " +
                               std::to_string(k));

    BatchBlock costate;
    const Matrix theta_coeff = -Lx;
    costate.parts.emplace_back(0, drop_pinned_column(theta_coeff));
    costate.parts.emplace_back(lambda_base + static_cast<long>(k) * n,
                               Matrix::Identity(n, n));
    if (k < K)
      costate.parts.emplace_back(lambda_base + static_cast<long>(k + 1) * n,
                                 Matrix(-fx));
    costate.rhs = -a * theta_coeff.col(pin);
    visit(costate);

    if (cs.is_interior(u)) {
      const Matrix Lu = model.basis_jac_u_at(k, x, u);
      BatchBlock stationarity;
      stationarity.parts.emplace_back(0, drop_pinned_column(Lu));
      if (k < K)
        stationarity.parts.emplace_back(lambda_base + static_cast<long>(k + 1) * n,
                                        model.dynamics_jac_u_at(k, x, u));
      stationarity.rhs = -a * Lu.col(pin);
      visit(stationarity);
    }
  }
}

inline void assemble_normal_system(const ProblemModel& model,
                                   const ConstraintSet& cs,
                                   const Trajectory& traj,
                                   const ParameterNormalization& norm,
                                   Matrix& H, Vector& g) {
  H.setZero();
  g.setZero();
  visit_batch_blocks(model, cs, traj, norm, [&](const BatchBlock& block) {
    for (const auto& [ci, Pi] : block.parts) {
      for (const auto& [cj, Pj] : block.parts)
        H.block(ci, cj, Pi.cols(), Pj.cols()) += Pi.transpose() * Pj;
      g.segment(ci, Pi.cols()) += Pi.transpose() * block.rhs;
    }
  });
}

// Accumulates M'(b - Mz) and returns |b - Mz|^2.
inline double stacked_residual(const ProblemModel& model,
                               const ConstraintSet& cs, const Trajectory& traj,
                               const ParameterNormalization& norm,
                               const Vector& z, Vector* normal_residual) {
  if (normal_residual != nullptr) normal_residual->setZero();
  double ssr = 0.0;
  visit_batch_blocks(model, cs, traj, norm, [&](const BatchBlock& block) {
    Vector r = block.rhs;
    for (const auto& [ci, Pi] : block.parts) r -= Pi * z.segment(ci, Pi.cols());
    ssr += r.squaredNorm();
    if (normal_residual != nullptr)
      for (const auto& [ci, Pi] : block.parts)
        normal_residual->segment(ci, Pi.cols()) += Pi.transpose() * r;
  });
  return ssr;
}

}  // namespace detail

/// Result of the offline baseline. `normal_rank` is the rank of the reduced
/// normal matrix; the estimate is unique iff that rank is full.
struct BatchEstimate {
  Vector theta;    // theta[fixed_index] = a
  Vector lambda0;
  double residual = 0.0;  // sum of squared stacked-equation residuals
  long normal_rank = 0;
  bool unique = false;
  long variable_count = 0;  // N + n(K+2), grows linearly with the trajectory
  long row_count = 0;
};

/// Solves the stacked minimum-principle least squares over (theta, costates)
/// with the pinned coefficient eliminated. The reduced normal system is
/// assembled from the block structure in linear time and factorized densely
/// (Cholesky, with a spectral fallback when rank deficient); one pass of
/// iterative refinement against the streamed stacked residual sharpens the
/// solution.
inline BatchEstimate batch_estimate(const ProblemModel& model,
                                    const ConstraintSet& cs,
                                    const ParameterNormalization& norm,
                                    const Trajectory& traj) {
  traj.validate();
  norm.validate(model.basis_dim);
  detail::require(traj.state_dim() == model.state_dim &&
                      traj.control_dim() == model.control_dim,
                  "trajectory dimensions do not match the model");

  const BatchSystem sys = describe_batch_system(model, cs, traj);
  const long dim = sys.reduced_dimension;
  const int n = model.state_dim;
  const int N = model.basis_dim;

  Matrix H(dim, dim);
  Vector g(dim);
  detail::assemble_normal_system(model, cs, traj, norm, H, g);

  Vector z;
  long rank = dim;
  bool unique = true;

  Eigen::LLT<Eigen::Ref<Matrix>> llt(H);  // in place; H holds the factor now
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) {
    z = llt.solve(g);
    for (int round = 0; round < 2; ++round) {
      Vector correction(dim);
      detail::stacked_residual(model, cs, traj, norm, z, &correction);
      z += llt.solve(correction);
    }
  } else {
    unique = false;
    if (dim <= 2000) {
      detail::assemble_normal_system(model, cs, traj, norm, H, g);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
      const Vector& evals = eig.eigenvalues();
      const double top = std::max(evals[dim - 1], 0.0);
      const double cutoff = 1e-12 * top;
      rank = 0;
      Vector inv = Vector::Zero(dim);
      for (long i = 0; i < dim; ++i) {
        if (evals[i] > cutoff && evals[i] > 0.0) {
          inv[i] = 1.0 / evals[i];
          ++rank;
        }
      }
      z = eig.eigenvectors() *
          (inv.asDiagonal() * (eig.eigenvectors().transpose() * g));
    } else {
      log::warn("rank-deficient batch system of dimension " +
                std::to_string(dim) + "; falling back to a pivoted solve");
      detail::assemble_normal_system(model, cs, traj, norm, H, g);
      Eigen::LDLT<Matrix> ldlt(H);
      z = ldlt.solve(g);
      const Vector d = ldlt.vectorD();
      const double top = d.cwiseAbs().maxCoeff();
      rank = 0;
      for (long i = 0; i < dim; ++i)
        if (std::abs(d[i]) > 1e-12 * top) ++rank;
    }
  }

  BatchEstimate out;
  out.theta = detail::insert_pinned(z.head(N - 1), norm.fixed_index,
                                    norm.fixed_value);
  out.lambda0 = z.segment(N - 1, n);
  out.residual = detail::stacked_residual(model, cs, traj, norm, z, nullptr);
  out.normal_rank = rank;
  out.unique = unique && rank == dim;
  out.variable_count = sys.decision_variables;
  out.row_count = sys.rows;
  return out;
}

/// One row of the online/batch cost comparison.
struct TimingRow {
  int horizon_samples = 0;  // trajectory length
  double online_total_s = 0.0;
  double online_per_step_s = 0.0;
  double batch_s = 0.0;
  long online_state_elements = 0;  // constant across horizons
  long batch_variable_count = 0;   // N + n(K+2)
};

namespace detail {

template <typename Fn>
double time_best(Fn&& fn, double min_elapsed_s = 0.05, int max_reps = 1000) {
  using clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (int rep = 0; rep < max_reps; ++rep) {
    const auto t0 = clock::now();
    fn();
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    best = std::min(best, dt);
    total += dt;
    if (total >= min_elapsed_s && rep >= 2) break;
    if (dt >= 0.5) break;  // long runs are stable enough unrepeated
  }
  return best;
}

}  // namespace detail

/// Times the online recursion and the batch solve on generated trajectories
/// of increasing length. Horizons count trajectory samples. Wall times are
/// best-of-several for short runs; sizes are exact. Callers assert
/// trends, never absolute times.
inline std::vector<TimingRow> timing_comparison(
    const LQProblem& base, const ParameterNormalization& norm,
    const std::vector<int>& horizons, const EstimatorOptions& options = {}) {
  detail::require(!horizons.empty(), "need at least one horizon");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    detail::require(horizons[i] > horizons[i - 1],
                    "horizons must be increasing");

  std::vector<TimingRow> rows;
  for (const int samples : horizons) {
    detail::require(samples >= 2, "horizon must be at least 2 samples");
    LQProblem p = base;
    p.horizon = samples - 1;
    const Trajectory traj = p.box.bounded() ? solve_box_constrained_lq(p)
                                            : solve_unconstrained_lq(p);
    const ProblemModel model = lq_model(p);

    TimingRow row;
    row.horizon_samples = samples;

    EstimatorState final_state;
    row.online_total_s = detail::time_best([&] {
      EstimatorState state;
      for (int k = 0; k < traj.length(); ++k) {
        StepOutput out = step(std::move(state), model, p.box, norm,
                              traj.states[k], traj.controls[k], options);
        state = std::move(out.state);
      }
      final_state = std::move(state);
    });
    row.online_per_step_s = row.online_total_s / traj.length();
    row.online_state_elements = final_state.element_count();

    BatchEstimate batch;
    row.batch_s = detail::time_best(
        [&] { batch = batch_estimate(model, p.box, norm, traj); });
    row.batch_variable_count = batch.variable_count;

    log::debug("timing: samples=" + std::to_string(samples) +
               " online=" + std::to_string(row.online_total_s) +
               "s batch=" + std::to_string(row.batch_s) + "s");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ioc
