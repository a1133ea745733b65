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

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ioc/estimator.hpp"
#include "ioc/log.hpp"
#include "ioc/model.hpp"
#include "ioc/types.hpp"

namespace ioc {

// Ground-truth trajectory generation for linear-quadratic instances with box
// control constraints, plus the optimality checks used to certify them.

/// Finite-horizon LQ instance with diagonal stage weights. `horizon` is the
/// index K of the final stage; the generated trajectory holds K+1 samples
/// x_0..x_K, u_0..u_K. The last control only enters the objective.
struct LQProblem {
  Matrix A;
  Matrix B;
  Vector state_weights;    // n, strictly positive
  Vector control_weights;  // m, strictly positive
  Vector x0;
  int horizon = 1;  // K >= 1
  ConstraintSet box = ConstraintSet::unbounded(1);

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }

  void validate() const {
    detail::require(A.rows() == A.cols(), "A must be square");
    detail::require(B.rows() == A.rows(), "B must have as many rows as A");
    detail::require(state_weights.size() == A.rows(),
                    "state_weights dimension mismatch");
    detail::require(control_weights.size() == B.cols(),
                    "control_weights dimension mismatch");
    detail::require((state_weights.array() > 0.0).all() &&
                        (control_weights.array() > 0.0).all(),
                    "stage weights must be strictly positive");
    detail::require(x0.size() == A.rows(), "x0 dimension mismatch");
    detail::require(horizon >= 1, "horizon must be at least 1");
    detail::require(box.dim() == B.cols(),
                    "constraint set dimension does not match B");
  }
};

/// The model whose objective weights the estimator is meant to recover from
/// trajectories of this instance: LTI dynamics with the diagonal quadratic
/// basis, so the true parameter vector is [state_weights' control_weights']'.
inline ProblemModel lq_model(const LQProblem& p) {
  p.validate();
  return make_lti_model(p.A, p.B,
                        make_quadratic_basis(p.state_dim(), p.control_dim()));
}

inline Vector true_theta(const LQProblem& p) {
  Vector theta(p.state_weights.size() + p.control_weights.size());
  theta << p.state_weights, p.control_weights;
  return theta;
}

inline double lq_objective(const LQProblem& p, const Trajectory& traj) {
  double value = 0.0;
  for (int k = 0; k < traj.length(); ++k) {
    value += traj.states[k].dot(p.state_weights.asDiagonal() * traj.states[k]);
    value +=
        traj.controls[k].dot(p.control_weights.asDiagonal() * traj.controls[k]);
  }
  return value;
}

/// Contiguous [first, last] index ranges where the control is not strictly
/// interior to the constraint set.
inline std::vector<std::pair<int, int>> active_intervals(
    const ConstraintSet& cs, const Trajectory& traj) {
  std::vector<std::pair<int, int>> intervals;
  for (int k = 0; k < traj.length(); ++k) {
    if (cs.is_interior(traj.controls[k])) continue;
    if (!intervals.empty() && intervals.back().second == k - 1)
      intervals.back().second = k;
    else
      intervals.emplace_back(k, k);
  }
  return intervals;
}

inline int count_active_steps(const ConstraintSet& cs, const Trajectory& traj) {
  int count = 0;
  for (int k = 0; k < traj.length(); ++k)
    if (!cs.is_interior(traj.controls[k])) ++count;
  return count;
}

/// Optimal trajectory of the unconstrained instance via the backward
/// value-function recursion and a forward rollout. The terminal control
/// minimizes its own stage cost and is therefore zero.
inline Trajectory solve_unconstrained_lq(const LQProblem& p) {
  p.validate();
  const int n = p.state_dim();
  const int m = p.control_dim();
  const int K = p.horizon;
  const Matrix Qw = p.state_weights.asDiagonal();
  const Matrix Rw = p.control_weights.asDiagonal();

  // gains[k] applies at stage k; stage K has zero gain.
  std::vector<Matrix> gains(K);
  Matrix P = Qw;
  for (int k = K - 1; k >= 0; --k) {
    const Matrix BtP = p.B.transpose() * P;
    Eigen::LDLT<Matrix> W(Rw + BtP * p.B);
    if (W.info() != Eigen::Success)
      throw std::runtime_error("value recursion failed at stage " +
                               std::to_string(k));
    gains[k] = W.solve(BtP * p.A);
    P = Qw + p.A.transpose() * P * p.A -
        (BtP * p.A).transpose() * gains[k];
    P = ((P + P.transpose()) / 2.0).eval();
  }

  Trajectory traj;
  traj.states.resize(K + 1);
  traj.controls.resize(K + 1);
  traj.states[0] = p.x0;
  for (int k = 0; k < K; ++k) {
    traj.controls[k] = -gains[k] * traj.states[k];
    traj.states[k + 1] = p.A * traj.states[k] + p.B * traj.controls[k];
  }
  traj.controls[K] = Vector::Zero(m);
  return traj;
}

struct LqSolverOptions {
  /// Bound on the per-step first-order optimality residual: at every stage,
  /// the best feasible decrease predicted by the control gradient of the
  /// Hamiltonian must not exceed tol.
  double tol = 1e-8;
  int max_outer_iterations = 200;
  int max_linesearch_steps = 60;
  double armijo = 1e-4;
};

namespace detail {

// Control-gradient pass for an LQ instance: lambda_{K+1} = 0,
// lambda_k = 2 Q x_k + A' lambda_{k+1}, gradient_k = 2 R u_k + B' lambda_{k+1}.
inline std::vector<Vector> lq_control_gradient(
    const LQProblem& p, const std::vector<Vector>& states,
    const std::vector<Vector>& controls) {
  const int K = p.horizon;
  std::vector<Vector> grad(K + 1);
  Vector lambda = Vector::Zero(p.state_dim());
  for (int k = K; k >= 0; --k) {
    grad[k] = 2.0 * (p.control_weights.asDiagonal() * controls[k]) +
              p.B.transpose() * lambda;
    lambda = 2.0 * (p.state_weights.asDiagonal() * states[k]) +
             p.A.transpose() * lambda;
  }
  return grad;
}

// Per-stage first-order optimality residual over the box: the largest
// gradient-predicted decrease achievable by moving to a feasible vertex.
// Components with infinite bounds contribute their plain gradient magnitude.
inline double stage_vi_residual(const ConstraintSet& box, const Vector& u,
                                const Vector& g) {
  double total = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double lo = box.lower[i], hi = box.upper[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      total += std::max(-g[i] * (lo - u[i]), -g[i] * (hi - u[i]));
    } else {
      total += std::abs(g[i]);
    }
  }
  return total;
}

inline std::vector<Vector> lq_rollout(const LQProblem& p,
                                      const std::vector<Vector>& controls) {
  std::vector<Vector> states(p.horizon + 1);
  states[0] = p.x0;
  for (int k = 0; k < p.horizon; ++k)
    states[k + 1] = p.A * states[k] + p.B * controls[k];
  return states;
}

inline double lq_cost(const LQProblem& p, const std::vector<Vector>& states,
                      const std::vector<Vector>& controls) {
  double value = 0.0;
  for (int k = 0; k <= p.horizon; ++k) {
    value += states[k].dot(p.state_weights.asDiagonal() * states[k]);
    value += controls[k].dot(p.control_weights.asDiagonal() * controls[k]);
  }
  return value;
}

inline Vector clamp_to_box(const ConstraintSet& box, Vector u) {
  for (Index i = 0; i < u.size(); ++i)
    u[i] = std::min(std::max(u[i], box.lower[i]), box.upper[i]);
  return u;
}

// Exact minimizer over the free components given a clamp pattern
// (-1 at lower bound, +1 at upper bound, 0 free), via an affine value
// recursion. Clamped components act as known inputs.
inline std::vector<Vector> lq_subspace_minimizer(
    const LQProblem& p, const std::vector<Eigen::VectorXi>& pattern) {
  const int n = p.state_dim();
  const int m = p.control_dim();
  const int K = p.horizon;
  const Matrix Qw = p.state_weights.asDiagonal();

  struct StagePolicy {
    std::vector<int> free;
    Vector clamped_values;  // full m-vector, zeros on free components
    Matrix gain;            // m_f by n
    Vector offset;          // m_f
  };
  std::vector<StagePolicy> policy(K + 1);

  Matrix P = Matrix::Zero(n, n);
  Vector s = Vector::Zero(n);
  for (int k = K; k >= 0; --k) {
    StagePolicy& st = policy[k];
    st.clamped_values = Vector::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (pattern[k][i] < 0)
        st.clamped_values[i] = p.box.lower[i];
      else if (pattern[k][i] > 0)
        st.clamped_values[i] = p.box.upper[i];
      else
        st.free.push_back(i);
    }
    const int mf = static_cast<int>(st.free.size());
    Matrix Bf(n, mf);
    Vector rf(mf);
    for (int j = 0; j < mf; ++j) {
      Bf.col(j) = p.B.col(st.free[j]);
      rf[j] = p.control_weights[st.free[j]];
    }
    const Vector c = p.B * st.clamped_values;

    Matrix Abar = p.A;
    Vector cbar = c;
    Matrix Rf = rf.asDiagonal();
    if (mf > 0) {
      Eigen::LDLT<Matrix> W(Matrix(Rf) + Bf.transpose() * P * Bf);
      st.gain = W.solve(Bf.transpose() * P * p.A);
      st.offset = W.solve(Bf.transpose() * (P * c + s));
      Abar -= Bf * st.gain;
      cbar -= Bf * st.offset;
    } else {
      st.gain = Matrix::Zero(0, n);
      st.offset = Vector::Zero(0);
    }

    const Matrix Pnext = P;
    const Vector snext = s;
    Matrix Pk = Qw + Abar.transpose() * Pnext * Abar;
    if (mf > 0) Pk += st.gain.transpose() * Rf * st.gain;
    P = ((Pk + Pk.transpose()) / 2.0).eval();
    s = Abar.transpose() * (Pnext * cbar + snext);
    if (mf > 0) s += st.gain.transpose() * (Rf * st.offset);
  }

  std::vector<Vector> controls(K + 1);
  Vector x = p.x0;
  for (int k = 0; k <= K; ++k) {
    const StagePolicy& st = policy[k];
    Vector u = st.clamped_values;
    if (!st.free.empty()) {
      const Vector uf = -st.gain * x - st.offset;
      for (std::size_t j = 0; j < st.free.size(); ++j) u[st.free[j]] = uf[j];
    }
    controls[k] = u;
    if (k < K) x = p.A * x + p.B * controls[k];
  }
  return controls;
}

}  // namespace detail

/// Optimal trajectory of the box-constrained instance. Projected Newton:
/// clamp pattern from the current iterate and gradient, exact minimization
/// over the free subspace, projected Armijo backtracking. The returned
/// trajectory is certified: the per-stage first-order optimality residual
/// (with costates from the backward recursion) is at most solver tol.
/// Throws on non-convergence, reporting the final residual.
inline Trajectory solve_box_constrained_lq(const LQProblem& p,
                                           const LqSolverOptions& options = {}) {
  p.validate();
  const int m = p.control_dim();
  const int K = p.horizon;

  std::vector<Vector> u(K + 1);
  {
    const Trajectory unconstrained = solve_unconstrained_lq(p);
    for (int k = 0; k <= K; ++k)
      u[k] = detail::clamp_to_box(p.box, unconstrained.controls[k]);
  }

  std::vector<Vector> states = detail::lq_rollout(p, u);
  double cost = detail::lq_cost(p, states, u);
  double residual = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    const std::vector<Vector> grad = detail::lq_control_gradient(p, states, u);

    residual = 0.0;
    for (int k = 0; k <= K; ++k)
      residual = std::max(residual, detail::stage_vi_residual(p.box, u[k], grad[k]));
    if (residual <= options.tol) {
      Trajectory traj;
      traj.states = std::move(states);
      traj.controls = std::move(u);
      return traj;
    }

    std::vector<Eigen::VectorXi> pattern(K + 1, Eigen::VectorXi::Zero(m));
    for (int k = 0; k <= K; ++k) {
      for (int i = 0; i < m; ++i) {
        const double lo = p.box.lower[i], hi = p.box.upper[i];
        const double slack = std::isfinite(hi - lo) ? 1e-10 * (hi - lo) : 0.0;
        if (std::isfinite(lo) && u[k][i] <= lo + slack && grad[k][i] > 0.0)
          pattern[k][i] = -1;
        else if (std::isfinite(hi) && u[k][i] >= hi - slack && grad[k][i] < 0.0)
          pattern[k][i] = 1;
      }
    }

    const std::vector<Vector> target = detail::lq_subspace_minimizer(p, pattern);

    double directional = 0.0;
    for (int k = 0; k <= K; ++k) directional += grad[k].dot(target[k] - u[k]);
    if (!(directional < 0.0)) break;  // stalled; residual reported below

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < options.max_linesearch_steps; ++ls) {
      std::vector<Vector> candidate(K + 1);
      for (int k = 0; k <= K; ++k)
        candidate[k] =
            detail::clamp_to_box(p.box, u[k] + t * (target[k] - u[k]));
      std::vector<Vector> cand_states = detail::lq_rollout(p, candidate);
      const double cand_cost = detail::lq_cost(p, cand_states, candidate);
      double moved = 0.0;
      for (int k = 0; k <= K; ++k) moved += grad[k].dot(candidate[k] - u[k]);
      if (cand_cost <= cost + options.armijo * moved) {
        u = std::move(candidate);
        states = std::move(cand_states);
        cost = cand_cost;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }

  throw std::runtime_error(
      "box-constrained solve did not reach tolerance " +
      std::to_string(options.tol) + "; final residual " +
      std::to_string(residual));
}

/// Costates from the backward recursion, seeded with zero beyond the final
/// stage. Entry k of the result is lambda_k, for k = 0..K+1.
inline std::vector<Vector> backward_costates(const ProblemModel& model,
                                             const Trajectory& traj,
                                             const Vector& theta) {
  traj.validate();
  detail::require(theta.size() == model.basis_dim, "theta dimension mismatch");
  const int K = traj.length() - 1;
  std::vector<Vector> lambdas(K + 2);
  lambdas[K + 1] = Vector::Zero(model.state_dim);
  for (int k = K; k >= 0; --k) {
    const Vector& x = traj.states[k];
    const Vector& uk = traj.controls[k];
    lambdas[k] = model.basis_jac_x_at(k, x, uk) * theta +
                 model.dynamics_jac_x_at(k, x, uk) * lambdas[k + 1];
  }
  return lambdas;
}

/// Costates from the forward rewriting of the same recursion, seeded at
/// lambda_0. Requires the dynamics state Jacobian to be invertible along the
/// trajectory; each step is a linear solve.
inline std::vector<Vector> forward_costates(const ProblemModel& model,
                                            const Trajectory& traj,
                                            const Vector& theta,
                                            const Vector& lambda0,
                                            double singularity_tolerance = 1e-12) {
  traj.validate();
  detail::require(theta.size() == model.basis_dim, "theta dimension mismatch");
  detail::require(lambda0.size() == model.state_dim, "lambda0 dimension mismatch");
  const int K = traj.length() - 1;
  std::vector<Vector> lambdas(K + 2);
  lambdas[0] = lambda0;
  for (int k = 0; k <= K; ++k) {
    const Vector& x = traj.states[k];
    const Vector& uk = traj.controls[k];
    const Matrix jac_x = model.dynamics_jac_x_at(k, x, uk);
    Eigen::PartialPivLU<Matrix> lu(jac_x);
    if (!(lu.rcond() > singularity_tolerance))
      throw AssumptionViolated("dynamics state Jacobian is singular at step " +
                               std::to_string(k));
    lambdas[k + 1] =
        lu.solve(lambdas[k] - model.basis_jac_x_at(k, x, uk) * theta);
  }
  return lambdas;
}

/// Optimality diagnostics for a trajectory under a given parameter vector.
struct MinimumPrincipleReport {
  /// max over interior-control steps of |control gradient of the Hamiltonian|.
  double max_stationarity_violation = 0.0;
  /// max over boundary-control steps of the first-order feasible-decrease
  /// residual (zero when the variational condition holds).
  double max_variational_violation = 0.0;
  /// Forward-propagated vs backward costates, scaled by the largest costate.
  double max_costate_mismatch = 0.0;
  /// One-step rollout defect of the trajectory under the model.
  double max_dynamics_defect = 0.0;
  int inactive_steps = 0;
  int active_steps = 0;
};

/// Evaluates the stationarity and boundary optimality conditions along the
/// trajectory, and cross-checks the forward costate recursion against the
/// backward one (the identity the online estimator is built on).
inline MinimumPrincipleReport verify_minimum_principle(
    const ProblemModel& model, const ConstraintSet& cs, const Trajectory& traj,
    const Vector& theta) {
  traj.validate();
  MinimumPrincipleReport report;
  report.max_dynamics_defect = max_dynamics_defect(model, traj);

  const int K = traj.length() - 1;
  const std::vector<Vector> lambdas = backward_costates(model, traj, theta);

  for (int k = 0; k <= K; ++k) {
    const Vector& x = traj.states[k];
    const Vector& uk = traj.controls[k];
    const Vector g = model.basis_jac_u_at(k, x, uk) * theta +
                     model.dynamics_jac_u_at(k, x, uk) * lambdas[k + 1];
    if (cs.is_interior(uk)) {
      ++report.inactive_steps;
      report.max_stationarity_violation =
          std::max(report.max_stationarity_violation, g.norm());
    } else {
      ++report.active_steps;
      report.max_variational_violation = std::max(
          report.max_variational_violation, detail::stage_vi_residual(cs, uk, g));
    }
  }

  const std::vector<Vector> forward =
      forward_costates(model, traj, theta, lambdas[0]);
  double scale = 1.0;
  for (const Vector& l : lambdas) scale = std::max(scale, l.lpNorm<Eigen::Infinity>());
  for (std::size_t k = 0; k < lambdas.size(); ++k)
    report.max_costate_mismatch =
        std::max(report.max_costate_mismatch,
                 (forward[k] - lambdas[k]).lpNorm<Eigen::Infinity>() / scale);
  return report;
}

}  // namespace ioc
