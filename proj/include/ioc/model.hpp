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
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ioc/types.hpp"

namespace ioc {

// ---------------------------------------------------------------------------
// Jacobian convention used throughout this library
//
// All derivative matrices store gradients in columns:
//   dynamics_jac_x (n by n):   entry (i, j) = d f^j / d x^i
//   dynamics_jac_u (m by n):   entry (i, j) = d f^j / d u^i
//   basis_jac_x    (n by N):   entry (i, j) = d L^j / d x^i
//   basis_jac_u    (m by N):   entry (i, j) = d L^j / d u^i
//
// For linear dynamics x' = A x + B u this means dynamics_jac_x = A' and
// dynamics_jac_u = B'. The costate recursions act on columns of these
// matrices without transposes.
// ---------------------------------------------------------------------------

using DynamicsFn = std::function<Vector(int, const Vector&, const Vector&)>;
using MatrixFn = std::function<Matrix(int, const Vector&, const Vector&)>;
using VectorFn = std::function<Vector(int, const Vector&, const Vector&)>;

/// A basis family: the stage-cost feature vector L(k, x, u) of dimension N
/// together with its state and control Jacobians (column-gradient layout).
struct BasisSpec {
  int dim = 0;  // N
  VectorFn value;
  MatrixFn jac_x;  // n by N
  MatrixFn jac_u;  // m by N
};

/// The differentiable description of the control system and stage-cost basis
/// consumed by the estimator, the trajectory generators and the baseline.
///
/// Immutable after construction; evaluation callables must be pure, so a
/// ProblemModel may be shared and evaluated concurrently from many threads.
struct ProblemModel {
  int state_dim = 0;    // n
  int control_dim = 0;  // m
  int basis_dim = 0;    // N

  DynamicsFn dynamics;
  MatrixFn dynamics_jac_x;  // n by n, must be invertible wherever evaluated
  MatrixFn dynamics_jac_u;  // m by n
  MatrixFn basis_jac_x;     // n by N
  MatrixFn basis_jac_u;     // m by N
  VectorFn basis;           // N, used for objective evaluation and diagnostics

  void check_input(const Vector& x, const Vector& u) const {
    detail::require(x.size() == state_dim, "state vector has dimension " +
                                               std::to_string(x.size()) +
                                               ", expected " +
                                               std::to_string(state_dim));
    detail::require(u.size() == control_dim, "control vector has dimension " +
                                                 std::to_string(u.size()) +
                                                 ", expected " +
                                                 std::to_string(control_dim));
  }

  // Checked evaluation: every callable must return exactly the declared
  // shape; anything else is reported as an error at the point of use.
  Vector dynamics_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Vector f = dynamics(k, x, u);
    detail::require(f.size() == state_dim, "dynamics returned wrong dimension");
    return f;
  }
  Matrix dynamics_jac_x_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Matrix J = dynamics_jac_x(k, x, u);
    detail::require(J.rows() == state_dim && J.cols() == state_dim,
                    "dynamics_jac_x returned wrong shape");
    return J;
  }
  Matrix dynamics_jac_u_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Matrix J = dynamics_jac_u(k, x, u);
    detail::require(J.rows() == control_dim && J.cols() == state_dim,
                    "dynamics_jac_u returned wrong shape");
    return J;
  }
  Matrix basis_jac_x_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Matrix J = basis_jac_x(k, x, u);
    detail::require(J.rows() == state_dim && J.cols() == basis_dim,
                    "basis_jac_x returned wrong shape");
    return J;
  }
  Matrix basis_jac_u_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Matrix J = basis_jac_u(k, x, u);
    detail::require(J.rows() == control_dim && J.cols() == basis_dim,
                    "basis_jac_u returned wrong shape");
    return J;
  }
  Vector basis_at(int k, const Vector& x, const Vector& u) const {
    check_input(x, u);
    Vector L = basis(k, x, u);
    detail::require(L.size() == basis_dim, "basis returned wrong dimension");
    return L;
  }
};

/// Closed box control-constraint set with a strict interior test.
///
/// A control counts as interior only if it clears every face by more than
/// activity_tolerance; file-ingested controls carry rounding, so saturated
/// values land on the boundary side of the test.
struct ConstraintSet {
  enum class Kind { box };

  Kind kind = Kind::box;
  Vector lower;
  Vector upper;
  double activity_tolerance = 0.0;

  static double default_tolerance(const Vector& lower, const Vector& upper) {
    double width = 0.0;
    for (Index i = 0; i < lower.size(); ++i) {
      const double w = upper[i] - lower[i];
      if (std::isfinite(w)) width = std::max(width, w);
    }
    return 1e-9 * std::max(1.0, width);
  }

  static ConstraintSet box(Vector lower, Vector upper,
                           std::optional<double> tolerance = std::nullopt) {
    detail::require(lower.size() == upper.size(),
                    "constraint bounds have mismatched dimensions");
    detail::require(lower.size() >= 1, "constraint set needs dimension >= 1");
    for (Index i = 0; i < lower.size(); ++i)
      detail::require(lower[i] < upper[i],
                      "constraint set has empty interior at component " +
                          std::to_string(i));
    ConstraintSet cs;
    cs.activity_tolerance =
        tolerance.has_value() ? *tolerance : default_tolerance(lower, upper);
    detail::require(cs.activity_tolerance >= 0.0,
                    "activity tolerance must be nonnegative");
    cs.lower = std::move(lower);
    cs.upper = std::move(upper);
    return cs;
  }

  /// [-delta, delta] in every component.
  static ConstraintSet symmetric_box(int control_dim, double delta,
                                     std::optional<double> tolerance = std::nullopt) {
    detail::require(delta > 0.0, "box half-width must be positive");
    return box(Vector::Constant(control_dim, -delta),
               Vector::Constant(control_dim, delta), tolerance);
  }

  /// The whole control space; every control is interior.
  static ConstraintSet unbounded(int control_dim) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return box(Vector::Constant(control_dim, -inf),
               Vector::Constant(control_dim, inf));
  }

  int dim() const { return static_cast<int>(lower.size()); }

  bool bounded() const {
    return lower.allFinite() && upper.allFinite();
  }

  bool is_interior(const Vector& u) const {
    detail::require(u.size() == lower.size(),
                    "control has dimension " + std::to_string(u.size()) +
                        ", constraint set has " + std::to_string(lower.size()));
    for (Index i = 0; i < u.size(); ++i) {
      if (!(u[i] > lower[i] + activity_tolerance &&
            u[i] < upper[i] - activity_tolerance))
        return false;
    }
    return true;
  }
};

inline bool is_interior(const ConstraintSet& cs, const Vector& u) {
  return cs.is_interior(u);
}

/// Removes the scale ambiguity of the objective by pinning one basis
/// coefficient: theta[fixed_index] = fixed_value. Zero-based index.
struct ParameterNormalization {
  double fixed_value = 1.0;
  int fixed_index = 0;

  void validate(int basis_dim) const {
    detail::require(fixed_value > 0.0, "normalization value must be positive");
    detail::require(fixed_index >= 0 && fixed_index < basis_dim,
                    "normalization index out of range");
  }
};

/// A finite sequence of state/control samples with equal lengths. Sample k
/// holds (x_k, u_k); the final control exists even when it only enters the
/// objective.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> controls;

  int length() const { return static_cast<int>(states.size()); }
  int state_dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  int control_dim() const {
    return controls.empty() ? 0 : static_cast<int>(controls.front().size());
  }

  void validate() const {
    detail::require(!states.empty(), "trajectory is empty");
    detail::require(states.size() == controls.size(),
                    "trajectory has " + std::to_string(states.size()) +
                        " states but " + std::to_string(controls.size()) +
                        " controls");
    for (const Vector& x : states)
      detail::require(x.size() == states.front().size(),
                      "trajectory states have inconsistent dimensions");
    for (const Vector& u : controls)
      detail::require(u.size() == controls.front().size(),
                      "trajectory controls have inconsistent dimensions");
  }
};

/// Largest relative one-step rollout defect max_k |x_{k+1} - f_k(x_k,u_k)|.
inline double max_dynamics_defect(const ProblemModel& model,
                                  const Trajectory& traj) {
  traj.validate();
  double worst = 0.0;
  for (int k = 0; k + 1 < traj.length(); ++k) {
    const Vector predicted = model.dynamics_at(k, traj.states[k], traj.controls[k]);
    const double scale = std::max(1.0, traj.states[k + 1].lpNorm<Eigen::Infinity>());
    worst = std::max(worst,
                     (predicted - traj.states[k + 1]).lpNorm<Eigen::Infinity>() / scale);
  }
  return worst;
}

/// True when every step of the trajectory is a rollout of the model within
/// the given relative tolerance.
inline bool is_dynamics_consistent(const ProblemModel& model,
                                   const Trajectory& traj,
                                   double relative_tolerance = 1e-8) {
  return max_dynamics_defect(model, traj) <= relative_tolerance;
}

/// Diagonal quadratic basis with N = n + m components:
/// L^i = (x^i)^2 for i < n, then L^{n+j} = (u^j)^2.
inline BasisSpec make_quadratic_basis(int n, int m) {
  detail::require(n >= 1 && m >= 1, "basis needs n >= 1 and m >= 1");
  BasisSpec spec;
  spec.dim = n + m;
  spec.value = [n, m](int, const Vector& x, const Vector& u) {
    Vector L(n + m);
    L.head(n) = x.array().square();
    L.tail(m) = u.array().square();
    return L;
  };
  spec.jac_x = [n, m](int, const Vector& x, const Vector&) {
    Matrix J = Matrix::Zero(n, n + m);
    J.leftCols(n).diagonal() = 2.0 * x;
    return J;
  };
  spec.jac_u = [n, m](int, const Vector&, const Vector& u) {
    Matrix J = Matrix::Zero(m, n + m);
    J.rightCols(m).diagonal() = 2.0 * u;
    return J;
  };
  return spec;
}

/// Time-invariant linear dynamics x' = A x + B u with the given basis.
/// The stored Jacobians are the constants A' and B' (column-gradient layout).
/// Throws AssumptionViolated when A is singular.
inline ProblemModel make_lti_model(const Matrix& A, const Matrix& B,
                                   BasisSpec basis) {
  detail::require(A.rows() == A.cols(), "A must be square");
  detail::require(B.rows() == A.rows(), "B must have as many rows as A");
  detail::require(basis.dim >= 1 && basis.value && basis.jac_x && basis.jac_u,
                  "basis spec is incomplete");
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible())
    throw AssumptionViolated("state transition matrix A is singular");

  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());

  ProblemModel model;
  model.state_dim = n;
  model.control_dim = m;
  model.basis_dim = basis.dim;
  model.dynamics = [A, B](int, const Vector& x, const Vector& u) -> Vector {
    return A * x + B * u;
  };
  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  model.dynamics_jac_x = [At](int, const Vector&, const Vector&) { return At; };
  model.dynamics_jac_u = [Bt](int, const Vector&, const Vector&) { return Bt; };
  model.basis_jac_x = std::move(basis.jac_x);
  model.basis_jac_u = std::move(basis.jac_u);
  model.basis = std::move(basis.value);
  return model;
}

/// Largest semi-relative mismatch between the declared Jacobians and central
/// finite differences at one point. Scale for each block is max(1, |J|_inf).
struct JacobianCheck {
  double dynamics_jac_x_error = 0.0;
  double dynamics_jac_u_error = 0.0;
  double basis_jac_x_error = 0.0;
  double basis_jac_u_error = 0.0;

  double max_error() const {
    return std::max({dynamics_jac_x_error, dynamics_jac_u_error,
                     basis_jac_x_error, basis_jac_u_error});
  }
};

inline JacobianCheck check_jacobians(const ProblemModel& model, int k,
                                     const Vector& x, const Vector& u) {
  const int n = model.state_dim;
  const int m = model.control_dim;
  const int N = model.basis_dim;

  const auto central = [&](auto&& eval, const Vector& base, bool wrt_state,
                           Index i) {
    Vector lo = base, hi = base;
    const double h = 1e-6 * std::max(1.0, std::abs(base[i]));
    lo[i] -= h;
    hi[i] += h;
    if (wrt_state) return Vector((eval(k, hi, u) - eval(k, lo, u)) / (2.0 * h));
    return Vector((eval(k, x, hi) - eval(k, x, lo)) / (2.0 * h));
  };

  const auto block_error = [](const Matrix& declared, const Matrix& fd) {
    const double scale = std::max(1.0, declared.lpNorm<Eigen::Infinity>());
    return (declared - fd).lpNorm<Eigen::Infinity>() / scale;
  };

  JacobianCheck out;

  Matrix fd_fx(n, n), fd_Lx(n, N);
  for (Index i = 0; i < n; ++i) {
    fd_fx.row(i) = central(model.dynamics, x, true, i).transpose();
    fd_Lx.row(i) = central(model.basis, x, true, i).transpose();
  }
  Matrix fd_fu(m, n), fd_Lu(m, N);
  for (Index i = 0; i < m; ++i) {
    fd_fu.row(i) = central(model.dynamics, u, false, i).transpose();
    fd_Lu.row(i) = central(model.basis, u, false, i).transpose();
  }

  out.dynamics_jac_x_error = block_error(model.dynamics_jac_x_at(k, x, u), fd_fx);
  out.dynamics_jac_u_error = block_error(model.dynamics_jac_u_at(k, x, u), fd_fu);
  out.basis_jac_x_error = block_error(model.basis_jac_x_at(k, x, u), fd_Lx);
  out.basis_jac_u_error = block_error(model.basis_jac_u_at(k, x, u), fd_Lu);
  return out;
}

}  // namespace ioc
