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
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ioc/log.hpp"
#include "ioc/model.hpp"
#include "ioc/types.hpp"

namespace ioc {

// The online estimator recovers the objective-function weights of the
// control problem that generated a stream of (x_k, u_k) pairs. Each pair
// contributes one block to a running product of costate propagators and,
// when the control is strictly inside the constraint set, one rank-m update
// to an information matrix. A rank test on that matrix gates a closed-form
// solve for the weights and the initial costate. Memory is constant in the
// stream length; per-step work depends only on (n, m, N).

struct EstimatorOptions {
  /// Relative eigenvalue cutoff for the rank decision on the reduced
  /// information matrix (equivalently, a squared cutoff on the singular
  /// values of the reduced data factor).
  double rank_tolerance = 1e-12;
  /// When the reduced information matrix is rank deficient, publish the
  /// minimum-norm estimate instead of reporting the estimate as absent.
  bool pseudoinverse_fallback = false;
  /// Reciprocal-condition floor below which the dynamics state Jacobian is
  /// treated as singular.
  double jacobian_singularity_tolerance = 1e-12;
  /// Emit a warning once the propagator product's condition number first
  /// exceeds this value. No renormalization is applied: rescaling the
  /// product would change the solution being estimated.
  double condition_warning_threshold = 1e12;
};

/// The constant-size recursion state. A value type: step() consumes a state
/// and returns the successor, so independent streams may be processed in
/// parallel with independent states. One stream must be fed in order.
///
/// The Gram matrix is carried in square-root form: info_factor is an upper
/// triangular factor R with R'R equal to the accumulated Gram matrix, updated
/// by QR as stationarity blocks arrive. The factor preserves weak directions
/// whose relative weight in the squared form would fall below machine
/// precision once the dominant directions have grown. `information` is the
/// squared form R'R, maintained alongside for inspection and diagnostics.
struct EstimatorState {
  int k = -1;  // time index of the last processed pair, -1 when fresh
  Matrix propagator_product;  // (N+n)^2, product of per-step propagators
  Matrix info_factor;         // (N+n)^2 upper triangular, R'R = information
  Matrix information;         // (N+n)^2, accumulated Gram matrix, symmetric PSD
  long inactive_count = 0;    // processed pairs with u strictly interior
  double condition_estimate = 1.0;  // cond of propagator_product
  // Highest numerical rank certified so far. Certified full rank at any step
  // lower-bounds the exact rank at every later step (the Gram matrix only
  // gains positive semidefinite updates), so the reported rank never falls
  // below it even when the relative cutoff would momentarily demote a
  // marginal eigenvalue.
  int certified_rank = 0;

  bool fresh() const { return propagator_product.size() == 0; }

  /// Number of stored scalar elements; depends on (n, N) only, never on k.
  long element_count() const {
    return static_cast<long>(propagator_product.size()) +
           static_cast<long>(info_factor.size()) +
           static_cast<long>(information.size()) + 4;
  }
};

/// Per-step estimator output. theta and lambda0 are absent when the rank
/// condition fails and the pseudoinverse fallback is off: an absent estimate
/// means "not enough information yet", which a zero vector could not convey.
struct EstimateResult {
  int k = -1;
  std::optional<Vector> theta;    // N, theta[fixed_index] = a when present
  std::optional<Vector> lambda0;  // n
  Vector alpha;                   // N+n, [theta' lambda0']', minimum-norm when not unique
  int reduced_rank = 0;           // rank of the reduced information matrix
  bool unique = false;            // reduced_rank == N + n - 1
  double residual = 0.0;          // alpha' Q alpha at the returned alpha
};

/// Stationarity block F_k = [basis_jac_u | dynamics_jac_u], m by (N+n).
/// Its product with [theta' lambda_{k+1}']' is the control gradient of the
/// stage Hamiltonian.
inline Matrix stationarity_block(const ProblemModel& model, int k,
                                 const Vector& x, const Vector& u) {
  const int n = model.state_dim;
  const int m = model.control_dim;
  const int N = model.basis_dim;
  Matrix F(m, N + n);
  F.leftCols(N) = model.basis_jac_u_at(k, x, u);
  F.rightCols(n) = model.dynamics_jac_u_at(k, x, u);
  return F;
}

/// Costate propagator G_k, (N+n) by (N+n): maps [theta' lambda_k']' to
/// [theta' lambda_{k+1}']'. The inverse state Jacobian enters through linear
/// solves of one LU factorization, never an explicit matrix inverse; a
/// reciprocal condition number below singularity_tolerance raises
/// AssumptionViolated.
inline Matrix costate_propagator(const ProblemModel& model, int k,
                                 const Vector& x, const Vector& u,
                                 double singularity_tolerance = 1e-12) {
  const int n = model.state_dim;
  const int N = model.basis_dim;
  const Matrix jac_x = model.dynamics_jac_x_at(k, x, u);
  if (!jac_x.allFinite())
    throw AssumptionViolated("dynamics state Jacobian is not finite at step " +
                             std::to_string(k));
  Eigen::PartialPivLU<Matrix> lu(jac_x);
  const double rcond = lu.rcond();
  if (!(rcond > singularity_tolerance))
    throw AssumptionViolated(
        "dynamics state Jacobian is singular at step " + std::to_string(k) +
        " (reciprocal condition " + std::to_string(rcond) + ")");

  Matrix G = Matrix::Zero(N + n, N + n);
  G.topLeftCorner(N, N).setIdentity();
  G.bottomLeftCorner(n, N) = -lu.solve(model.basis_jac_x_at(k, x, u));
  G.bottomRightCorner(n, n) = lu.solve(Matrix::Identity(n, n));
  return G;
}

struct SolveOutput {
  Vector alpha;      // size dim(Q); alpha[fixed_index] = a always
  int reduced_rank = 0;
  bool unique = false;
  // Condition number of the reduced Gram matrix (infinite when singular);
  // near-singular full-rank solves carry their conditioning here.
  double condition = 0.0;
};

namespace detail {

/// Drops the pinned row/column of Q, returning the reduced matrix and the
/// pinned column with its pinned entry removed.
inline std::pair<Matrix, Vector> reduce_information(const Matrix& Q, int pin) {
  const Index d = Q.rows();
  Matrix Qbar(d - 1, d - 1);
  Vector q(d - 1);
  Index r = 0;
  for (Index i = 0; i < d; ++i) {
    if (i == pin) continue;
    q[r] = Q(i, pin);
    Index c = 0;
    for (Index j = 0; j < d; ++j) {
      if (j == pin) continue;
      Qbar(r, c++) = Q(i, j);
    }
    ++r;
  }
  return {std::move(Qbar), std::move(q)};
}

inline Vector insert_pinned(const Vector& beta, int pin, double a) {
  Vector alpha(beta.size() + 1);
  alpha.head(pin) = beta.head(pin);
  alpha[pin] = a;
  alpha.tail(beta.size() - pin) = beta.tail(beta.size() - pin);
  return alpha;
}

}  // namespace detail

/// Closed-form solve for the pinned-coefficient least-squares problem, from
/// the Gram matrix. Reduces Q by the pinned index, ranks the reduced matrix
/// by its spectrum (eigenvalues count when above rank_tolerance times the
/// largest), and either solves the full-rank system by a pivoted symmetric
/// factorization (spectral fallback on breakdown) or returns the minimum-norm
/// solution through the pseudoinverse with the same cutoff.
///
/// certified_rank is a floor carried by streamed use (see EstimatorState);
/// pass 0 for the bare single-shot rule.
inline SolveOutput solve_parameters(const Matrix& Q,
                                    const ParameterNormalization& norm,
                                    double rank_tolerance = 1e-12,
                                    int certified_rank = 0) {
  const Index d = Q.rows();
  detail::require(Q.cols() == d, "information matrix must be square");
  detail::require(norm.fixed_index >= 0 && norm.fixed_index < d,
                  "normalization index out of range");
  detail::require(norm.fixed_value > 0.0, "normalization value must be positive");
  const double a = norm.fixed_value;
  const int pin = norm.fixed_index;

  auto [Qbar, q] = detail::reduce_information(Q, pin);
  const Index dr = Qbar.rows();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(Qbar);
  const Vector& evals = eig.eigenvalues();  // ascending; PSD up to roundoff
  const double top = std::max(evals[dr - 1], 0.0);
  const double cutoff = rank_tolerance * top;
  int rank = 0;
  for (Index i = 0; i < dr; ++i)
    if (evals[i] > cutoff && evals[i] > 0.0) ++rank;
  rank = std::max(rank, std::min<int>(certified_rank, static_cast<int>(dr)));

  SolveOutput out;
  out.reduced_rank = rank;
  out.unique = (rank == dr);
  out.condition = evals[0] > 0.0 ? top / evals[0]
                                 : std::numeric_limits<double>::infinity();

  Vector beta;
  if (out.unique) {
    Eigen::LDLT<Matrix> ldlt(Qbar);
    if (ldlt.info() == Eigen::Success) {
      beta = ldlt.solve(-a * q);
    } else {
      Vector inv = Vector::Zero(dr);
      const double floor = Eigen::NumTraits<double>::epsilon() * top;
      for (Index i = 0; i < dr; ++i)
        if (evals[i] > floor) inv[i] = 1.0 / evals[i];
      beta = eig.eigenvectors() *
             (inv.asDiagonal() * (eig.eigenvectors().transpose() * (-a * q)));
    }
    if (out.condition > 1e12)
      log::warn("near-singular full-rank solve, condition ~" +
                std::to_string(out.condition));
  } else {
    // Minimum-norm solution of the pinned problem via the pseudoinverse.
    Vector inv = Vector::Zero(dr);
    for (Index i = 0; i < dr; ++i)
      if (evals[i] > cutoff && evals[i] > 0.0) inv[i] = 1.0 / evals[i];
    beta = eig.eigenvectors() *
           (inv.asDiagonal() * (eig.eigenvectors().transpose() * (-a * q)));
  }

  out.alpha = detail::insert_pinned(beta, pin, a);
  return out;
}

/// The same solve from the square-root form: R is the upper triangular factor
/// with R'R equal to the Gram matrix. Ranks and cutoffs keep the Gram-matrix
/// semantics (an eigenvalue cutoff tol corresponds to a cutoff sqrt(tol) on
/// the singular values of the reduced factor), but the arithmetic stays in
/// the data domain, where the condition number is the square root of the
/// Gram matrix's.
inline SolveOutput solve_parameters_factored(const Matrix& R,
                                             const ParameterNormalization& norm,
                                             double rank_tolerance = 1e-12,
                                             int certified_rank = 0) {
  const Index d = R.rows();
  detail::require(R.cols() == d, "information factor must be square");
  detail::require(norm.fixed_index >= 0 && norm.fixed_index < d,
                  "normalization index out of range");
  detail::require(norm.fixed_value > 0.0, "normalization value must be positive");
  const double a = norm.fixed_value;
  const int pin = norm.fixed_index;

  // Split off the pinned column: R * alpha = Rbar * beta + a * r_pin.
  Matrix Rbar(d, d - 1);
  Rbar.leftCols(pin) = R.leftCols(pin);
  Rbar.rightCols(d - 1 - pin) = R.rightCols(d - 1 - pin);
  const Vector r_pin = R.col(pin);

  Eigen::JacobiSVD<Matrix> svd(Rbar, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();  // descending
  const Index dr = d - 1;
  const double sigma_top = sigma[0];
  const double sigma_cut = std::sqrt(rank_tolerance) * sigma_top;
  int rank = 0;
  for (Index i = 0; i < dr; ++i)
    if (sigma[i] > sigma_cut && sigma[i] > 0.0) ++rank;
  rank = std::max(rank, std::min<int>(certified_rank, static_cast<int>(dr)));

  SolveOutput out;
  out.reduced_rank = rank;
  out.unique = (rank == dr);
  out.condition = sigma[dr - 1] > 0.0
                      ? std::pow(sigma_top / sigma[dr - 1], 2.0)
                      : std::numeric_limits<double>::infinity();

  // beta = -a * pinv(Rbar) r_pin, inverting singular values down to the
  // machine floor when unique and down to the rank cutoff otherwise.
  const double invert_floor =
      out.unique ? Eigen::NumTraits<double>::epsilon() * sigma_top : sigma_cut;
  Vector inv = Vector::Zero(dr);
  for (Index i = 0; i < dr; ++i)
    if (sigma[i] > invert_floor && sigma[i] > 0.0) inv[i] = 1.0 / sigma[i];
  const Vector beta =
      svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * (-a * r_pin)));

  if (out.unique && out.condition > 1e12)
    log::debug("near-singular full-rank solve, condition ~" +
               std::to_string(out.condition));

  out.alpha = detail::insert_pinned(beta, pin, a);
  return out;
}

/// Quadratic residual alpha' Q alpha, clamped to zero inside the
/// floating-point guard band -1e-12 * |Q|_inf * |alpha|^2.
inline double residual_cost(const Matrix& Q, const Vector& alpha) {
  detail::require(Q.rows() == Q.cols() && Q.rows() == alpha.size(),
                  "residual_cost: nonconformable shapes");
  const double value = alpha.dot(Q.selfadjointView<Eigen::Lower>() * alpha);
  if (value < 0.0 &&
      value >= -1e-12 * Q.lpNorm<Eigen::Infinity>() * alpha.squaredNorm())
    return 0.0;
  return value;
}

struct StepOutput {
  EstimatorState state;
  EstimateResult estimate;
};

/// Processes one (x, u) pair: updates the propagator product, adds the
/// stationarity Gram block to the information matrix iff u is strictly
/// interior, and solves for the current estimate.
inline StepOutput step(EstimatorState state, const ProblemModel& model,
                       const ConstraintSet& constraints,
                       const ParameterNormalization& norm, const Vector& x,
                       const Vector& u, const EstimatorOptions& options = {}) {
  const int n = model.state_dim;
  const int m = model.control_dim;
  const int N = model.basis_dim;
  norm.validate(N);
  detail::require(constraints.dim() == model.control_dim,
                  "constraint set dimension does not match the model");
  model.check_input(x, u);

  const int k = state.k + 1;
  const Matrix G =
      costate_propagator(model, k, x, u, options.jacobian_singularity_tolerance);
  const Matrix F = stationarity_block(model, k, x, u);

  if (state.fresh()) {
    state.propagator_product = G;
    state.info_factor = Matrix::Zero(N + n, N + n);
    state.information = Matrix::Zero(N + n, N + n);
  } else {
    detail::require(state.propagator_product.rows() == N + n,
                    "estimator state does not match the model dimensions");
    state.propagator_product = G * state.propagator_product;
  }

  {
    Eigen::JacobiSVD<Matrix> svd(state.propagator_product);
    const double smin = svd.singularValues()[svd.singularValues().size() - 1];
    const double smax = svd.singularValues()[0];
    const double cond =
        smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (cond > options.condition_warning_threshold &&
        state.condition_estimate <= options.condition_warning_threshold)
      log::warn("propagator product condition exceeds " +
                std::to_string(options.condition_warning_threshold) +
                " at step " + std::to_string(k));
    state.condition_estimate = cond;
  }

  if (constraints.is_interior(u)) {
    const Matrix row_block = F * state.propagator_product;
    // Square-root update: QR of the factor stacked with the new rows keeps
    // R'R equal to the Gram recursion while preserving weak directions.
    Matrix stacked(N + n + m, N + n);
    stacked.topRows(N + n) = state.info_factor;
    stacked.bottomRows(m) = row_block;
    const Eigen::HouseholderQR<Matrix> qr(stacked);
    state.info_factor =
        Matrix(qr.matrixQR().topRows(N + n).triangularView<Eigen::Upper>());
    state.information = state.info_factor.transpose() * state.info_factor;
    ++state.inactive_count;
  }
  state.k = k;

  const SolveOutput solved = solve_parameters_factored(
      state.info_factor, norm, options.rank_tolerance, state.certified_rank);
  state.certified_rank = std::max(state.certified_rank, solved.reduced_rank);

  EstimateResult result;
  result.k = k;
  result.alpha = solved.alpha;
  result.reduced_rank = solved.reduced_rank;
  result.unique = solved.unique;
  result.residual = (state.info_factor * solved.alpha).squaredNorm();
  if (solved.unique || options.pseudoinverse_fallback) {
    result.theta = solved.alpha.head(N);
    result.lambda0 = solved.alpha.tail(n);
  }
  return {std::move(state), std::move(result)};
}

/// Folds step() over a stored trajectory; errors are rethrown with the
/// offending sample index. Work is linear in the trajectory length.
inline std::vector<EstimateResult> run(const ProblemModel& model,
                                       const ConstraintSet& constraints,
                                       const ParameterNormalization& norm,
                                       const Trajectory& traj,
                                       const EstimatorOptions& options = {}) {
  traj.validate();
  detail::require(traj.state_dim() == model.state_dim &&
                      traj.control_dim() == model.control_dim,
                  "trajectory dimensions do not match the model");
  std::vector<EstimateResult> results;
  results.reserve(traj.states.size());
  EstimatorState state;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    try {
      StepOutput out = step(std::move(state), model, constraints, norm,
                            traj.states[i], traj.controls[i], options);
      state = std::move(out.state);
      results.push_back(std::move(out.estimate));
    } catch (const AssumptionViolated& e) {
      throw AssumptionViolated("sample " + std::to_string(i) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return results;
}

/// Comparison variant: discards every pair up to and including the last
/// constraint-active step, then runs the standard recursion on the remainder.
/// Results carry absolute sample indices. With no active steps this is
/// identical to run().
inline std::vector<EstimateResult> run_adhoc_variant(
    const ProblemModel& model, const ConstraintSet& constraints,
    const ParameterNormalization& norm, const Trajectory& traj,
    const EstimatorOptions& options = {}) {
  traj.validate();
  int last_active = -1;
  for (int k = 0; k < traj.length(); ++k)
    if (!constraints.is_interior(traj.controls[k])) last_active = k;

  std::vector<EstimateResult> results;
  EstimatorState state;
  state.k = last_active;  // time indices continue from the discarded prefix
  for (int k = last_active + 1; k < traj.length(); ++k) {
    StepOutput out = step(std::move(state), model, constraints, norm,
                          traj.states[k], traj.controls[k], options);
    state = std::move(out.state);
    results.push_back(std::move(out.estimate));
  }
  return results;
}

/// Index of the first unique estimate, if any.
inline std::optional<int> first_unique_step(
    const std::vector<EstimateResult>& results) {
  for (const EstimateResult& r : results)
    if (r.unique) return r.k;
  return std::nullopt;
}

}  // namespace ioc
