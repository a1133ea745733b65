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

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ioc/estimator.hpp"
#include "ioc/forward.hpp"
#include "ioc/io.hpp"
#include "ioc/model.hpp"
#include "ioc/types.hpp"

namespace ioc {

// Flat run configuration: one `key = value` per line, `#` starts a comment,
// vectors bracketed `[1, 2, 3]`, matrices nested `[[1, 0], [0, 1]]`.
// Keys:
//   preset            single_integrator | aircraft_pitch
//   A, B              dynamics matrices (x' = A x + B u)
//   state_weights, control_weights, x0   vectors
//   horizon           number of state/control samples to generate (>= 2)
//   delta             symmetric box bound [-delta, delta] per component
//   box_lower, box_upper                 explicit box bounds
//   unconstrained     true | false       no control constraints
//   basis             quadratic_diag (the only family shipped)
//   a                 pinned coefficient value (> 0)
//   fixed_index       zero-based pinned coefficient (default 0)
//   rank_tol, activity_tol, solver_tol   tolerances
//   fallback          true | false       publish minimum-norm estimates
// Explicit keys override preset values regardless of line order.

struct RunConfig {
  std::optional<std::string> preset;
  std::optional<Matrix> A, B;
  std::optional<Vector> state_weights, control_weights, x0;
  std::optional<int> horizon;  // samples
  std::optional<double> delta;
  std::optional<Vector> box_lower, box_upper;
  std::optional<bool> unconstrained;
  std::string basis = "quadratic_diag";
  double a = 1.0;
  int fixed_index = 0;
  double rank_tol = 1e-12;
  std::optional<double> activity_tol;
  double solver_tol = 1e-8;
  bool fallback = false;
};

namespace detail {

inline bool parse_bool(const std::string& value, const std::string& source,
                       long line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError(source, line, "expected a boolean, got '" + value + "'");
}

inline Vector parse_vector(const std::string& text, const std::string& source,
                           long line) {
  const std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ParseError(source, line, "expected a bracketed vector, got '" + t + "'");
  const std::string inner = trim(t.substr(1, t.size() - 2));
  if (inner.empty()) throw ParseError(source, line, "vector must not be empty");
  const std::vector<std::string> fields = split(inner, ',');
  Vector v(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i)
    v[i] = parse_double(fields[i], source, line);
  return v;
}

inline Matrix parse_matrix(const std::string& text, const std::string& source,
                           long line) {
  const std::string t = trim(text);
  if (t.size() < 4 || t.front() != '[' || t.back() != ']')
    throw ParseError(source, line, "expected a nested-bracket matrix");
  std::vector<Vector> rows;
  std::size_t pos = 1;
  while (pos < t.size() - 1) {
    const auto open = t.find('[', pos);
    if (open == std::string::npos) break;
    const auto close = t.find(']', open);
    if (close == std::string::npos)
      throw ParseError(source, line, "unbalanced brackets in matrix");
    rows.push_back(parse_vector(t.substr(open, close - open + 1), source, line));
    pos = close + 1;
  }
  if (rows.empty()) throw ParseError(source, line, "matrix must not be empty");
  Matrix M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != M.cols())
      throw ParseError(source, line, "matrix rows have different lengths");
    M.row(i) = rows[i].transpose();
  }
  return M;
}

}  // namespace detail

inline void apply_preset(RunConfig& config, const std::string& name);

inline RunConfig parse_config_text(std::istream& in, const std::string& source) {
  RunConfig config;
  std::set<std::string> seen;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(source, line_number, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(source, line_number, "expected 'key = value'");
    seen.insert(key);

    if (key == "preset") {
      config.preset = value;
    } else if (key == "A") {
      config.A = detail::parse_matrix(value, source, line_number);
    } else if (key == "B") {
      config.B = detail::parse_matrix(value, source, line_number);
    } else if (key == "state_weights") {
      config.state_weights = detail::parse_vector(value, source, line_number);
    } else if (key == "control_weights") {
      config.control_weights = detail::parse_vector(value, source, line_number);
    } else if (key == "x0") {
      config.x0 = detail::parse_vector(value, source, line_number);
    } else if (key == "horizon") {
      config.horizon = static_cast<int>(detail::parse_long(value, source, line_number));
    } else if (key == "delta") {
      config.delta = detail::parse_double(value, source, line_number);
    } else if (key == "box_lower") {
      config.box_lower = detail::parse_vector(value, source, line_number);
    } else if (key == "box_upper") {
      config.box_upper = detail::parse_vector(value, source, line_number);
    } else if (key == "unconstrained") {
      config.unconstrained = detail::parse_bool(value, source, line_number);
    } else if (key == "basis") {
      config.basis = value;
    } else if (key == "a") {
      config.a = detail::parse_double(value, source, line_number);
    } else if (key == "fixed_index") {
      config.fixed_index = static_cast<int>(detail::parse_long(value, source, line_number));
    } else if (key == "rank_tol") {
      config.rank_tol = detail::parse_double(value, source, line_number);
    } else if (key == "activity_tol") {
      config.activity_tol = detail::parse_double(value, source, line_number);
    } else if (key == "solver_tol") {
      config.solver_tol = detail::parse_double(value, source, line_number);
    } else if (key == "fallback") {
      config.fallback = detail::parse_bool(value, source, line_number);
    } else {
      throw ParseError(source, line_number, "unknown key '" + key + "'");
    }
  }
  return config;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open config '" + path + "'");
  return parse_config_text(in, path);
}

/// Fills any still-unset fields from the named preset. Presets carry the
/// exact numeric values of the shipped examples.
inline void apply_preset(RunConfig& config, const std::string& name) {
  const auto set_matrix = [](std::optional<Matrix>& slot, Matrix value) {
    if (!slot.has_value()) slot = std::move(value);
  };
  const auto set_vector = [](std::optional<Vector>& slot, Vector value) {
    if (!slot.has_value()) slot = std::move(value);
  };

  if (name == "single_integrator") {
    set_matrix(config.A, Matrix::Constant(1, 1, 1.0));
    set_matrix(config.B, Matrix::Constant(1, 1, 1.0));
    set_vector(config.state_weights, Vector::Constant(1, 1.0));
    set_vector(config.control_weights, Vector::Constant(1, 5.0));
    set_vector(config.x0, Vector::Constant(1, 10.0));
    if (!config.horizon.has_value()) config.horizon = 10;
    if (!config.unconstrained.has_value() && !config.delta.has_value() &&
        !config.box_lower.has_value())
      config.unconstrained = true;
  } else if (name == "aircraft_pitch") {
    Matrix A(3, 3);
    A << 0.9654, 5.4572, 0.0,
        -0.0013, 0.9545, 0.0,
        -0.0038, 5.5437, 1.0;
    Matrix B(3, 2);
    B << 0.0284, 0.0142,
         0.0020, 0.0010,
         0.0056, 0.0028;
    set_matrix(config.A, std::move(A));
    set_matrix(config.B, std::move(B));
    set_vector(config.state_weights, (Vector(3) << 1.0, 4.0, 2.0).finished());
    set_vector(config.control_weights, (Vector(2) << 3.0, 6.0).finished());
    set_vector(config.x0, (Vector(3) << 0.5, 0.0, 0.2).finished());
    if (!config.horizon.has_value()) config.horizon = 250;
    if (!config.unconstrained.has_value() && !config.delta.has_value() &&
        !config.box_lower.has_value())
      config.delta = 0.09;
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (available: single_integrator, aircraft_pitch)");
  }
}

/// Everything a command needs, resolved and validated.
struct RunSetup {
  LQProblem lq;
  ProblemModel model;
  ConstraintSet constraints = ConstraintSet::unbounded(1);
  ParameterNormalization normalization;
  EstimatorOptions estimator_options;
  LqSolverOptions solver_options;
  bool unconstrained = false;
};

inline RunSetup resolve(RunConfig config) {
  if (config.preset.has_value()) apply_preset(config, *config.preset);

  detail::require(config.A.has_value() && config.B.has_value(),
                  "config must provide A and B (or a preset)");
  detail::require(config.state_weights.has_value() &&
                      config.control_weights.has_value(),
                  "config must provide state_weights and control_weights");
  detail::require(config.x0.has_value(), "config must provide x0");
  detail::require(config.horizon.has_value() && *config.horizon >= 2,
                  "config must provide horizon >= 2 (number of samples)");
  detail::require(config.basis == "quadratic_diag",
                  "unsupported basis '" + config.basis +
                      "' (shipped: quadratic_diag)");
  detail::require(config.rank_tol > 0.0 && config.solver_tol > 0.0,
                  "tolerances must be positive");

  const int m = static_cast<int>(config.B->cols());

  RunSetup setup;
  setup.unconstrained = config.unconstrained.value_or(false);
  if (setup.unconstrained) {
    setup.constraints = ConstraintSet::unbounded(m);
  } else if (config.delta.has_value()) {
    setup.constraints =
        ConstraintSet::symmetric_box(m, *config.delta, config.activity_tol);
  } else if (config.box_lower.has_value() || config.box_upper.has_value()) {
    detail::require(config.box_lower.has_value() && config.box_upper.has_value(),
                    "box_lower and box_upper must be given together");
    setup.constraints =
        ConstraintSet::box(*config.box_lower, *config.box_upper, config.activity_tol);
  } else {
    throw std::invalid_argument(
        "config must specify constraints: delta, box_lower/box_upper, or "
        "unconstrained = true");
  }

  setup.lq.A = *config.A;
  setup.lq.B = *config.B;
  setup.lq.state_weights = *config.state_weights;
  setup.lq.control_weights = *config.control_weights;
  setup.lq.x0 = *config.x0;
  setup.lq.horizon = *config.horizon - 1;  // last stage index
  setup.lq.box = setup.constraints;
  setup.lq.validate();

  setup.model = lq_model(setup.lq);
  setup.normalization.fixed_value = config.a;
  setup.normalization.fixed_index = config.fixed_index;
  setup.normalization.validate(setup.model.basis_dim);

  setup.estimator_options.rank_tolerance = config.rank_tol;
  setup.estimator_options.pseudoinverse_fallback = config.fallback;
  setup.solver_options.tol = config.solver_tol;
  return setup;
}

}  // namespace ioc
