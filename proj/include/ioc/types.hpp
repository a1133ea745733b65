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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ioc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown when the state Jacobian of the dynamics is singular (or numerically
/// indistinguishable from singular) at an evaluated point. Every algorithm in
/// this library relies on that Jacobian being invertible; a violation is an
/// error, never silently skipped.
class AssumptionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by file readers (trajectory CSV, config) on malformed input.
/// The message carries the source name and line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  ParseError(const std::string& source, long line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail

}  // namespace ioc
