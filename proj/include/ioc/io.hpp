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

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ioc/batch.hpp"
#include "ioc/estimator.hpp"
#include "ioc/model.hpp"
#include "ioc/types.hpp"

namespace ioc {

/// All floating-point file output uses 10 significant digits.
inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_double(const std::string& token, const std::string& source,
                           long line) {
  const std::string t = trim(token);
  if (t.empty()) throw ParseError(source, line, "empty numeric field");
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &consumed);
  } catch (const std::exception&) {
    throw ParseError(source, line, "not a number: '" + t + "'");
  }
  if (consumed != t.size())
    throw ParseError(source, line, "trailing characters in number: '" + t + "'");
  return value;
}

inline long parse_long(const std::string& token, const std::string& source,
                       long line) {
  const std::string t = trim(token);
  std::size_t consumed = 0;
  long value = 0;
  try {
    value = std::stol(t, &consumed);
  } catch (const std::exception&) {
    throw ParseError(source, line, "not an integer: '" + t + "'");
  }
  if (consumed != t.size())
    throw ParseError(source, line, "trailing characters in integer: '" + t + "'");
  return value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory CSV: header `k,x1,...,xn,u1,...,um`, one row per step, k exactly
// 0,1,2,... (duplicate or skipped indices are rejected, never interpolated).
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  traj.validate();
  const int n = traj.state_dim();
  const int m = traj.control_dim();
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int j = 1; j <= m; ++j) out << ",u" << j;
  out << "\n";
  for (int k = 0; k < traj.length(); ++k) {
    out << k;
    for (int i = 0; i < n; ++i) out << ',' << format_double(traj.states[k][i]);
    for (int j = 0; j < m; ++j) out << ',' << format_double(traj.controls[k][j]);
    out << "\n";
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  detail::require(out.good(), "cannot open '" + path + "' for writing");
  write_trajectory_csv(out, traj);
}

inline Trajectory read_trajectory_csv(std::istream& in, const std::string& source) {
  std::string line;
  long line_number = 0;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
  ++line_number;

  const std::vector<std::string> header = detail::split(detail::trim(line), ',');
  if (header.empty() || detail::trim(header[0]) != "k")
    throw ParseError(source, 1, "header must start with 'k'");
  int n = 0, m = 0;
  std::size_t pos = 1;
  while (pos < header.size() &&
         detail::trim(header[pos]) == "x" + std::to_string(n + 1)) {
    ++n;
    ++pos;
  }
  while (pos < header.size() &&
         detail::trim(header[pos]) == "u" + std::to_string(m + 1)) {
    ++m;
    ++pos;
  }
  if (n == 0 || m == 0 || pos != header.size())
    throw ParseError(source, 1,
                     "header must be k,x1..xn,u1..um; got '" + line + "'");

  Trajectory traj;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const std::vector<std::string> fields = detail::split(trimmed, ',');
    if (static_cast<int>(fields.size()) != 1 + n + m)
      throw ParseError(source, line_number,
                       "expected " + std::to_string(1 + n + m) + " fields, got " +
                           std::to_string(fields.size()));
    const long k = detail::parse_long(fields[0], source, line_number);
    if (k != static_cast<long>(traj.states.size()))
      throw ParseError(source, line_number,
                       "time index must increase by one from 0; expected " +
                           std::to_string(traj.states.size()) + ", got " +
                           std::to_string(k));
    Vector x(n), u(m);
    for (int i = 0; i < n; ++i)
      x[i] = detail::parse_double(fields[1 + i], source, line_number);
    for (int j = 0; j < m; ++j)
      u[j] = detail::parse_double(fields[1 + n + j], source, line_number);
    traj.states.push_back(std::move(x));
    traj.controls.push_back(std::move(u));
  }
  if (traj.states.empty()) throw ParseError(source, line_number, "no data rows");
  return traj;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open '" + path + "' for reading");
  return read_trajectory_csv(in, path);
}

// ---------------------------------------------------------------------------
// Estimate trace CSV: header `k,rank,unique,residual,theta_1..theta_N,
// lambda0_1..lambda0_n`. Absent estimates are written as zero vectors with
// unique=0, mirroring the online algorithm's published form.
// ---------------------------------------------------------------------------

inline void write_estimate_trace_csv(std::ostream& out,
                                     const std::vector<EstimateResult>& results,
                                     int basis_dim, int state_dim) {
  out << "k,rank,unique,residual";
  for (int i = 1; i <= basis_dim; ++i) out << ",theta_" << i;
  for (int i = 1; i <= state_dim; ++i) out << ",lambda0_" << i;
  out << "\n";
  for (const EstimateResult& r : results) {
    out << r.k << ',' << r.reduced_rank << ',' << (r.unique ? 1 : 0) << ','
        << format_double(r.residual);
    if (r.theta.has_value()) {
      for (int i = 0; i < basis_dim; ++i) out << ',' << format_double((*r.theta)[i]);
      for (int i = 0; i < state_dim; ++i)
        out << ',' << format_double((*r.lambda0)[i]);
    } else {
      for (int i = 0; i < basis_dim + state_dim; ++i) out << ",0";
    }
    out << "\n";
  }
}

inline void write_estimate_trace_csv(const std::string& path,
                                     const std::vector<EstimateResult>& results,
                                     int basis_dim, int state_dim) {
  std::ofstream out(path);
  detail::require(out.good(), "cannot open '" + path + "' for writing");
  write_estimate_trace_csv(out, results, basis_dim, state_dim);
}

// ---------------------------------------------------------------------------
// Comparison and sweep tables.
// ---------------------------------------------------------------------------

inline void write_compare_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "K,online_total_s,online_per_step_s,batch_s,online_state_elems,"
         "batch_var_count\n";
  for (const TimingRow& r : rows) {
    out << r.horizon_samples << ',' << format_double(r.online_total_s) << ','
        << format_double(r.online_per_step_s) << ',' << format_double(r.batch_s)
        << ',' << r.online_state_elements << ',' << r.batch_variable_count
        << "\n";
  }
}

struct SweepRow {
  double delta = 0.0;
  int active_steps = 0;
  int first_unique_standard = -1;  // -1 when never unique
  int first_unique_adhoc = -1;
};

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta,active_steps,first_unique_standard,first_unique_adhoc\n";
  for (const SweepRow& r : rows) {
    out << format_double(r.delta) << ',' << r.active_steps << ','
        << r.first_unique_standard << ',' << r.first_unique_adhoc << "\n";
  }
}

}  // namespace ioc
