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

// Command-line front end: trajectory generation, online estimation, the
// offline baseline, cost comparison and constraint sweeps, all file-based.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ioc/ioc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNeverUnique = 2;

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::optional<double> rank_tol;
  bool fallback = false;
};

ioc::RunSetup load_setup(const CommonArgs& args) {
  ioc::RunConfig config;
  if (!args.config_path.empty()) config = ioc::parse_config_file(args.config_path);
  if (!args.preset.empty()) config.preset = args.preset;
  if (args.rank_tol.has_value()) config.rank_tol = *args.rank_tol;
  if (args.fallback) config.fallback = true;
  if (!config.preset.has_value() && args.config_path.empty())
    throw std::invalid_argument("provide --config and/or --preset");
  return ioc::resolve(config);
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--preset", args.preset,
                  "named instance: single_integrator | aircraft_pitch");
}

std::string format_vector(const ioc::Vector& v) {
  std::ostringstream out;
  out << '[';
  for (ioc::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out << ", ";
    out << ioc::format_double(v[i]);
  }
  out << ']';
  return out.str();
}

void print_active_summary(const ioc::ConstraintSet& cs, const ioc::Trajectory& traj) {
  const auto intervals = ioc::active_intervals(cs, traj);
  if (intervals.empty()) {
    std::cout << "constraints active: never\n";
    return;
  }
  std::cout << "constraints active: ";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (i > 0) std::cout << ", ";
    std::cout << "k in [" << intervals[i].first << ", " << intervals[i].second
              << "]";
  }
  std::cout << " (" << ioc::count_active_steps(cs, traj) << " steps)\n";
}

ioc::Trajectory generate_trajectory(const ioc::RunSetup& setup) {
  if (setup.unconstrained) return ioc::solve_unconstrained_lq(setup.lq);
  return ioc::solve_box_constrained_lq(setup.lq, setup.solver_options);
}

int cmd_generate(const CommonArgs& common, const std::string& out_path) {
  const ioc::RunSetup setup = load_setup(common);
  const ioc::Trajectory traj = generate_trajectory(setup);
  ioc::write_trajectory_csv(out_path, traj);
  std::cout << "wrote " << traj.length() << " samples to " << out_path << "\n";
  print_active_summary(setup.constraints, traj);
  return kExitOk;
}

int cmd_estimate(const CommonArgs& common, const std::string& trajectory_path,
                 const std::string& out_path) {
  const ioc::RunSetup setup = load_setup(common);
  const ioc::Trajectory traj = ioc::read_trajectory_csv(trajectory_path);
  const std::vector<ioc::EstimateResult> results = ioc::run(
      setup.model, setup.constraints, setup.normalization, traj,
      setup.estimator_options);
  ioc::write_estimate_trace_csv(out_path, results, setup.model.basis_dim,
                                setup.model.state_dim);
  std::cout << "wrote " << results.size() << " estimates to " << out_path << "\n";

  const std::optional<int> first = ioc::first_unique_step(results);
  const ioc::EstimateResult& last = results.back();
  if (first.has_value())
    std::cout << "first unique step: " << *first << "\n";
  else
    std::cout << "first unique step: never\n";
  std::cout << "final rank: " << last.reduced_rank << " (unique: "
            << (last.unique ? "yes" : "no") << ")\n";
  if (last.theta.has_value())
    std::cout << "final theta: " << format_vector(*last.theta) << "\n";
  else
    std::cout << "final theta: not computed (rank deficient)\n";
  std::cout << "final residual: " << ioc::format_double(last.residual) << "\n";
  return first.has_value() ? kExitOk : kExitNeverUnique;
}

int cmd_batch(const CommonArgs& common, const std::string& trajectory_path,
              const std::string& out_path) {
  const ioc::RunSetup setup = load_setup(common);
  const ioc::Trajectory traj = ioc::read_trajectory_csv(trajectory_path);
  const ioc::BatchEstimate estimate = ioc::batch_estimate(
      setup.model, setup.constraints, setup.normalization, traj);
  std::cout << "decision variables: " << estimate.variable_count << " (rows "
            << estimate.row_count << ")\n";
  std::cout << "unique: " << (estimate.unique ? "yes" : "no") << " (normal rank "
            << estimate.normal_rank << ")\n";
  std::cout << "theta: " << format_vector(estimate.theta) << "\n";
  std::cout << "lambda0: " << format_vector(estimate.lambda0) << "\n";
  std::cout << "residual: " << ioc::format_double(estimate.residual) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out.good()) throw std::runtime_error("cannot open '" + out_path + "'");
    out << "K,unique,normal_rank,residual";
    for (int i = 1; i <= setup.model.basis_dim; ++i) out << ",theta_" << i;
    for (int i = 1; i <= setup.model.state_dim; ++i) out << ",lambda0_" << i;
    out << "\n" << traj.length() - 1 << ',' << (estimate.unique ? 1 : 0) << ','
        << estimate.normal_rank << ',' << ioc::format_double(estimate.residual);
    for (ioc::Index i = 0; i < estimate.theta.size(); ++i)
      out << ',' << ioc::format_double(estimate.theta[i]);
    for (ioc::Index i = 0; i < estimate.lambda0.size(); ++i)
      out << ',' << ioc::format_double(estimate.lambda0[i]);
    out << "\n";
  }
  return estimate.unique ? kExitOk : kExitNeverUnique;
}

int cmd_compare(const CommonArgs& common, std::vector<int> horizons,
                const std::string& out_path) {
  const ioc::RunSetup setup = load_setup(common);
  if (horizons.empty()) horizons = {100, 1000, 10000};
  const std::vector<ioc::TimingRow> rows = ioc::timing_comparison(
      setup.lq, setup.normalization, horizons, setup.estimator_options);
  std::ofstream out(out_path);
  if (!out.good()) throw std::runtime_error("cannot open '" + out_path + "'");
  ioc::write_compare_csv(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  for (const ioc::TimingRow& r : rows)
    std::cout << "K=" << r.horizon_samples << ": online "
              << ioc::format_double(r.online_total_s) << " s ("
              << ioc::format_double(r.online_per_step_s) << " s/step, "
              << r.online_state_elements << " state elems), batch "
              << ioc::format_double(r.batch_s) << " s ("
              << r.batch_variable_count << " variables)\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& common, std::vector<double> deltas,
              const std::string& out_path) {
  if (deltas.empty()) deltas = {0.07, 0.08, 0.09, 0.10, 0.11};
  std::vector<ioc::SweepRow> rows;
  for (const double delta : deltas) {
    ioc::RunConfig config;
    if (!common.config_path.empty())
      config = ioc::parse_config_file(common.config_path);
    if (!common.preset.empty()) config.preset = common.preset;
    if (common.rank_tol.has_value()) config.rank_tol = *common.rank_tol;
    config.delta = delta;
    config.unconstrained = false;
    config.box_lower.reset();
    config.box_upper.reset();
    const ioc::RunSetup setup = ioc::resolve(config);

    const ioc::Trajectory traj =
        ioc::solve_box_constrained_lq(setup.lq, setup.solver_options);
    const auto standard = ioc::run(setup.model, setup.constraints,
                                   setup.normalization, traj,
                                   setup.estimator_options);
    const auto adhoc = ioc::run_adhoc_variant(setup.model, setup.constraints,
                                              setup.normalization, traj,
                                              setup.estimator_options);
    ioc::SweepRow row;
    row.delta = delta;
    row.active_steps = ioc::count_active_steps(setup.constraints, traj);
    row.first_unique_standard = ioc::first_unique_step(standard).value_or(-1);
    row.first_unique_adhoc = ioc::first_unique_step(adhoc).value_or(-1);
    rows.push_back(row);
    std::cout << "delta " << ioc::format_double(delta) << ": "
              << row.active_steps << " active steps, first unique "
              << row.first_unique_standard << " (standard) vs "
              << row.first_unique_adhoc << " (ad hoc)\n";
  }
  std::ofstream out(out_path);
  if (!out.good()) throw std::runtime_error("cannot open '" + out_path + "'");
  ioc::write_sweep_csv(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ioc: recover objective-function weights of constrained discrete-time "
      "optimal control problems from streamed state/control trajectories"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string trajectory_path;
  std::vector<int> horizons;
  std::vector<double> deltas;
  // Per-subcommand outputs: CLI11 applies default_val at registration, so a
  // shared variable would leak the last default into other subcommands.
  std::string generate_out = "trajectory.csv";
  std::string estimate_out = "estimate_trace.csv";
  std::string batch_out;
  std::string compare_out = "compare.csv";
  std::string sweep_out = "sweep.csv";

  CLI::App* generate = app.add_subcommand(
      "generate", "solve the configured instance and write the trajectory CSV");
  add_common(generate, common);
  generate->add_option("--out", generate_out, "output trajectory CSV")
      ->capture_default_str();

  CLI::App* estimate = app.add_subcommand(
      "estimate", "run the online estimator over a trajectory file");
  add_common(estimate, common);
  estimate->add_option("--trajectory", trajectory_path, "input trajectory CSV")
      ->required();
  estimate->add_option("--out", estimate_out, "output estimate trace CSV")
      ->capture_default_str();
  estimate->add_option("--rank-tol", common.rank_tol,
                       "relative rank threshold override");
  estimate->add_flag("--fallback", common.fallback,
                     "publish minimum-norm estimates when rank deficient");

  CLI::App* batch = app.add_subcommand(
      "batch", "run the offline full-costate baseline over a trajectory file");
  add_common(batch, common);
  batch->add_option("--trajectory", trajectory_path, "input trajectory CSV")
      ->required();
  batch->add_option("--rank-tol", common.rank_tol,
                    "relative rank threshold override");
  batch->add_option("--out", batch_out, "optional output CSV");

  CLI::App* compare = app.add_subcommand(
      "compare", "time the online method against the batch baseline");
  add_common(compare, common);
  compare->add_option("--horizons", horizons,
                      "trajectory lengths to benchmark")->delimiter(',');
  compare->add_option("--out", compare_out, "output CSV")->capture_default_str();

  CLI::App* sweep = app.add_subcommand(
      "sweep", "vary the constraint magnitude and report first-unique steps");
  add_common(sweep, common);
  sweep->add_option("--deltas", deltas, "box half-widths to sweep")
      ->delimiter(',');
  sweep->add_option("--rank-tol", common.rank_tol,
                    "relative rank threshold override");
  sweep->add_option("--out", sweep_out, "output CSV")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(common, generate_out);
    if (estimate->parsed())
      return cmd_estimate(common, trajectory_path, estimate_out);
    if (batch->parsed()) return cmd_batch(common, trajectory_path, batch_out);
    if (compare->parsed()) return cmd_compare(common, horizons, compare_out);
    if (sweep->parsed()) return cmd_sweep(common, deltas, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
