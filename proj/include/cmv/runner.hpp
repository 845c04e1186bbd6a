// Copyright 2026 The cmv Authors
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

#ifndef CMV_RUNNER_HPP
#define CMV_RUNNER_HPP

#include <exception>
#include <string>
#include <vector>

#include "cmv/config.hpp"

namespace cmv {

struct RunResult {
  bool pass = true;
  std::vector<std::string> failures;  // check names (or "replica:<r>" tags)
  std::vector<std::string> files;     // relative to the output directory
};

/// Trajectory summary CSV, terminal atoms CSV and a manifest.
RunResult cmd_simulate(const RunConfig& config, const std::string& out_dir);
/// Runs config.checks; one report_<check>.json each plus summary.json.
RunResult cmd_verify(const RunConfig& config, const std::string& out_dir);
/// Particle vs Kalman-Bucy table for the linear families (d = 1).
RunResult cmd_oracle(const RunConfig& config, const std::string& out_dir);
/// Zakai residual RMS against N, dt or K with a fitted log-log slope.
RunResult cmd_sweep(const RunConfig& config, const std::string& out_dir);

/// Dispatches on "simulate" | "verify" | "oracle" | "sweep".
RunResult run_command(const std::string& command, const RunConfig& config,
                      const std::string& out_dir);

/// Worker threads for parallel regions; n <= 0 keeps the runtime default.
void set_workers(int n);

/// 2 for configuration, parameter and IO errors, 3 for numerical ones.
int exit_code_for(const std::exception_ptr& error);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cmv

#endif  // CMV_RUNNER_HPP
