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

#ifndef CMV_RESIDUALS_HPP
#define CMV_RESIDUALS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cmv/operators.hpp"
#include "cmv/particles.hpp"

namespace cmv {

struct ResidualReport {
  std::string id;
  std::vector<double> times;
  std::vector<double> residual;  // R(t_m), aligned with `times`
  double terminal = 0.0;
  double terminal_rms = 0.0;
  double standard_error = 0.0;
  double standardized = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double predicted_scale = 0.0;
  double threshold = 5.0;
  std::size_t samples = 0;  // particles (or replicas) behind the SE
  bool pass = false;
};

struct ResidualOptions {
  std::size_t bootstrap_resamples = 200;
  std::uint64_t bootstrap_seed = 0x0b007ULL;
  double threshold = 5.0;
  double c2 = 1.0;
};

/// Zakai weak-form residual for each test function along one trajectory,
/// with left-point (Ito) Riemann sums and a particle bootstrap SE for the
/// terminal value. Needs every step recorded.
std::vector<ResidualReport> zakai_residuals(
    const Trajectory& traj, const CoefficientSet& coeffs,
    const std::vector<TestFunctionPtr>& functions,
    const ResidualOptions& options = {});

ResidualReport zakai_residual(const Trajectory& traj,
                              const CoefficientSet& coeffs,
                              const TestFunction& phi,
                              const ResidualOptions& options = {});

/// sqrt(mean R_T^2) over reports, e.g. one per Y path.
double terminal_rms(const std::vector<ResidualReport>& reports);

struct KsReport {
  double max_abs = 0.0;
  double max_relative = 0.0;
  std::size_t worst_step = 0;
  std::size_t worst_function = 0;
  double tolerance = 1e-12;
  bool pass = false;
};

/// max |<mu,phi><nu,1> - <nu,phi>| over the recorded grid and the basis;
/// relative values are scaled by max(|<nu,phi>|, <nu,|phi|>, tiny).
KsReport ks_identity_check(const Trajectory& traj,
                           const TestFunctionBasis& basis,
                           double tolerance = 1e-12);

struct MartingaleReport {
  double mean = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
  std::size_t replicas = 0;
  double threshold = 3.0;
  bool pass = false;
};

MartingaleReport martingale_check(const std::vector<double>& terminal_masses,
                                  double threshold = 3.0);
MartingaleReport martingale_check(const std::vector<Trajectory>& trajectories,
                                  double threshold = 3.0);

/// M measure paths that share one Y path.
class EmpiricalLaw {
 public:
  explicit EmpiricalLaw(std::vector<const Trajectory*> members);
  std::size_t size() const { return members_.size(); }
  const Trajectory& member(std::size_t j) const { return *members_[j]; }
  const Trajectory& front() const { return *members_.front(); }

 private:
  std::vector<const Trajectory*> members_;
};

/// Conditional Fokker-Planck residual of a cylinder function over the law;
/// SE from a bootstrap over members (zero for M = 1).
ResidualReport cfpe_residual(const EmpiricalLaw& law,
                             const CylindricalFunction& F,
                             const CoefficientSet& coeffs,
                             const ResidualOptions& options = {});

struct RinfReport {
  std::vector<ResidualReport> reports;
  double max_identity_gap = 0.0;   // vs zakai_residuals, over the whole path
  double max_alpha_gamma_gap = 0.0;  // |alpha_ii - gamma_i^2|
  double max_alpha_asymmetry = 0.0;
  double min_alpha_eigenvalue = 0.0;
  double tolerance = 1e-12;
  bool pass = false;
};

/// Residual of dZ_i = beta_i dt + gamma_i dY along Z_i = <nu_t, phi_i> with
/// lifted coefficients from the live measure, checked against the Zakai form.
RinfReport rinf_sde_residual(const Trajectory& traj,
                             const CoefficientSet& coeffs,
                             const TestFunctionBasis& basis, std::size_t K,
                             double tolerance = 1e-12);

struct RegularityReport {
  double phi_T = 0.0;
  std::vector<double> integrand;  // per step, averaged over the law
  bool finite = false;
  double p = 2.0;
};

RegularityReport regularity_phi(const EmpiricalLaw& law,
                                const CoefficientSet& coeffs, double p);

struct LyapunovReport {
  std::vector<double> times;
  std::vector<double> functional;  // mean over replicas of beta_t ||T_t||^2
  std::vector<double> raw_norm;    // mean over replicas of ||T_t||^2
  double alpha = 0.0;
  double K_const = 0.0;
  double delta = 0.0;
  double max_uptick = 0.0;  // relative to the initial value
  double tolerance = 0.02;
  std::size_t replicas = 0;
  bool pass = false;
};

/// beta_t = exp(-K int alpha) with alpha from declared sup-norms; the
/// functional is read at the snapshots common to all trajectories.
LyapunovReport lyapunov_decay(const std::vector<Trajectory>& trajectories,
                              double delta, const CoefficientSet& coeffs,
                              double K_const, double tolerance = 0.02);

struct RoundtripRow {
  std::size_t N = 0;
  double median_metric_d = 0.0;
  double median_mollified = 0.0;
  std::vector<double> metric_d;
  std::vector<double> mollified;
};

struct RoundtripReport {
  std::vector<RoundtripRow> rows;
  bool nonincreasing = false;
  bool strictly_decreasing = false;
  bool pass = false;
};

struct RoundtripOptions {
  std::size_t K = 16;
  double delta = 0.1;
  bool fresh_b1 = true;
  /// The mollified distance is O(N^2); rows with larger N report NaN.
  std::size_t mollified_max_N = 2000;
};

/// For each N and Y path: canonical run, freeze mu, re-run with fresh B1 on
/// the same Y, compare the terminal measures.
RoundtripReport roundtrip_check(const SimulationConfig& config,
                                const std::vector<std::size_t>& N_list,
                                std::size_t M_Y, const TestFunctionBasis& basis,
                                const RoundtripOptions& options = {});

/// Standardized value with the SE = 0 convention (0 if R = 0, else +-inf).
double standardize(double value, double se);

}  // namespace cmv

#endif  // CMV_RESIDUALS_HPP
