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

#ifndef CMV_PARTICLES_HPP
#define CMV_PARTICLES_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cmv/coefficients.hpp"
#include "cmv/measure.hpp"
#include "cmv/rng.hpp"

namespace cmv {

struct InitialLaw {
  enum class Kind { kPoint, kGaussian };
  Kind kind = Kind::kPoint;
  std::vector<double> mean;  // empty means the origin
  double stddev = 0.0;
};

struct SimulationConfig {
  std::size_t N = 1000;
  double T = 1.0;
  double dt = 0.01;
  int dim = 1;
  InitialLaw x0;
  CoefficientsPtr coeffs;
  std::uint64_t seed = 0;
  std::size_t M_Y = 1;
  std::size_t M_nu = 1;
  /// Snapshot every `record_stride` steps (the terminal step is always kept).
  std::size_t record_stride = 1;
  std::uint64_t replica = 0;
  std::uint64_t nu_index = 0;
  /// Selects an independent family of B1 streams with everything else fixed.
  std::uint64_t b1_epoch = 0;
  /// Initial log-weight shared by all particles (randomized-mass replicas).
  double initial_log_mass = 0.0;

  std::size_t steps() const;
  StreamId stream() const;
  void validate() const;
};

/// Particles, log-weights and observation clock under the reference measure.
struct EnsembleState {
  double t = 0.0;
  std::size_t step = 0;
  int dim = 1;
  std::vector<double> x;           // N * dim, row-major
  std::vector<double> log_w;       // N
  std::vector<double> h_integral;  // N, left-point sum of h ds
  double y = 0.0;
  double y_integral = 0.0;

  std::size_t size() const { return log_w.size(); }
  /// (1/N) sum_i exp(l_i) delta_{X_i}.
  WeightedAtomMeasure nu() const;
};

/// Y on the uniform grid t_k = k dt, Y_0 = 0.
struct ObservationPath {
  double dt = 0.0;
  std::vector<double> y;

  std::size_t steps() const { return y.empty() ? 0 : y.size() - 1; }
  double increment(std::size_t k) const { return y[k + 1] - y[k]; }
};

/// Brownian path from the observation stream of `id`.
ObservationPath generate_observation_path(const StreamId& id,
                                          std::size_t steps, double dt);

struct Trajectory {
  SimulationConfig config;
  ObservationPath y_path;
  std::vector<double> y_integral;  // left-point running integral, steps + 1
  std::vector<std::size_t> recorded_steps;
  std::vector<WeightedAtomMeasure> nu;  // one per recorded step
  /// Measure features used by the coefficients in step k, k < steps.
  std::vector<std::vector<double>> step_features;
  EnsembleState final_state;
  double initial_mass = 1.0;
  bool frozen = false;

  std::size_t steps() const { return y_path.steps(); }
  double dt() const { return y_path.dt; }
  double time(std::size_t step) const {
    return static_cast<double>(step) * y_path.dt;
  }
  bool full_record() const { return recorded_steps.size() == steps() + 1; }
  /// Snapshot index of `step`; throws GridError if it was not recorded.
  std::size_t snapshot_index(std::size_t step) const;
  ProbabilityAtomMeasure mu(std::size_t snapshot) const;
  ObsContext obs(std::size_t step) const;
  double mass_threshold() const { return kMassEpsilon * initial_mass; }
};

/// Initial ensemble drawn from the config's initial law.
EnsembleState initial_state(const SimulationConfig& config);

/// One Euler-Maruyama step with mu taken from the state at step start.
/// dB1 holds N*d increments already scaled by sqrt(dt).
EnsembleState step_canonical(const EnsembleState& state,
                             std::span<const double> dB1, double dY, double dt,
                             const CoefficientSet& coeffs);

/// Same update with explicit measure features (frozen or precomputed mu).
void advance(EnsembleState& state, std::span<const double> dB1, double dY,
             double dt, const CoefficientSet& coeffs,
             std::span<const double> features);

Trajectory simulate_canonical(const SimulationConfig& config);

/// Same scheme with mu read from `mu_path` and Y fixed to `y_path`.
Trajectory simulate_frozen_mu(const SimulationConfig& config,
                              const FrozenMuPath& mu_path,
                              const ObservationPath& y_path);

/// Frozen path built from the normalized snapshots of a full trajectory.
FrozenMuPath freeze_mu(const Trajectory& traj);

struct TiltEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  double ess = 0.0;
  /// Per-particle B2_T = Y_T - int_0^T h ds.
  std::vector<double> b2_terminal;
};

/// Sum L_T phi(X_T) / Sum L_T with the self-normalized standard error.
TiltEstimate girsanov_tilt(const Trajectory& traj, const TestFunction& phi);

/// (sum e^l)^2 / sum e^{2l}, computed in log space.
double effective_sample_size(const EnsembleState& state);
double effective_sample_size(std::span<const double> log_w);

}  // namespace cmv

#endif  // CMV_PARTICLES_HPP
