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

#include "cmv/particles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "cmv/errors.hpp"

namespace cmv {

std::size_t SimulationConfig::steps() const {
  return static_cast<std::size_t>(std::llround(T / dt));
}

StreamId SimulationConfig::stream() const {
  return StreamId{seed, replica, nu_index, b1_epoch};
}

void SimulationConfig::validate() const {
  if (N < 2) throw ParameterError("N must be at least 2");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("T must be positive");
  const double ratio = T / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw ParameterError("T/dt must be an integer");
  }
  if (dim < 1 || dim > kMaxDim) throw DimensionError("dim must be 1..8");
  if (!coeffs) throw ParameterError("coefficient set is missing");
  if (coeffs->dim() != dim) {
    throw DimensionError("coefficient dimension " +
                         std::to_string(coeffs->dim()) +
                         " differs from config dimension " +
                         std::to_string(dim));
  }
  if (record_stride < 1) throw ParameterError("record_stride must be >= 1");
  if (M_Y < 1 || M_nu < 1) throw ParameterError("M_Y and M_nu must be >= 1");
  if (!x0.mean.empty() && static_cast<int>(x0.mean.size()) != dim) {
    throw DimensionError("initial mean has the wrong dimension");
  }
  if (x0.kind == InitialLaw::Kind::kGaussian && !(x0.stddev >= 0.0)) {
    throw ParameterError("initial stddev must be nonnegative");
  }
  if (!std::isfinite(initial_log_mass)) {
    throw ParameterError("initial log mass must be finite");
  }
}

WeightedAtomMeasure EnsembleState::nu() const {
  const double inv_n = 1.0 / static_cast<double>(size());
  std::vector<double> w(size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i]) * inv_n;
  return WeightedAtomMeasure(dim, x, std::move(w));
}

ObservationPath generate_observation_path(const StreamId& id,
                                          std::size_t steps, double dt) {
  // Y depends on (seed, replica) only, so nu-replicas and B1 epochs share it.
  auto eng = make_engine(StreamId{id.seed, id.replica, 0, 0},
                         StreamTag::kObservation);
  std::normal_distribution<double> normal;
  ObservationPath path;
  path.dt = dt;
  path.y.resize(steps + 1);
  path.y[0] = 0.0;
  const double sq = std::sqrt(dt);
  for (std::size_t k = 0; k < steps; ++k) path.y[k + 1] = path.y[k] + sq * normal(eng);
  return path;
}

std::size_t Trajectory::snapshot_index(std::size_t step) const {
  auto it = std::lower_bound(recorded_steps.begin(), recorded_steps.end(), step);
  if (it == recorded_steps.end() || *it != step) {
    throw GridError("step " + std::to_string(step) + " was not recorded");
  }
  return static_cast<std::size_t>(it - recorded_steps.begin());
}

ProbabilityAtomMeasure Trajectory::mu(std::size_t snapshot) const {
  return normalize(nu.at(snapshot), mass_threshold());
}

ObsContext Trajectory::obs(std::size_t step) const {
  ObsContext o;
  o.t = time(step);
  o.y = y_path.y.at(step);
  o.y_integral = y_integral.at(step);
  o.y_prefix = std::span<const double>(y_path.y.data(), step + 1);
  return o;
}

EnsembleState initial_state(const SimulationConfig& config) {
  config.validate();
  const int d = config.dim;
  EnsembleState s;
  s.dim = d;
  s.x.assign(config.N * d, 0.0);
  s.log_w.assign(config.N, config.initial_log_mass);
  s.h_integral.assign(config.N, 0.0);
  if (!config.x0.mean.empty()) {
    for (std::size_t i = 0; i < config.N; ++i) {
      std::copy(config.x0.mean.begin(), config.x0.mean.end(), &s.x[i * d]);
    }
  }
  if (config.x0.kind == InitialLaw::Kind::kGaussian && config.x0.stddev > 0.0) {
    const std::size_t blocks = (config.N + kParticleBlock - 1) / kParticleBlock;
    for (std::size_t b = 0; b < blocks; ++b) {
      auto eng = make_engine(config.stream(), StreamTag::kInitial, b);
      std::normal_distribution<double> normal;
      const std::size_t end = std::min(config.N, (b + 1) * kParticleBlock);
      for (std::size_t i = b * kParticleBlock; i < end; ++i) {
        for (int a = 0; a < d; ++a) s.x[i * d + a] += config.x0.stddev * normal(eng);
      }
    }
  }
  return s;
}

namespace {

// Euler-Maruyama for one particle, coefficients at the left endpoint:
// X += (b - rho h) dt + sigma dB1 + rho dY, l += h dY - h^2 dt / 2.
inline bool update_particle(double* x, double& log_w, double& h_int,
                            const double* dB1, double dY, double dt, int d,
                            const CoeffValues& c) {
  double next[kMaxDim];
  for (int a = 0; a < d; ++a) {
    double noise = 0.0;
    for (int b = 0; b < d; ++b) noise += c.sigma[a * d + b] * dB1[b];
    next[a] = x[a] + (c.b[a] - c.rho[a] * c.h) * dt + noise + c.rho[a] * dY;
  }
  bool ok = true;
  for (int a = 0; a < d; ++a) {
    x[a] = next[a];
    ok = ok && std::isfinite(next[a]);
  }
  log_w += c.h * dY - 0.5 * c.h * c.h * dt;
  h_int += c.h * dt;
  return ok && std::isfinite(log_w);
}

void finish_step(EnsembleState& s, double dY, double dt) {
  s.y_integral += s.y * dt;
  s.y += dY;
  s.step += 1;
  s.t = static_cast<double>(s.step) * dt;
}

std::vector<double> live_features(const EnsembleState& s,
                                  const CoefficientSet& coeffs,
                                  double mass_threshold) {
  if (coeffs.mu_dependence() == MuDependence::kNone) return {};
  return coeffs.features(normalize(s.nu(), mass_threshold));
}

}  // namespace

void advance(EnsembleState& state, std::span<const double> dB1, double dY,
             double dt, const CoefficientSet& coeffs,
             std::span<const double> features) {
  const int d = state.dim;
  const std::size_t n = state.size();
  if (dB1.size() != n * static_cast<std::size_t>(d)) {
    throw DimensionError("dB1 must hold N*d increments");
  }
  if (coeffs.dim() != d) throw DimensionError("coefficient dimension mismatch");
  ObsContext obs{state.t, state.y, state.y_integral, {}};
  std::atomic<bool> bad{false};
  std::atomic<bool> coeff_error{false};
  std::string coeff_message;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    CoeffValues c;
    try {
      coeffs.eval(state.t, &state.x[i * d], obs, features, c);
    } catch (const CoefficientError& e) {
#pragma omp critical(cmv_coeff_error)
      if (!coeff_error.exchange(true)) coeff_message = e.what();
      continue;
    }
    if (!update_particle(&state.x[i * d], state.log_w[i], state.h_integral[i],
                         &dB1[i * d], dY, dt, d, c)) {
      bad = true;
    }
  }
  if (coeff_error) throw CoefficientError(coeff_message);
  if (bad) throw NumericalBlowup("non-finite particle or weight", state.step);
  finish_step(state, dY, dt);
}

EnsembleState step_canonical(const EnsembleState& state,
                             std::span<const double> dB1, double dY, double dt,
                             const CoefficientSet& coeffs) {
  EnsembleState next = state;
  const auto feats = live_features(state, coeffs, kMassEpsilon);
  advance(next, dB1, dY, dt, coeffs, feats);
  return next;
}

namespace {

Trajectory run(const SimulationConfig& config, const FrozenMuPath* frozen,
               const ObservationPath* y_fixed) {
  config.validate();
  const std::size_t steps = config.steps();
  const double dt = config.dt;
  const int d = config.dim;
  const std::size_t n = config.N;
  const CoefficientSet& coeffs = *config.coeffs;

  Trajectory tr;
  tr.config = config;
  tr.frozen = frozen != nullptr;
  if (y_fixed) {
    if (y_fixed->steps() != steps ||
        std::abs(y_fixed->dt - dt) > 1e-12 * std::max(1.0, dt)) {
      throw GridError("observation path grid (" +
                      std::to_string(y_fixed->steps()) + " steps of " +
                      std::to_string(y_fixed->dt) +
                      ") does not match the simulation grid");
    }
    if (y_fixed->y.front() != 0.0) throw GridError("observation path must start at 0");
    tr.y_path = *y_fixed;
  } else {
    tr.y_path = generate_observation_path(config.stream(), steps, dt);
  }
  if (frozen) {
    if (frozen->dim() != d) throw DimensionError("frozen path dimension mismatch");
    if (frozen->times().front() > 1e-12) {
      throw GridError("frozen path must start at t = 0");
    }
    const double last = static_cast<double>(steps - 1) * dt;
    if (frozen->times().back() < last - 1e-9 * std::max(1.0, last)) {
      throw GridError("frozen path does not cover the simulation horizon");
    }
  }

  EnsembleState s = initial_state(config);
  tr.initial_mass = std::exp(config.initial_log_mass);
  const double threshold = kMassEpsilon * tr.initial_mass;
  tr.y_integral.assign(steps + 1, 0.0);
  tr.step_features.resize(steps);

  const std::size_t blocks = (n + kParticleBlock - 1) / kParticleBlock;
  std::vector<std::mt19937_64> engines;
  std::vector<std::normal_distribution<double>> normals(blocks);
  engines.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    engines.push_back(make_engine(config.stream(), StreamTag::kSignal, b));
  }

  const bool mu_dep = coeffs.mu_dependence() == MuDependence::kState;
  const double sq = std::sqrt(dt);
  for (std::size_t k = 0; k <= steps; ++k) {
    const bool record = k % config.record_stride == 0 || k == steps;
    WeightedAtomMeasure nu_k;
    if (record || (mu_dep && !frozen && k < steps)) nu_k = s.nu();
    if (record) {
      tr.recorded_steps.push_back(k);
      tr.nu.push_back(nu_k);
    }
    if (k == steps) break;

    std::vector<double> feats;
    if (mu_dep) {
      feats = frozen ? coeffs.features(frozen->at(static_cast<double>(k) * dt))
                     : coeffs.features(normalize(nu_k, threshold));
    }
    const double dY = tr.y_path.increment(k);
    const ObsContext obs{s.t, s.y, s.y_integral,
                         std::span<const double>(tr.y_path.y.data(), k + 1)};
    std::atomic<bool> bad{false};
    std::atomic<bool> coeff_error{false};
    std::string coeff_message;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(blocks); ++bb) {
      const auto b = static_cast<std::size_t>(bb);
      auto& eng = engines[b];
      auto& normal = normals[b];
      const std::size_t end = std::min(n, (b + 1) * kParticleBlock);
      CoeffValues c;
      double dB[kMaxDim];
      for (std::size_t i = b * kParticleBlock; i < end; ++i) {
        for (int a = 0; a < d; ++a) dB[a] = sq * normal(eng);
        try {
          coeffs.eval(s.t, &s.x[i * d], obs, feats, c);
        } catch (const CoefficientError& e) {
#pragma omp critical(cmv_coeff_error)
          if (!coeff_error.exchange(true)) coeff_message = e.what();
          continue;
        }
        if (!update_particle(&s.x[i * d], s.log_w[i], s.h_integral[i], dB, dY,
                             dt, d, c)) {
          bad = true;
        }
      }
    }
    if (coeff_error) throw CoefficientError(coeff_message);
    if (bad) throw NumericalBlowup("non-finite particle or weight", k);
    tr.step_features[k] = std::move(feats);
    finish_step(s, dY, dt);
    tr.y_integral[k + 1] = s.y_integral;
  }
  tr.final_state = std::move(s);
  return tr;
}

}  // namespace

Trajectory simulate_canonical(const SimulationConfig& config) {
  return run(config, nullptr, nullptr);
}

Trajectory simulate_frozen_mu(const SimulationConfig& config,
                              const FrozenMuPath& mu_path,
                              const ObservationPath& y_path) {
  return run(config, &mu_path, &y_path);
}

FrozenMuPath freeze_mu(const Trajectory& traj) {
  if (!traj.full_record()) {
    throw GridError("freezing mu needs every step recorded (record_stride 1)");
  }
  std::vector<double> times;
  std::vector<ProbabilityAtomMeasure> measures;
  times.reserve(traj.nu.size());
  measures.reserve(traj.nu.size());
  for (std::size_t k = 0; k < traj.nu.size(); ++k) {
    times.push_back(traj.time(traj.recorded_steps[k]));
    measures.push_back(traj.mu(k));
  }
  return FrozenMuPath(std::move(times), std::move(measures));
}

TiltEstimate girsanov_tilt(const Trajectory& traj, const TestFunction& phi) {
  const EnsembleState& s = traj.final_state;
  if (phi.dim() != s.dim) throw DimensionError("statistic dimension mismatch");
  const std::size_t n = s.size();
  // Shift by the max log-weight; the ratio is invariant and this avoids
  // overflow. Degeneracy is judged on the unshifted mass.
  const double lmax = *std::max_element(s.log_w.begin(), s.log_w.end());
  CompensatedSum mass, num;
  std::vector<double> w(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(s.log_w[i] - lmax);
    f[i] = phi.value(&s.x[i * s.dim]);
    mass.add(w[i]);
    num.add(w[i] * f[i]);
  }
  const double true_mass =
      mass.value() * std::exp(lmax) / static_cast<double>(n);
  if (!(true_mass > traj.mass_threshold())) {
    throw WeightDegeneracy("terminal mass " + std::to_string(true_mass) +
                           " at or below threshold");
  }
  TiltEstimate out;
  out.value = num.value() / mass.value();
  CompensatedSum var;
  for (std::size_t i = 0; i < n; ++i) {
    const double wn = w[i] / mass.value();
    var.add(wn * wn * (f[i] - out.value) * (f[i] - out.value));
  }
  out.standard_error = std::sqrt(std::max(0.0, var.value()));
  out.ess = effective_sample_size(s);
  out.b2_terminal.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.b2_terminal[i] = s.y - s.h_integral[i];
  return out;
}

double effective_sample_size(std::span<const double> log_w) {
  if (log_w.empty()) return 0.0;
  const double lmax = *std::max_element(log_w.begin(), log_w.end());
  CompensatedSum s1, s2;
  for (double l : log_w) {
    const double e = std::exp(l - lmax);
    s1.add(e);
    s2.add(e * e);
  }
  return s1.value() * s1.value() / s2.value();
}

double effective_sample_size(const EnsembleState& state) {
  return effective_sample_size(state.log_w);
}

}  // namespace cmv
