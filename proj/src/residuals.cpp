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

#include "cmv/residuals.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cmv/errors.hpp"

namespace cmv {

double standardize(double value, double se) {
  if (se > 0.0) return value / se;
  if (value == 0.0) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), value);
}

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  CompensatedSum s;
  for (double x : v) s.add(x);
  const double mean = s.value() / static_cast<double>(v.size());
  CompensatedSum q;
  for (double x : v) q.add((x - mean) * (x - mean));
  return std::sqrt(q.value() / static_cast<double>(v.size() - 1));
}

void finalize(ResidualReport& r, double dt, const ResidualOptions& options) {
  r.terminal = r.residual.back();
  r.terminal_rms = std::abs(r.terminal);
  r.standardized = standardize(r.terminal, r.standard_error);
  r.c1 = r.standard_error * std::sqrt(static_cast<double>(std::max<std::size_t>(r.samples, 1)));
  r.c2 = options.c2;
  r.predicted_scale =
      r.c1 / std::sqrt(static_cast<double>(std::max<std::size_t>(r.samples, 1))) +
      r.c2 * dt;
  r.threshold = options.threshold;
  r.pass = std::abs(r.standardized) <= options.threshold;
}

void require_full(const Trajectory& traj, const char* who) {
  if (!traj.full_record()) {
    throw GridError(std::string(who) + " needs every step recorded (record_stride 1)");
  }
}

std::vector<double> grid_times(const Trajectory& traj) {
  std::vector<double> t(traj.steps() + 1);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = traj.time(k);
  return t;
}

}  // namespace

std::vector<ResidualReport> zakai_residuals(
    const Trajectory& traj, const CoefficientSet& coeffs,
    const std::vector<TestFunctionPtr>& functions,
    const ResidualOptions& options) {
  require_full(traj, "zakai_residual");
  const int d = traj.final_state.dim;
  if (coeffs.dim() != d) throw DimensionError("coefficients and trajectory differ in dimension");
  for (const auto& f : functions) {
    if (!f || f->dim() != d) throw DimensionError("test function dimension mismatch");
  }
  const std::size_t steps = traj.steps();
  const std::size_t n = traj.nu.front().size();
  const std::size_t J = functions.size();
  const double dt = traj.dt();

  std::vector<std::vector<double>> R(J, std::vector<double>(steps + 1, 0.0));
  std::vector<std::vector<double>> contrib(J, std::vector<double>(n, 0.0));
  std::vector<CompensatedSum> drift(J);
  std::vector<double> pair0(J, 0.0);
  std::vector<CoeffValues> cv(n);

  for (std::size_t k = 0; k <= steps; ++k) {
    const WeightedAtomMeasure& nu = traj.nu[k];
    if (nu.size() != n) throw GridError("snapshot sizes differ");
    const bool interior = k < steps;
    const double dY = interior ? traj.y_path.increment(k) : 0.0;
    if (interior) {
      const ObsContext obs = traj.obs(k);
      const std::vector<double>& feats = traj.step_features[k];
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        coeffs.eval(obs.t, nu.atom(i), obs, feats, cv[i]);
      }
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(J); ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      const TestFunction& phi = *functions[j];
      CompensatedSum p, s;
      auto& c = contrib[j];
      for (std::size_t i = 0; i < n; ++i) {
        const double w = nu.weight(i);
        double v = 0.0;
        if (interior) {
          double L = 0.0, H = 0.0;
          apply_LH(phi, nu.atom(i), cv[i], d, L, H, &v);
          const double inc = w * (L * dt + H * dY);
          s.add(inc);
          c[i] -= inc;
        } else {
          v = phi.value(nu.atom(i));
        }
        p.add(w * v);
        if (k == 0) c[i] -= w * v;
        if (k == steps) c[i] += w * v;
      }
      const double pk = p.value();
      if (k == 0) pair0[j] = pk;
      R[j][k] = pk - pair0[j] - drift[j].value();
      if (interior) drift[j].add(s.value());
    }
  }

  std::vector<std::vector<double>> boot(J);
  if (options.bootstrap_resamples > 0) {
    auto eng = make_engine(traj.config.stream(), StreamTag::kBootstrap,
                           options.bootstrap_seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& b : boot) b.reserve(options.bootstrap_resamples);
    for (std::size_t b = 0; b < options.bootstrap_resamples; ++b) {
      for (auto& v : idx) v = pick(eng);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(J); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        CompensatedSum s;
        for (std::size_t v : idx) s.add(contrib[j][v]);
        boot[j].push_back(s.value());
      }
    }
  }

  const auto times = grid_times(traj);
  std::vector<ResidualReport> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    ResidualReport& r = out[j];
    r.id = functions[j]->name();
    r.times = times;
    r.residual = std::move(R[j]);
    r.samples = n;
    r.standard_error = sample_sd(boot[j]);
    finalize(r, dt, options);
  }
  return out;
}

ResidualReport zakai_residual(const Trajectory& traj,
                              const CoefficientSet& coeffs,
                              const TestFunction& phi,
                              const ResidualOptions& options) {
  // Non-owning alias: the report does not outlive this call's arguments.
  TestFunctionPtr alias(std::shared_ptr<const TestFunction>{}, &phi);
  return zakai_residuals(traj, coeffs, {alias}, options).front();
}

double terminal_rms(const std::vector<ResidualReport>& reports) {
  if (reports.empty()) return 0.0;
  CompensatedSum s;
  for (const auto& r : reports) s.add(r.terminal * r.terminal);
  return std::sqrt(s.value() / static_cast<double>(reports.size()));
}

KsReport ks_identity_check(const Trajectory& traj,
                           const TestFunctionBasis& basis, double tolerance) {
  KsReport rep;
  rep.tolerance = tolerance;
  for (std::size_t s = 0; s < traj.nu.size(); ++s) {
    const WeightedAtomMeasure& nu = traj.nu[s];
    const ProbabilityAtomMeasure mu = traj.mu(s);
    const double mass = nu.total_mass();
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const double pn = pair(nu, basis[j]);
      const double pm = pair(mu, basis[j]);
      const double gap = std::abs(pm * mass - pn);
      const double rel = gap / std::max(std::abs(pn), std::numeric_limits<double>::min());
      const double rel_eff = gap == 0.0 ? 0.0 : rel;
      if (gap > rep.max_abs) rep.max_abs = gap;
      if (rel_eff > rep.max_relative) {
        rep.max_relative = rel_eff;
        rep.worst_step = traj.recorded_steps[s];
        rep.worst_function = j;
      }
    }
  }
  rep.pass = rep.max_relative <= tolerance;
  return rep;
}

MartingaleReport martingale_check(const std::vector<double>& masses,
                                  double threshold) {
  if (masses.size() < 30) {
    throw ParameterError("martingale check needs at least 30 Y paths");
  }
  MartingaleReport rep;
  rep.replicas = masses.size();
  rep.threshold = threshold;
  CompensatedSum s;
  for (double m : masses) s.add(m);
  rep.mean = s.value() / static_cast<double>(masses.size());
  rep.standard_error = sample_sd(masses) / std::sqrt(static_cast<double>(masses.size()));
  rep.z = standardize(rep.mean - 1.0, rep.standard_error);
  rep.pass = std::abs(rep.z) <= threshold;
  return rep;
}

MartingaleReport martingale_check(const std::vector<Trajectory>& trajectories,
                                  double threshold) {
  std::vector<double> masses;
  masses.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    masses.push_back(t.nu.back().total_mass() / t.initial_mass);
  }
  return martingale_check(masses, threshold);
}

EmpiricalLaw::EmpiricalLaw(std::vector<const Trajectory*> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw ParameterError("empirical law needs M >= 1");
  const Trajectory& a = *members_.front();
  for (const Trajectory* t : members_) {
    if (!t) throw ParameterError("null trajectory in empirical law");
    if (t->steps() != a.steps() || t->dt() != a.dt() ||
        t->recorded_steps != a.recorded_steps) {
      throw GridError("empirical law members are on different grids");
    }
    if (t->y_path.y != a.y_path.y) {
      throw GridError("empirical law members do not share the Y path");
    }
  }
}

ResidualReport cfpe_residual(const EmpiricalLaw& law,
                             const CylindricalFunction& F,
                             const CoefficientSet& coeffs,
                             const ResidualOptions& options) {
  if (coeffs.y_dependence() != YDependence::kState) {
    throw ParameterError("the conditional Fokker-Planck check needs state-dependent coefficients");
  }
  const Trajectory& first = law.front();
  for (std::size_t j = 0; j < law.size(); ++j) require_full(law.member(j), "cfpe_residual");
  const std::size_t steps = first.steps();
  const double dt = first.dt();
  const std::size_t M = law.size();
  const int d = F.dim();
  std::vector<std::vector<double>> G(M, std::vector<double>(steps + 1, 0.0));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(M); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    const Trajectory& tr = law.member(j);
    CompensatedSum acc;
    double F0 = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
      const WeightedAtomMeasure& nk = tr.nu[k];
      const auto u = F.inner(nk);
      const double Fk = F.f(u);
      if (k == 0) F0 = Fk;
      G[j][k] = Fk - F0 - acc.value();
      if (k == steps) break;
      const ObsContext obs = tr.obs(k);
      const double gen = generator_measure(F, nk, obs, coeffs);
      const auto cv = evaluate_on_atoms(nk, obs, coeffs, tr.mass_threshold());
      const auto g = F.grad(u);
      double stoch = 0.0;
      for (std::size_t i = 0; i < F.k(); ++i) {
        if (g[i] == 0.0) continue;
        CompensatedSum h;
        for (std::size_t a = 0; a < nk.size(); ++a) {
          double L = 0.0, H = 0.0;
          apply_LH(F.psi(i), nk.atom(a), cv[a], d, L, H);
          h.add(nk.weight(a) * H);
        }
        stoch += g[i] * h.value();
      }
      acc.add(gen * dt + stoch * first.y_path.increment(k));
    }
  }

  ResidualReport r;
  r.id = F.name();
  r.times = grid_times(first);
  r.residual.assign(steps + 1, 0.0);
  for (std::size_t k = 0; k <= steps; ++k) {
    CompensatedSum s;
    for (std::size_t j = 0; j < M; ++j) s.add(G[j][k]);
    r.residual[k] = s.value() / static_cast<double>(M);
  }
  r.samples = M;
  if (M >= 2 && options.bootstrap_resamples > 0) {
    auto eng = make_engine(first.config.stream(), StreamTag::kBootstrap,
                           options.bootstrap_seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, M - 1);
    std::vector<double> boot;
    boot.reserve(options.bootstrap_resamples);
    for (std::size_t b = 0; b < options.bootstrap_resamples; ++b) {
      CompensatedSum s;
      for (std::size_t j = 0; j < M; ++j) s.add(G[pick(eng)][steps]);
      boot.push_back(s.value() / static_cast<double>(M));
    }
    r.standard_error = sample_sd(boot);
  }
  finalize(r, dt, options);
  return r;
}

RinfReport rinf_sde_residual(const Trajectory& traj,
                             const CoefficientSet& coeffs,
                             const TestFunctionBasis& basis, std::size_t K,
                             double tolerance) {
  require_full(traj, "rinf_sde_residual");
  if (coeffs.y_dependence() != YDependence::kState) {
    throw ParameterError("the lifted check needs state-dependent coefficients");
  }
  if (K == 0 || K > basis.size()) {
    throw ParameterError("K must be in 1.." + std::to_string(basis.size()));
  }
  const std::size_t steps = traj.steps();
  const double dt = traj.dt();
  RinfReport rep;
  rep.tolerance = tolerance;
  rep.min_alpha_eigenvalue = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> R(K, std::vector<double>(steps + 1, 0.0));
  std::vector<CompensatedSum> acc(K);
  std::vector<double> z0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const WeightedAtomMeasure& nk = traj.nu[k];
    const auto z = project_T(nk, K, basis);
    if (k == 0) z0 = z;
    for (std::size_t i = 0; i < K; ++i) R[i][k] = z[i] - z0[i] - acc[i].value();
    if (k == steps) break;
    const ObsContext obs = traj.obs(k);
    const auto lc = lifted_coefficients(nk, obs, coeffs, basis, K);
    const double dY = traj.y_path.increment(k);
    for (std::size_t i = 0; i < K; ++i) {
      acc[i].add(lc.beta[i] * dt + lc.gamma[i] * dY);
      const auto ii = static_cast<Eigen::Index>(i);
      rep.max_alpha_gamma_gap = std::max(
          rep.max_alpha_gamma_gap, std::abs(lc.alpha(ii, ii) - lc.gamma[i] * lc.gamma[i]));
      for (std::size_t j = 0; j < K; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        rep.max_alpha_asymmetry =
            std::max(rep.max_alpha_asymmetry, std::abs(lc.alpha(ii, jj) - lc.alpha(jj, ii)));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lc.alpha, Eigen::EigenvaluesOnly);
    rep.min_alpha_eigenvalue = std::min(rep.min_alpha_eigenvalue, es.eigenvalues().minCoeff());
  }

  const auto zakai = zakai_residuals(traj, coeffs, basis.prefix(K).functions());
  const auto times = grid_times(traj);
  rep.reports.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t k = 0; k <= steps; ++k) {
      rep.max_identity_gap =
          std::max(rep.max_identity_gap, std::abs(R[i][k] - zakai[i].residual[k]));
    }
    ResidualReport& r = rep.reports[i];
    r.id = basis[i].name();
    r.times = times;
    r.residual = std::move(R[i]);
    r.samples = zakai[i].samples;
    r.standard_error = zakai[i].standard_error;
    finalize(r, dt, ResidualOptions{});
  }
  rep.pass = rep.max_identity_gap <= tolerance && rep.max_alpha_gamma_gap == 0.0 &&
             rep.max_alpha_asymmetry == 0.0 && rep.min_alpha_eigenvalue >= -1e-10;
  return rep;
}

RegularityReport regularity_phi(const EmpiricalLaw& law,
                                const CoefficientSet& coeffs, double p) {
  if (!(p > 1.0)) throw ParameterError("regularity exponent p must exceed 1");
  if (coeffs.y_dependence() != YDependence::kState) {
    throw ParameterError("the regularity functional needs state-dependent coefficients");
  }
  const Trajectory& first = law.front();
  for (std::size_t j = 0; j < law.size(); ++j) require_full(law.member(j), "regularity_phi");
  const std::size_t steps = first.steps();
  const double dt = first.dt();
  const int d = coeffs.dim();
  RegularityReport rep;
  rep.p = p;
  rep.integrand.assign(steps, 0.0);
  CompensatedSum total;
  for (std::size_t k = 0; k < steps; ++k) {
    CompensatedSum over_law;
    for (std::size_t j = 0; j < law.size(); ++j) {
      const Trajectory& tr = law.member(j);
      const WeightedAtomMeasure& nk = tr.nu[k];
      const auto cv = evaluate_on_atoms(nk, tr.obs(k), coeffs, tr.mass_threshold());
      CompensatedSum nb, ns, nr, nh;
      for (std::size_t a = 0; a < nk.size(); ++a) {
        const double w = nk.weight(a);
        const CoeffValues& c = cv[a];
        double b2 = 0.0, r2 = 0.0, s2 = 0.0;
        for (int x = 0; x < d; ++x) {
          b2 += c.b[x] * c.b[x];
          r2 += c.rho[x] * c.rho[x];
          for (int y = 0; y < d; ++y) {
            double ss = 0.0;
            for (int q = 0; q < d; ++q) ss += c.sigma[x * d + q] * c.sigma[y * d + q];
            s2 += ss * ss;
          }
        }
        nb.add(w * std::sqrt(b2));
        ns.add(w * std::sqrt(s2));
        nr.add(w * std::sqrt(r2));
        nh.add(w * std::abs(c.h));
      }
      over_law.add(std::pow(nb.value(), p) + std::pow(ns.value(), p) +
                   std::pow(nr.value(), 2.0 * p) + std::pow(nh.value(), 2.0 * p));
    }
    rep.integrand[k] = over_law.value() / static_cast<double>(law.size());
    total.add(rep.integrand[k] * dt);
  }
  rep.phi_T = total.value();
  rep.finite = std::isfinite(rep.phi_T);
  return rep;
}

LyapunovReport lyapunov_decay(const std::vector<Trajectory>& trajectories,
                              double delta, const CoefficientSet& coeffs,
                              double K_const, double tolerance) {
  if (trajectories.empty()) throw ParameterError("lyapunov_decay needs trajectories");
  if (!(delta > 0.0)) throw ParameterError("delta must be positive");
  if (K_const < coeffs.bounds().c_lip) {
    throw ParameterError("K_const must be at least the declared Lipschitz constant");
  }
  const Trajectory& first = trajectories.front();
  for (const auto& t : trajectories) {
    if (t.recorded_steps != first.recorded_steps || t.dt() != first.dt()) {
      throw GridError("lyapunov_decay trajectories are on different grids");
    }
  }
  LyapunovReport rep;
  rep.alpha = coeffs.bounds().lyapunov_alpha();
  rep.K_const = K_const;
  rep.delta = delta;
  rep.tolerance = tolerance;
  rep.replicas = trajectories.size();
  const std::size_t S = first.recorded_steps.size();
  const std::size_t M = trajectories.size();
  std::vector<double> norms(S * M);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(S * M); ++q) {
    const auto s = static_cast<std::size_t>(q) / M;
    const auto j = static_cast<std::size_t>(q) % M;
    const auto& nu = trajectories[j].nu[s];
    norms[static_cast<std::size_t>(q)] = mollified_inner(nu, nu, delta);
  }
  for (std::size_t s = 0; s < S; ++s) {
    CompensatedSum acc;
    for (std::size_t j = 0; j < M; ++j) acc.add(norms[s * M + j]);
    const double t = first.time(first.recorded_steps[s]);
    const double mean = acc.value() / static_cast<double>(M);
    rep.times.push_back(t);
    rep.raw_norm.push_back(mean);
    rep.functional.push_back(std::exp(-K_const * rep.alpha * t) * mean);
  }
  for (std::size_t s = 1; s < S; ++s) {
    const double up = (rep.functional[s] - rep.functional[s - 1]) / rep.functional[0];
    rep.max_uptick = std::max(rep.max_uptick, up);
  }
  rep.pass = rep.max_uptick <= tolerance;
  return rep;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

RoundtripReport roundtrip_check(const SimulationConfig& config,
                                const std::vector<std::size_t>& N_list,
                                std::size_t M_Y, const TestFunctionBasis& basis,
                                const RoundtripOptions& options) {
  if (N_list.empty()) throw ParameterError("roundtrip needs at least one N");
  for (std::size_t i = 1; i < N_list.size(); ++i) {
    if (N_list[i] <= N_list[i - 1]) throw ParameterError("N_list must be increasing");
  }
  if (M_Y < 1) throw ParameterError("roundtrip needs M_Y >= 1");
  if (options.K == 0 || options.K > basis.size()) {
    throw ParameterError("roundtrip K exceeds the basis");
  }
  RoundtripReport rep;
  for (std::size_t N : N_list) {
    RoundtripRow row;
    row.N = N;
    row.metric_d.assign(M_Y, 0.0);
    row.mollified.assign(M_Y, 0.0);
    for (std::size_t r = 0; r < M_Y; ++r) {
      SimulationConfig cfg = config;
      cfg.N = N;
      cfg.replica = config.replica + r;
      cfg.record_stride = 1;
      const Trajectory live = simulate_canonical(cfg);
      const FrozenMuPath frozen = freeze_mu(live);
      SimulationConfig again = cfg;
      if (options.fresh_b1) again.b1_epoch = cfg.b1_epoch + 1;
      again.record_stride = cfg.steps();
      const Trajectory rerun = simulate_frozen_mu(again, frozen, live.y_path);
      const auto& a = live.nu.back();
      const auto& b = rerun.nu.back();
      row.metric_d[r] = metric_d(a, b, options.K, basis).value;
      row.mollified[r] = N <= options.mollified_max_N
                             ? mollified_l2_distance(a, b, options.delta)
                             : std::numeric_limits<double>::quiet_NaN();
    }
    row.median_metric_d = median(row.metric_d);
    row.median_mollified = median(row.mollified);
    rep.rows.push_back(std::move(row));
  }
  rep.nonincreasing = true;
  rep.strictly_decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const double prev = rep.rows[i - 1].median_metric_d;
    const double cur = rep.rows[i].median_metric_d;
    if (cur > prev) rep.nonincreasing = false;
    if (!(cur < prev)) rep.strictly_decreasing = false;
  }
  rep.pass = rep.nonincreasing;
  return rep;
}

}  // namespace cmv
