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

#include "cmv/runner.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "cmv/errors.hpp"
#include "cmv/hash.hpp"
#include "cmv/oracles.hpp"
#include "cmv/residuals.hpp"

namespace cmv {

using json = nlohmann::json;
namespace fs = std::filesystem;

void set_workers(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int exit_code_for(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError&) {
    return 2;
  } catch (const IoError&) {
    return 2;
  } catch (const ParameterError&) {
    return 2;
  } catch (const DimensionError&) {
    return 2;
  } catch (const GridError&) {
    return 2;
  } catch (...) {
    return 3;
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ParameterError("slope fit needs at least two (x, y) pairs");
  }
  double sx = 0.0, sy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericalBlowup("log-log fit of a nonpositive value", 0);
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    num += dx * (std::log(y[i]) - my);
    den += dx * dx;
  }
  return num / den;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON cannot hold inf/nan; they become strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      body_ << (i ? "," : "") << header[i];
    }
    body_ << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((body_ << (first ? "" : ",") << cell(cells), first = false), ...);
    body_ << '\n';
  }
  std::string str() const { return body_.str(); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v) { return std::to_string(v); }
  std::ostringstream body_;
};

class Output {
 public:
  Output(const RunConfig& config, const std::string& dir)
      : dir_(dir), hash_(config_hash(config)), canonical_(canonical_config(config)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    }
  }

  const std::string& hash() const { return hash_; }

  void csv(const std::string& name, const Csv& table) {
    write(name, "# config_hash: " + hash_ + "\n" + table.str());
  }

  void report(const std::string& name, json j) {
    j["config_hash"] = hash_;
    write(name, j.dump(2) + "\n");
  }

  void manifest(const std::string& command, RunResult& result) {
    json files = json::array();
    for (const auto& [name, sha] : written_) files.push_back({{"name", name}, {"sha1", sha}});
    json m{{"command", command},
           {"config_hash", hash_},
           {"config", json::parse(canonical_)},
           {"files", files},
           {"pass", result.pass},
           {"failures", result.failures}};
    write("manifest.json", m.dump(2) + "\n");
    result.files.clear();
    for (const auto& [name, sha] : written_) result.files.push_back(name);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

 private:
  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    out.close();
    if (!out) throw IoError("write failed for '" + (dir_ / name).string() + "'");
    if (name != "manifest.json") written_.emplace_back(name, git_blob_sha1(content));
  }

  fs::path dir_;
  std::string hash_;
  std::string canonical_;
  std::vector<std::pair<std::string, std::string>> written_;
};

ResidualOptions residual_options(const RunConfig& c, double threshold) {
  ResidualOptions o;
  o.bootstrap_resamples = c.bootstrap;
  o.bootstrap_seed = c.seed;
  o.threshold = threshold;
  return o;
}

double weighted_mean(const WeightedAtomMeasure& nu, int axis) {
  CompensatedSum s, m;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    s.add(nu.weight(i) * nu.atom(i)[axis]);
    m.add(nu.weight(i));
  }
  return s.value() / m.value();
}

double ess_of(const WeightedAtomMeasure& nu) {
  CompensatedSum s1, s2;
  for (double w : nu.weights()) {
    s1.add(w);
    s2.add(w * w);
  }
  return s1.value() * s1.value() / s2.value();
}

double initial_log_mass(const RunConfig& c, std::size_t replica, std::size_t j) {
  if (c.cfpe.mass_spread == 0.0) return 0.0;
  auto eng = make_engine(StreamId{c.seed, replica, j, 0}, StreamTag::kMass);
  std::uniform_real_distribution<double> u(1.0 - c.cfpe.mass_spread, 1.0 + c.cfpe.mass_spread);
  return std::log(u(eng));
}

// M_nu members on the replica-0 Y path with randomized initial masses.
std::vector<Trajectory> law_members(const RunConfig& c, const CoefficientsPtr& coeffs) {
  std::vector<Trajectory> members;
  for (std::size_t j = 0; j < c.M_nu; ++j) {
    SimulationConfig s = simulation_config(c, coeffs, 0, j);
    s.record_stride = 1;
    s.initial_log_mass = initial_log_mass(c, 0, j);
    members.push_back(simulate_canonical(s));
  }
  return members;
}

json residual_json(const ResidualReport& r) {
  return {{"id", r.id},
          {"terminal", num(r.terminal)},
          {"standard_error", num(r.standard_error)},
          {"standardized", num(r.standardized)},
          {"c1", num(r.c1)},
          {"c2", num(r.c2)},
          {"predicted_scale", num(r.predicted_scale)},
          {"threshold", r.threshold},
          {"samples", r.samples},
          {"pass", r.pass}};
}

// ---- checks -----------------------------------------------------------------

json check_ks(const RunConfig& c, const CoefficientsPtr& coeffs,
              const TestFunctionBasis& basis, Output&) {
  json reps = json::array();
  bool pass = true;
  double worst = 0.0;
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    const Trajectory tr = simulate_canonical(simulation_config(c, coeffs, r, 0));
    const KsReport k = ks_identity_check(tr, basis, c.tolerances.ks);
    pass = pass && k.pass;
    worst = std::max(worst, k.max_relative);
    reps.push_back({{"replica", r},
                    {"max_relative", k.max_relative},
                    {"max_abs", k.max_abs},
                    {"worst_step", k.worst_step},
                    {"worst_function", k.worst_function},
                    {"pass", k.pass}});
  }
  return {{"check", "ks"}, {"tolerance", c.tolerances.ks}, {"max_relative", worst},
          {"replicas", reps}, {"pass", pass}};
}

json check_martingale(const RunConfig& c, const CoefficientsPtr& coeffs, Output& out) {
  if (c.M_Y < 30) throw ConfigError("config field 'M_Y' must be at least 30 for the martingale check");
  std::vector<double> masses;
  Csv table({"replica", "terminal_mass"});
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    SimulationConfig s = simulation_config(c, coeffs, r, 0);
    s.record_stride = s.steps();
    const Trajectory tr = simulate_canonical(s);
    masses.push_back(tr.nu.back().total_mass());
    table.row(r, masses.back());
  }
  out.csv("martingale_masses.csv", table);
  const MartingaleReport m = martingale_check(masses, c.tolerances.martingale_z);
  return {{"check", "martingale"}, {"mean", m.mean}, {"standard_error", m.standard_error},
          {"z", num(m.z)}, {"replicas", m.replicas}, {"threshold", m.threshold},
          {"pass", m.pass}};
}

json check_zakai(const RunConfig& c, const CoefficientsPtr& coeffs,
                 const TestFunctionBasis& basis, Output& out) {
  Csv terminal({"replica", "function", "name", "residual_T", "standard_error", "z",
                "predicted_scale"});
  Csv paths({"replica", "function", "step", "t", "residual"});
  std::size_t within = 0, total = 0;
  json per = json::array();
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    SimulationConfig s = simulation_config(c, coeffs, r, 0);
    s.record_stride = 1;
    const Trajectory tr = simulate_canonical(s);
    const auto reports = zakai_residuals(tr, *coeffs, basis.functions(),
                                         residual_options(c, c.tolerances.zakai_z));
    std::size_t ok = 0;
    for (std::size_t j = 0; j < reports.size(); ++j) {
      const auto& rep = reports[j];
      if (rep.pass) ++ok;
      terminal.row(r, j, "\"" + rep.id + "\"", rep.terminal, rep.standard_error,
                   rep.standardized, rep.predicted_scale);
      for (std::size_t k = 0; k < rep.residual.size(); k += c.record_stride) {
        paths.row(r, j, k, rep.times[k], rep.residual[k]);
      }
      if ((rep.residual.size() - 1) % c.record_stride != 0) {
        const std::size_t k = rep.residual.size() - 1;
        paths.row(r, j, k, rep.times[k], rep.residual[k]);
      }
    }
    within += ok;
    total += reports.size();
    per.push_back({{"replica", r},
                   {"within_threshold", ok},
                   {"functions", reports.size()},
                   {"terminal_rms", terminal_rms(reports)}});
  }
  out.csv("zakai_terminal.csv", terminal);
  out.csv("zakai_paths.csv", paths);
  const double frac = static_cast<double>(within) / static_cast<double>(total);
  return {{"check", "zakai"}, {"fraction_within", frac},
          {"required_fraction", c.tolerances.zakai_fraction},
          {"threshold", c.tolerances.zakai_z}, {"replicas", per},
          {"pass", frac >= c.tolerances.zakai_fraction}};
}

json check_cfpe(const RunConfig& c, const CoefficientsPtr& coeffs,
                const TestFunctionBasis& basis, Output&) {
  const auto members = law_members(c, coeffs);
  std::vector<const Trajectory*> ptrs;
  for (const auto& m : members) ptrs.push_back(&m);
  const EmpiricalLaw law(ptrs);
  const TestFunctionPtr psi = basis.ptr(c.cfpe.function);
  const CylindricalFunction F = c.cfpe.outer == "square" ? CylindricalFunction::square(psi)
                                                         : CylindricalFunction::identity(psi);
  const ResidualReport rep = cfpe_residual(law, F, *coeffs, residual_options(c, c.tolerances.cfpe_z));

  // Dirac reduction: one member, linear F, against the Zakai residual.
  const EmpiricalLaw single({&members.front()});
  ResidualOptions none = residual_options(c, c.tolerances.cfpe_z);
  none.bootstrap_resamples = 0;
  const ResidualReport lin =
      cfpe_residual(single, CylindricalFunction::identity(psi), *coeffs, none);
  const ResidualReport zk = zakai_residual(members.front(), *coeffs, *psi, none);
  double gap = 0.0;
  for (std::size_t k = 0; k < lin.residual.size(); ++k) {
    gap = std::max(gap, std::abs(lin.residual[k] - zk.residual[k]));
  }
  const bool pass = rep.pass && gap <= c.tolerances.dirac_gap;
  return {{"check", "cfpe"}, {"members", law.size()}, {"outer", c.cfpe.outer},
          {"residual", residual_json(rep)}, {"dirac_gap", gap},
          {"dirac_tolerance", c.tolerances.dirac_gap}, {"pass", pass}};
}

json check_rinf(const RunConfig& c, const CoefficientsPtr& coeffs,
                const TestFunctionBasis& basis, Output&) {
  SimulationConfig s = simulation_config(c, coeffs, 0, 0);
  s.record_stride = 1;
  const Trajectory tr = simulate_canonical(s);
  const RinfReport r = rinf_sde_residual(tr, *coeffs, basis, c.K, c.tolerances.rinf);
  json reps = json::array();
  for (const auto& rep : r.reports) reps.push_back(residual_json(rep));
  return {{"check", "rinf"}, {"K", c.K}, {"max_identity_gap", r.max_identity_gap},
          {"max_alpha_gamma_gap", r.max_alpha_gamma_gap},
          {"max_alpha_asymmetry", r.max_alpha_asymmetry},
          {"min_alpha_eigenvalue", r.min_alpha_eigenvalue}, {"tolerance", r.tolerance},
          {"residuals", reps}, {"pass", r.pass}};
}

json check_lyapunov(const RunConfig& c, const CoefficientsPtr& coeffs, Output& out) {
  std::vector<Trajectory> trs;
  trs.reserve(c.M_Y);
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    trs.push_back(simulate_canonical(simulation_config(c, coeffs, r, 0)));
  }
  const double K = c.lyapunov.K_const < 0.0 ? coeffs->bounds().c_lip : c.lyapunov.K_const;
  const LyapunovReport L = lyapunov_decay(trs, c.lyapunov.delta, *coeffs, K,
                                          c.tolerances.lyapunov_uptick);
  Csv table({"t", "functional", "raw_norm"});
  for (std::size_t s = 0; s < L.times.size(); ++s) table.row(L.times[s], L.functional[s], L.raw_norm[s]);
  out.csv("lyapunov.csv", table);
  return {{"check", "lyapunov"}, {"alpha", L.alpha}, {"K_const", L.K_const},
          {"delta", L.delta}, {"max_uptick", L.max_uptick}, {"tolerance", L.tolerance},
          {"replicas", L.replicas}, {"pass", L.pass}};
}

json check_regularity(const RunConfig& c, const CoefficientsPtr& coeffs, Output&) {
  const auto members = law_members(c, coeffs);
  std::vector<const Trajectory*> ptrs;
  for (const auto& m : members) ptrs.push_back(&m);
  const RegularityReport R = regularity_phi(EmpiricalLaw(ptrs), *coeffs, c.regularity_p);
  return {{"check", "regularity"}, {"p", R.p}, {"phi_T", num(R.phi_T)},
          {"finite", R.finite}, {"pass", R.finite}};
}

json check_roundtrip(const RunConfig& c, const CoefficientsPtr& coeffs,
                     const TestFunctionBasis& basis, Output& out) {
  RoundtripOptions o;
  o.K = c.roundtrip.K;
  o.delta = c.roundtrip.delta;
  o.fresh_b1 = c.roundtrip.fresh_b1;
  o.mollified_max_N = c.roundtrip.mollified_max_N;
  const RoundtripReport R =
      roundtrip_check(simulation_config(c, coeffs, 0, 0), c.roundtrip.N_list, c.M_Y, basis, o);
  Csv table({"N", "replica", "metric_d", "mollified_distance"});
  json rows = json::array();
  for (const auto& row : R.rows) {
    for (std::size_t r = 0; r < row.metric_d.size(); ++r) {
      table.row(row.N, r, row.metric_d[r], row.mollified[r]);
    }
    rows.push_back({{"N", row.N},
                    {"median_metric_d", num(row.median_metric_d)},
                    {"median_mollified", num(row.median_mollified)}});
  }
  out.csv("roundtrip.csv", table);
  return {{"check", "roundtrip"}, {"rows", rows}, {"nonincreasing", R.nonincreasing},
          {"strictly_decreasing", R.strictly_decreasing}, {"pass", R.pass}};
}

json witness_json(const ProbeWitness& w) {
  return {{"t", w.t}, {"y", w.y}, {"x", w.x}, {"x_prime", w.x_prime},
          {"w1", w.w1}, {"mode", w.mode}};
}

json check_lipschitz_json(const RunConfig& c, const CoefficientsPtr& coeffs) {
  const LipschitzReport L =
      check_lipschitz(*coeffs, c.validator_probes, c.seed, c.tolerances.lipschitz);
  return {{"check", "lipschitz"}, {"declared_c_lip", L.declared_c_lip},
          {"max_ratio", L.max_ratio}, {"ratio_b", L.ratio_b}, {"ratio_sigma", L.ratio_sigma},
          {"ratio_rho", L.ratio_rho}, {"ratio_h", L.ratio_h},
          {"worst_component", L.worst_component}, {"witness", witness_json(L.witness)},
          {"tolerance", L.tolerance}, {"probes", L.probes}, {"pass", L.pass}};
}

json check_nondegeneracy_json(const RunConfig& c, const CoefficientsPtr& coeffs) {
  const NondegeneracyReport N = check_nondegeneracy(*coeffs, c.validator_probes, c.seed);
  return {{"check", "nondegeneracy"}, {"declared_sigma0", N.declared_sigma0},
          {"min_eigenvalue", N.min_eigenvalue}, {"witness", witness_json(N.witness)},
          {"probes", N.probes}, {"pass", N.pass}};
}

void aggregate(Output& out, const std::string& dir, RunResult& result, json& checks) {
  std::vector<fs::path> reports;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("report_", 0) == 0 && e.path().extension() == ".json") reports.push_back(e.path());
  }
  std::sort(reports.begin(), reports.end());
  for (const auto& p : reports) {
    std::ifstream in(p);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw IoError("cannot parse report '" + p.string() + "': " + e.what());
    }
    if (!j.contains("config_hash") || j["config_hash"] != out.hash()) {
      throw ConfigError("report '" + p.filename().string() +
                        "' was produced by a different config (hash mismatch); refusing to aggregate");
    }
    const std::string name = j.value("check", p.stem().string());
    const bool pass = j.value("pass", false);
    checks[name] = pass;
    if (!pass) {
      result.pass = false;
      result.failures.push_back(name);
    }
  }
}

}  // namespace

RunResult cmd_simulate(const RunConfig& c, const std::string& out_dir) {
  Output out(c, out_dir);
  const CoefficientsPtr coeffs = build_coefficients(c);
  std::vector<std::string> header{"replica", "nu_index", "step", "t", "y", "mass", "ess"};
  for (int a = 0; a < c.dim; ++a) header.push_back("mean_" + std::to_string(a));
  Csv traj(header);
  std::vector<std::string> atoms_header{"replica", "nu_index", "particle"};
  for (int a = 0; a < c.dim; ++a) atoms_header.push_back("x_" + std::to_string(a));
  atoms_header.push_back("log_weight");
  Csv atoms(atoms_header);
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    for (std::size_t j = 0; j < c.M_nu; ++j) {
      const Trajectory tr = simulate_canonical(simulation_config(c, coeffs, r, j));
      for (std::size_t s = 0; s < tr.nu.size(); ++s) {
        const std::size_t k = tr.recorded_steps[s];
        std::ostringstream line;
        line << r << ',' << j << ',' << k << ',' << fmt(tr.time(k)) << ','
             << fmt(tr.y_path.y[k]) << ',' << fmt(tr.nu[s].total_mass()) << ','
             << fmt(ess_of(tr.nu[s]));
        for (int a = 0; a < c.dim; ++a) line << ',' << fmt(weighted_mean(tr.nu[s], a));
        traj.row(line.str());
      }
      const EnsembleState& fs_ = tr.final_state;
      for (std::size_t i = 0; i < fs_.size(); ++i) {
        std::ostringstream line;
        line << r << ',' << j << ',' << i;
        for (int a = 0; a < c.dim; ++a) line << ',' << fmt(fs_.x[i * c.dim + a]);
        line << ',' << fmt(fs_.log_w[i]);
        atoms.row(line.str());
      }
    }
  }
  out.csv("trajectory.csv", traj);
  out.csv("final_atoms.csv", atoms);
  RunResult result;
  out.manifest("simulate", result);
  return result;
}

RunResult cmd_verify(const RunConfig& c, const std::string& out_dir) {
  Output out(c, out_dir);
  const CoefficientsPtr coeffs = build_coefficients(c);
  const TestFunctionBasis basis = build_basis(c);
  for (const auto& name : c.checks) {
    json rep;
    if (name == "ks") rep = check_ks(c, coeffs, basis, out);
    else if (name == "martingale") rep = check_martingale(c, coeffs, out);
    else if (name == "zakai") rep = check_zakai(c, coeffs, basis, out);
    else if (name == "cfpe") rep = check_cfpe(c, coeffs, basis, out);
    else if (name == "rinf") rep = check_rinf(c, coeffs, basis, out);
    else if (name == "lyapunov") rep = check_lyapunov(c, coeffs, out);
    else if (name == "regularity") rep = check_regularity(c, coeffs, out);
    else if (name == "roundtrip") rep = check_roundtrip(c, coeffs, basis, out);
    else if (name == "lipschitz") rep = check_lipschitz_json(c, coeffs);
    else if (name == "nondegeneracy") rep = check_nondegeneracy_json(c, coeffs);
    else throw ConfigError("config field 'checks' names an unknown check '" + name + "'");
    out.report("report_" + name + ".json", rep);
  }
  RunResult result;
  json checks = json::object();
  aggregate(out, out_dir, result, checks);
  out.report("summary.json", {{"checks", checks}, {"failures", result.failures},
                              {"pass", result.pass}});
  out.manifest("verify", result);
  return result;
}

RunResult cmd_oracle(const RunConfig& c, const std::string& out_dir) {
  if (c.family != "linear_gaussian" && c.family != "meanfield_linear" &&
      c.family != "common_noise") {
    throw ConfigError("config field 'family' must be a linear family for the oracle command");
  }
  if (c.dim != 1) throw ConfigError("config field 'dim' must be 1 for the oracle command");
  Output out(c, out_dir);
  const CoefficientsPtr coeffs = build_coefficients(c);
  const json p = json::parse(coeffs->description())["params"];
  LinearModel model;
  model.a = p.at("a").get<double>();
  model.sigma = p.at("sigma")[0][0].get<double>();
  model.rho = p.at("rho")[0].get<double>();
  model.c = p.contains("c") ? p.at("c").get<double>() : 0.0;
  const double abar = p.contains("abar") ? p.at("abar").get<double>() : 0.0;
  KalmanState init;
  init.m = c.x0.mean.empty() ? 0.0 : c.x0.mean[0];
  init.P = c.x0.kind == InitialLaw::Kind::kGaussian ? c.x0.stddev * c.x0.stddev : 0.0;

  Csv table({"replica", "step", "t", "particle_mean", "kalman_mean", "mean_error",
             "particle_var", "kalman_var", "var_error", "bootstrap_se", "z"});
  RunResult result;
  json reps = json::array();
  for (std::size_t r = 0; r < c.M_Y; ++r) {
    const Trajectory tr = simulate_canonical(simulation_config(c, coeffs, r, 0));
    const KalmanPath kf = meanfield_linear_mean(model, abar, init, tr.y_path, c.oracle_substeps);
    auto eng = make_engine(StreamId{c.seed, r, 0, 0}, StreamTag::kBootstrap, 1);
    double sum_abs = 0.0, sum_se = 0.0, sum_e2 = 0.0, sum_m2 = 0.0, max_z = 0.0;
    for (std::size_t s = 0; s < tr.nu.size(); ++s) {
      const auto& nu = tr.nu[s];
      const std::size_t k = tr.recorded_steps[s];
      const std::size_t n = nu.size();
      CompensatedSum w, wx, wxx;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = nu.atom(i)[0];
        w.add(nu.weight(i));
        wx.add(nu.weight(i) * x);
        wxx.add(nu.weight(i) * x * x);
      }
      const double mean = wx.value() / w.value();
      const double var = std::max(0.0, wxx.value() / w.value() - mean * mean);
      std::vector<double> boot;
      if (c.bootstrap > 0 && k > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t b = 0; b < c.bootstrap; ++b) {
          CompensatedSum bw, bx;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t q = pick(eng);
            bw.add(nu.weight(q));
            bx.add(nu.weight(q) * nu.atom(q)[0]);
          }
          boot.push_back(bx.value() / bw.value());
        }
      }
      double se = 0.0;
      if (boot.size() > 1) {
        double bm = 0.0;
        for (double v : boot) bm += v;
        bm /= static_cast<double>(boot.size());
        double q = 0.0;
        for (double v : boot) q += (v - bm) * (v - bm);
        se = std::sqrt(q / static_cast<double>(boot.size() - 1));
      }
      const double err = mean - kf.m[k];
      const double z = standardize(err, se);
      table.row(r, k, tr.time(k), mean, kf.m[k], err, var, kf.P[k], var - kf.P[k], se, z);
      sum_abs += std::abs(err);
      sum_se += se;
      sum_e2 += err * err;
      sum_m2 += kf.m[k] * kf.m[k];
      max_z = std::max(max_z, std::abs(z));
    }
    const double S = static_cast<double>(tr.nu.size());
    const double avg_abs = sum_abs / S;
    const double avg_se = sum_se / S;
    const double rel_l2 = sum_m2 > 0.0 ? std::sqrt(sum_e2 / sum_m2) : std::sqrt(sum_e2 / S);
    const bool pass = avg_abs <= c.tolerances.oracle_se * avg_se &&
                      rel_l2 <= c.tolerances.oracle_rel_l2;
    if (!pass) {
      result.pass = false;
      result.failures.push_back("replica:" + std::to_string(r));
    }
    reps.push_back({{"replica", r}, {"mean_abs_error", avg_abs}, {"mean_bootstrap_se", avg_se},
                    {"relative_l2_error", rel_l2}, {"max_abs_z", num(max_z)},
                    {"pass", pass}});
  }
  out.csv("oracle.csv", table);
  out.report("report_oracle.json", {{"check", "oracle"}, {"replicas", reps},
                                    {"se_factor", c.tolerances.oracle_se},
                                    {"rel_l2_tolerance", c.tolerances.oracle_rel_l2},
                                    {"pass", result.pass}});
  out.manifest("oracle", result);
  return result;
}

RunResult cmd_sweep(const RunConfig& c, const std::string& out_dir) {
  Output out(c, out_dir);
  const CoefficientsPtr coeffs = build_coefficients(c);
  DyadicBasisOptions bo;
  bo.half_width = c.basis.half_width;
  bo.base_radius = c.sweep.base_radius;
  const TestFunctionBasis basis = make_dyadic_basis(c.dim, c.sweep.functions, bo);
  ResidualOptions none = residual_options(c, c.tolerances.zakai_z);
  none.bootstrap_resamples = 0;

  auto rms_of = [&](const RunConfig& rc, std::size_t functions) {
    CompensatedSum acc;
    std::size_t count = 0;
    const auto fns = basis.prefix(functions).functions();
    for (std::size_t r = 0; r < rc.M_Y; ++r) {
      SimulationConfig s = simulation_config(rc, coeffs, r, 0);
      s.record_stride = 1;
      const Trajectory tr = simulate_canonical(s);
      for (const auto& rep : zakai_residuals(tr, *coeffs, fns, none)) {
        acc.add(rep.terminal * rep.terminal);
        ++count;
      }
    }
    return std::sqrt(acc.value() / static_cast<double>(count));
  };

  Csv table({"axis", "value", "residual_rms", "replicas", "functions"});
  std::vector<double> xs, ys;
  for (double v : c.sweep.values) {
    RunConfig rc = c;
    std::size_t functions = c.sweep.functions;
    if (c.sweep.axis == "N") {
      if (v != std::floor(v) || v < 2) throw ConfigError("config field 'sweep.values' must hold integer N >= 2");
      rc.N = static_cast<std::size_t>(v);
    } else if (c.sweep.axis == "dt") {
      rc.dt = v;
      validate_config(rc);
    } else {
      if (v != std::floor(v) || v > static_cast<double>(c.sweep.functions)) {
        throw ConfigError("config field 'sweep.values' must hold integer K <= sweep.functions");
      }
      functions = static_cast<std::size_t>(v);
    }
    const double rms = rms_of(rc, functions);
    table.row(c.sweep.axis, v, rms, c.M_Y, functions);
    xs.push_back(v);
    ys.push_back(rms);
  }
  out.csv("sweep.csv", table);
  const double slope = loglog_slope(xs, ys);
  const bool gated = c.sweep.gate_slope && c.sweep.axis == "N";
  const bool pass = !gated || (slope >= c.sweep.slope_min && slope <= c.sweep.slope_max);
  RunResult result;
  result.pass = pass;
  if (!pass) result.failures.push_back("sweep_slope");
  out.report("report_sweep.json", {{"check", "sweep"}, {"axis", c.sweep.axis},
                                   {"values", c.sweep.values}, {"residual_rms", num_array(ys)},
                                   {"slope", slope}, {"gated", gated},
                                   {"slope_min", c.sweep.slope_min},
                                   {"slope_max", c.sweep.slope_max}, {"pass", pass}});
  out.manifest("sweep", result);
  return result;
}

RunResult run_command(const std::string& command, const RunConfig& config,
                      const std::string& out_dir) {
  if (command == "simulate") return cmd_simulate(config, out_dir);
  if (command == "verify") return cmd_verify(config, out_dir);
  if (command == "oracle") return cmd_oracle(config, out_dir);
  if (command == "sweep") return cmd_sweep(config, out_dir);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace cmv
