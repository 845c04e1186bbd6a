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

#ifndef CMV_COEFFICIENTS_HPP
#define CMV_COEFFICIENTS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmv/measure.hpp"

namespace cmv {

enum class YDependence { kState, kPathPrefix };
enum class MuDependence { kNone, kState };

/// Observation state handed to the coefficients: time, Y_t, the running
/// integral of Y and (optionally) the discrete Y prefix up to t.
struct ObsContext {
  double t = 0.0;
  double y = 0.0;
  double y_integral = 0.0;
  std::span<const double> y_prefix{};
};

/// b (d), sigma (d x d row-major), rho (d x 1), h (scalar).
struct CoeffValues {
  double b[kMaxDim] = {};
  double sigma[kMaxDim * kMaxDim] = {};
  double rho[kMaxDim] = {};
  double h = 0.0;
};

/// Constants declared by a coefficient family. C1/C2 entries are sup-norms
/// of the function plus its derivatives on the declared domain.
struct DeclaredBounds {
  double c_lip = 0.0;
  double sigma0 = 0.0;
  double b_sup = 0.0;
  double sigma_sup = 0.0;
  double rho_sup = 0.0;
  double h_sup = 0.0;
  double b_c1 = 0.0;
  double h_c1 = 0.0;
  double rho_c2 = 0.0;
  double sigma_c2 = 0.0;

  /// ||b||_C1 + ||h||_C1 + ||rho||_C2^2 + ||sigma||_C2^2.
  double lyapunov_alpha() const {
    return b_c1 + h_c1 + rho_c2 * rho_c2 + sigma_c2 * sigma_c2;
  }
};

/// Evaluable (b, sigma, rho, h). Measure dependence goes through a feature
/// vector computed once per measure, so per-particle evaluation stays cheap.
/// Implementations must be reentrant.
class CoefficientSet {
 public:
  CoefficientSet(std::string family, int dim, YDependence y_dep,
                 MuDependence mu_dep, DeclaredBounds bounds,
                 std::string description);
  virtual ~CoefficientSet() = default;

  const std::string& family() const { return family_; }
  int dim() const { return dim_; }
  YDependence y_dependence() const { return y_dep_; }
  MuDependence mu_dependence() const { return mu_dep_; }
  const DeclaredBounds& bounds() const { return bounds_; }
  /// Canonical JSON describing family, parameters and declared constants.
  const std::string& description() const { return description_; }
  /// Git-style SHA-1 of description().
  std::string content_hash() const;
  bool oracle_only() const { return oracle_only_; }

  virtual std::vector<double> features(const ProbabilityAtomMeasure& mu) const;

  /// Evaluates and checks finiteness; throws CoefficientError with location.
  void eval(double t, const double* x, const ObsContext& obs,
            std::span<const double> features, CoeffValues& out) const;

  /// Convenience form taking the measure itself.
  CoeffValues eval(double t, std::span<const double> x, const ObsContext& obs,
                   const ProbabilityAtomMeasure* mu) const;

 protected:
  virtual void evaluate(double t, const double* x, const ObsContext& obs,
                        std::span<const double> features,
                        CoeffValues& out) const = 0;
  void set_oracle_only(bool v) { oracle_only_ = v; }

 private:
  std::string family_;
  int dim_;
  YDependence y_dep_;
  MuDependence mu_dep_;
  DeclaredBounds bounds_;
  std::string description_;
  bool oracle_only_ = false;
};

using CoefficientsPtr = std::shared_ptr<const CoefficientSet>;

/// Coefficients given by callables; for tests and embedding.
class LambdaCoefficients final : public CoefficientSet {
 public:
  using EvalFn = std::function<void(double, const double*, const ObsContext&,
                                    std::span<const double>, CoeffValues&)>;
  using FeatureFn =
      std::function<std::vector<double>(const ProbabilityAtomMeasure&)>;

  LambdaCoefficients(int dim, EvalFn eval, FeatureFn features = {},
                     DeclaredBounds bounds = {},
                     YDependence y_dep = YDependence::kState,
                     std::string name = "lambda");

  std::vector<double> features(const ProbabilityAtomMeasure& mu) const override;

 protected:
  void evaluate(double t, const double* x, const ObsContext& obs,
                std::span<const double> features,
                CoeffValues& out) const override;

 private:
  EvalFn eval_;
  FeatureFn features_;
};

/// Builds a named family from a JSON parameter object. Known families:
/// constant, common_noise, linear_gaussian, meanfield_linear, bounded_smooth.
/// An optional "declared" object overrides any DeclaredBounds entry.
CoefficientsPtr make_coefficients(const std::string& family, int dim,
                                  const std::string& params_json);

std::vector<std::string> coefficient_families();

/// Mean of a probability measure, the feature used by mean-field families.
std::vector<double> measure_mean(const ProbabilityAtomMeasure& mu);

struct ProbeWitness {
  double t = 0.0;
  double y = 0.0;
  std::vector<double> x;
  std::vector<double> x_prime;
  double w1 = 0.0;
  std::string mode;
};

struct LipschitzReport {
  double max_ratio = 0.0;
  double ratio_b = 0.0;
  double ratio_sigma = 0.0;
  double ratio_rho = 0.0;
  double ratio_h = 0.0;
  std::string worst_component;
  ProbeWitness witness;
  double declared_c_lip = 0.0;
  double tolerance = 0.0;
  std::size_t probes = 0;
  bool pass = false;
};

/// Probe-based estimate of sup |phi(t,x,y,mu) - phi(t,x',y,mu')| /
/// (|x - x'| + W1(mu, mu')) over phi in {b, sigma, rho, h}.
LipschitzReport check_lipschitz(const CoefficientSet& coeffs,
                                std::size_t n_probes, std::uint64_t seed,
                                double tolerance = 0.01);

struct NondegeneracyReport {
  double min_eigenvalue = 0.0;
  ProbeWitness witness;
  double declared_sigma0 = 0.0;
  std::size_t probes = 0;
  bool pass = false;
};

/// Minimum over probes of the smallest eigenvalue of sigma sigma^T - rho rho^T.
NondegeneracyReport check_nondegeneracy(const CoefficientSet& coeffs,
                                        std::size_t n_probes,
                                        std::uint64_t seed);

/// Smallest eigenvalue of sigma sigma^T - rho rho^T at one evaluation.
double nondegeneracy_eigenvalue(const CoeffValues& v, int dim);

/// Probability measures on a strictly increasing time grid, read as
/// piecewise constant: at time t the measure of the last grid point <= t.
class FrozenMuPath {
 public:
  FrozenMuPath(std::vector<double> times,
               std::vector<ProbabilityAtomMeasure> measures);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return measures_.size(); }
  const ProbabilityAtomMeasure& measure(std::size_t k) const {
    return measures_[k];
  }
  const ProbabilityAtomMeasure& at(double t) const;
  int dim() const { return measures_.front().dim(); }

 private:
  std::vector<double> times_;
  std::vector<ProbabilityAtomMeasure> measures_;
};

}  // namespace cmv

#endif  // CMV_COEFFICIENTS_HPP
