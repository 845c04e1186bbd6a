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

#ifndef CMV_MEASURE_HPP
#define CMV_MEASURE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cmv/basis.hpp"

namespace cmv {

inline constexpr int kMaxDim = 8;
inline constexpr double kMassEpsilon = 1e-12;

/// Finite positive measure on R^d stored as atoms (row-major positions) and
/// nonnegative weights.
class WeightedAtomMeasure {
 public:
  WeightedAtomMeasure() = default;
  WeightedAtomMeasure(int dim, std::vector<double> positions,
                      std::vector<double> weights);

  static WeightedAtomMeasure dirac(std::span<const double> x,
                                   double weight = 1.0);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }

  const double* atom(std::size_t i) const { return &positions_[i * dim_]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& weights() const { return weights_; }

  double total_mass() const;

  /// a*this + b*other as the union of atoms.
  WeightedAtomMeasure combine(double a, const WeightedAtomMeasure& other,
                              double b) const;

 protected:
  int dim_ = 0;
  std::vector<double> positions_;
  std::vector<double> weights_;
};

/// Weighted atoms whose weights sum to one within 1e-12.
class ProbabilityAtomMeasure : public WeightedAtomMeasure {
 public:
  ProbabilityAtomMeasure() = default;
  ProbabilityAtomMeasure(int dim, std::vector<double> positions,
                         std::vector<double> weights);

  static ProbabilityAtomMeasure uniform(int dim, std::vector<double> positions);
};

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      c_ += (sum_ - t) + v;
    } else {
      c_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// Sum_i w_i phi(x_i).
double pair(const WeightedAtomMeasure& nu, const TestFunction& phi);

/// Weights divided by total mass. Throws WeightDegeneracy when the mass is
/// at or below `mass_threshold`.
ProbabilityAtomMeasure normalize(const WeightedAtomMeasure& nu,
                                 double mass_threshold = kMassEpsilon);

struct W1Options {
  int projections = 64;
  std::uint64_t seed = 0x5eed5eedULL;
};

struct W1Result {
  double value = 0.0;
  bool approximate = false;
  int projections = 0;
};

/// Exact in d = 1 (quantile coupling); sliced approximation for d > 1.
W1Result wasserstein1_detailed(const ProbabilityAtomMeasure& mu1,
                               const ProbabilityAtomMeasure& mu2,
                               const W1Options& options = {});

double wasserstein1(const ProbabilityAtomMeasure& mu1,
                    const ProbabilityAtomMeasure& mu2,
                    const W1Options& options = {});

/// Exact 1-D W1 between weighted point sets whose weights each sum to 1.
double wasserstein1_1d(std::span<const double> x, std::span<const double> wx,
                       std::span<const double> y, std::span<const double> wy);

struct TruncatedMetric {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Sum_{k<=K} (|<nu1,phi_k> - <nu2,phi_k>| ^ 1) / 2^k with tail bound 2^-K.
TruncatedMetric metric_d(const WeightedAtomMeasure& nu1,
                         const WeightedAtomMeasure& nu2, std::size_t K,
                         const TestFunctionBasis& basis);

/// (<nu,phi_1>, ..., <nu,phi_K>).
std::vector<double> project_T(const WeightedAtomMeasure& nu, std::size_t K,
                              const TestFunctionBasis& basis);

double d_infinity(std::span<const double> z1, std::span<const double> z2,
                  std::size_t K);

/// Closed form of <G_delta * nu1, G_delta * nu2>_{L2}.
double mollified_inner(const WeightedAtomMeasure& nu1,
                       const WeightedAtomMeasure& nu2, double delta);

double mollified_l2_distance(const WeightedAtomMeasure& nu1,
                             const WeightedAtomMeasure& nu2, double delta);

/// Gaussian kernel G_delta(x) = (2 pi delta)^{-d/2} exp(-|x|^2 / (2 delta)).
double gaussian_kernel(std::span<const double> x, double delta);

}  // namespace cmv

#endif  // CMV_MEASURE_HPP
