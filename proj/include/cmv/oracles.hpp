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

#ifndef CMV_ORACLES_HPP
#define CMV_ORACLES_HPP

#include <vector>

#include "cmv/measure.hpp"
#include "cmv/particles.hpp"

namespace cmv {

struct KalmanState {
  double m = 0.0;
  double P = 0.0;
};

/// Filter paths on the nodes of the observation grid.
struct KalmanPath {
  std::vector<double> t;
  std::vector<double> m;
  std::vector<double> P;
};

struct LinearModel {
  double a = 0.0;
  double sigma = 1.0;
  double rho = 0.0;
  double c = 1.0;
};

/// Kalman-Bucy filter for dX = aX dt + sigma dB1 + rho dB2, dY = cX dt + dB2
/// under the physical measure. Riccati by RK4 with `substeps` per grid step,
/// the mean by Euler on the observation grid.
KalmanPath kalman_bucy_correlated(const LinearModel& model, KalmanState init,
                                  const ObservationPath& y,
                                  int substeps = 10);

/// Conditional mean with mean-field drift a x + abar <mu, id>; the variance
/// is the Riccati solution with `a` alone.
KalmanPath meanfield_linear_mean(const LinearModel& model, double abar,
                                 KalmanState init, const ObservationPath& y,
                                 int substeps = 10);

/// Right-hand side of the Riccati equation.
double riccati_rhs(const LinearModel& model, double P);

/// Exact W1 between probability measures with at most 8 atoms each, by
/// min-cost flow on the bipartite transport graph with Euclidean cost.
double w1_bruteforce(const ProbabilityAtomMeasure& mu1,
                     const ProbabilityAtomMeasure& mu2);

/// int (G_delta * nu1)(x) (G_delta * nu2)(x) dx by adaptive Gauss-Kronrod on
/// a padded box; d <= 2.
double quadrature_mollified(const WeightedAtomMeasure& nu1,
                            const WeightedAtomMeasure& nu2, double delta,
                            double tolerance = 1e-11);

}  // namespace cmv

#endif  // CMV_ORACLES_HPP
