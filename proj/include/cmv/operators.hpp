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

#ifndef CMV_OPERATORS_HPP
#define CMV_OPERATORS_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmv/basis.hpp"
#include "cmv/coefficients.hpp"
#include "cmv/measure.hpp"

namespace cmv {

/// L phi = 1/2 tr[(sigma sigma^T + rho rho^T) D^2 phi] + b . grad phi.
double apply_L(const TestFunction& phi, std::span<const double> x,
               const ObsContext& obs, const ProbabilityAtomMeasure* mu,
               const CoefficientSet& coeffs);

/// H phi = rho . grad phi + h phi.
double apply_H(const TestFunction& phi, std::span<const double> x,
               const ObsContext& obs, const ProbabilityAtomMeasure* mu,
               const CoefficientSet& coeffs);

/// Both operators from precomputed coefficient values; `value` receives
/// phi(x) when non-null.
void apply_LH(const TestFunction& phi, const double* x, const CoeffValues& c,
              int dim, double& L, double& H, double* value = nullptr);

/// Operators from a precomputed value/gradient/Hessian triple.
double apply_L_from(const double* grad, const double* hess,
                    const CoeffValues& c, int dim);
double apply_H_from(double value, const double* grad, const CoeffValues& c,
                    int dim);

/// Scalar function on R^n with gradient and row-major Hessian.
struct SmoothFunction {
  int n = 0;
  std::function<double(std::span<const double>)> f;
  std::function<void(std::span<const double>, double*)> grad;
  std::function<void(std::span<const double>, double*)> hess;
  std::string name = "f";
};

/// F(nu) = f(<nu, psi_1>, ..., <nu, psi_k>).
class CylindricalFunction {
 public:
  CylindricalFunction(std::vector<TestFunctionPtr> psi, SmoothFunction outer);

  static CylindricalFunction identity(TestFunctionPtr psi);
  static CylindricalFunction square(TestFunctionPtr psi);
  static CylindricalFunction constant(TestFunctionPtr psi, double c);
  /// f(u) = 1/2 u^T A u + b^T u + c.
  static CylindricalFunction quadratic(std::vector<TestFunctionPtr> psi,
                                       std::vector<double> A,
                                       std::vector<double> b, double c);

  std::size_t k() const { return psi_.size(); }
  int dim() const { return psi_.front()->dim(); }
  const TestFunction& psi(std::size_t i) const { return *psi_[i]; }
  const std::vector<TestFunctionPtr>& psi_list() const { return psi_; }
  const SmoothFunction& outer() const { return outer_; }
  std::string name() const;

  std::vector<double> inner(const WeightedAtomMeasure& nu) const;
  double operator()(const WeightedAtomMeasure& nu) const;
  double f(std::span<const double> u) const { return outer_.f(u); }
  std::vector<double> grad(std::span<const double> u) const;
  std::vector<double> hess(std::span<const double> u) const;

 private:
  std::vector<TestFunctionPtr> psi_;
  SmoothFunction outer_;
};

/// Stacked (d+1)-dimensional L-derivatives of a cylinder function.
struct LDerivative {
  Eigen::VectorXd d_mu;    // sum_i f_i D psi_i(x), D psi = (grad psi, psi)
  Eigen::MatrixXd dx_dmu;  // sum_i f_i D^2 psi_i(x); last column zero
  Eigen::MatrixXd d2_mu;   // sum_ij f_ij D psi_i(x) D psi_j(x')^T
};

LDerivative l_derivative_cylinder(const CylindricalFunction& F,
                                  const WeightedAtomMeasure& nu,
                                  std::span<const double> x,
                                  std::span<const double> x_prime);

/// Measure-space generator of F at n, assembled from the L-derivatives; the
/// double integral uses the rank-one structure of H H^T.
double generator_measure(const CylindricalFunction& F,
                         const WeightedAtomMeasure& n, const ObsContext& obs,
                         const CoefficientSet& coeffs);

/// Same quantity through the explicit cylinder expansion
/// sum_i f_i <n, L psi_i> + 1/2 sum_ij f_ij <n, H psi_i><n, H psi_j>.
double generator_measure_expanded(const CylindricalFunction& F,
                                  const WeightedAtomMeasure& n,
                                  const ObsContext& obs,
                                  const CoefficientSet& coeffs);

/// Per-atom coefficient values at m = normalize(n).
std::vector<CoeffValues> evaluate_on_atoms(const WeightedAtomMeasure& n,
                                           const ObsContext& obs,
                                           const CoefficientSet& coeffs,
                                           double mass_threshold = kMassEpsilon);

struct LiftedCoefficients {
  std::vector<double> beta;   // <n, L phi_i>
  std::vector<double> gamma;  // <n, H phi_i>
  Eigen::MatrixXd alpha;      // gamma gamma^T
};

LiftedCoefficients lifted_coefficients(const WeightedAtomMeasure& n,
                                       const ObsContext& obs,
                                       const CoefficientSet& coeffs,
                                       const TestFunctionBasis& basis,
                                       std::size_t K);

struct AlphaBetaGamma {
  double alpha_ij = 0.0;
  double beta_i = 0.0;
  double gamma_i = 0.0;
};

/// z is bookkeeping only: it must equal project_T(n) on its first entries.
AlphaBetaGamma alpha_beta_gamma(const ObsContext& obs,
                                std::span<const double> z,
                                const CoefficientSet& coeffs,
                                const TestFunctionBasis& basis, std::size_t i,
                                std::size_t j, const WeightedAtomMeasure& n);

/// A f = 1/2 sum f_{z_i z_j} alpha_ij + sum f_{z_i} beta_i + 1/2 f_{yy} for f
/// on R^{k+1} with argument order (z_1, ..., z_k, ybar).
double generator_A(const SmoothFunction& f, const ObsContext& obs,
                   std::span<const double> z, const WeightedAtomMeasure& n,
                   const CoefficientSet& coeffs,
                   const TestFunctionBasis& basis);

}  // namespace cmv

#endif  // CMV_OPERATORS_HPP
