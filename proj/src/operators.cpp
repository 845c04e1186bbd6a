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

#include "cmv/operators.hpp"

#include <cmath>
#include <sstream>

#include "cmv/errors.hpp"

namespace cmv {

double apply_L_from(const double* grad, const double* hess,
                    const CoeffValues& c, int d) {
  double tr = 0.0;
  double drift = 0.0;
  for (int a = 0; a < d; ++a) {
    drift += c.b[a] * grad[a];
    for (int b = 0; b < d; ++b) {
      double A = c.rho[a] * c.rho[b];
      for (int e = 0; e < d; ++e) A += c.sigma[a * d + e] * c.sigma[b * d + e];
      tr += A * hess[a * d + b];
    }
  }
  return 0.5 * tr + drift;
}

double apply_H_from(double value, const double* grad, const CoeffValues& c,
                    int d) {
  double s = c.h * value;
  for (int a = 0; a < d; ++a) s += c.rho[a] * grad[a];
  return s;
}

void apply_LH(const TestFunction& phi, const double* x, const CoeffValues& c,
              int d, double& L, double& H, double* value) {
  double v = 0.0;
  double g[kMaxDim];
  double h[kMaxDim * kMaxDim];
  phi.evaluate(x, &v, g, h);
  L = apply_L_from(g, h, c, d);
  H = apply_H_from(v, g, c, d);
  if (value) *value = v;
}

namespace {

CoeffValues eval_point(std::span<const double> x, const ObsContext& obs,
                       const ProbabilityAtomMeasure* mu,
                       const CoefficientSet& coeffs, const TestFunction& phi) {
  if (phi.dim() != coeffs.dim() || static_cast<int>(x.size()) != phi.dim()) {
    throw DimensionError("operator inputs disagree in dimension");
  }
  return coeffs.eval(obs.t, x, obs, mu);
}

}  // namespace

double apply_L(const TestFunction& phi, std::span<const double> x,
               const ObsContext& obs, const ProbabilityAtomMeasure* mu,
               const CoefficientSet& coeffs) {
  const CoeffValues c = eval_point(x, obs, mu, coeffs, phi);
  double L = 0.0, H = 0.0;
  apply_LH(phi, x.data(), c, coeffs.dim(), L, H);
  return L;
}

double apply_H(const TestFunction& phi, std::span<const double> x,
               const ObsContext& obs, const ProbabilityAtomMeasure* mu,
               const CoefficientSet& coeffs) {
  const CoeffValues c = eval_point(x, obs, mu, coeffs, phi);
  double L = 0.0, H = 0.0;
  apply_LH(phi, x.data(), c, coeffs.dim(), L, H);
  return H;
}

// ---- cylinder functions -------------------------------------------------------

CylindricalFunction::CylindricalFunction(std::vector<TestFunctionPtr> psi,
                                         SmoothFunction outer)
    : psi_(std::move(psi)), outer_(std::move(outer)) {
  if (psi_.empty()) throw ParameterError("cylinder function needs k >= 1");
  if (outer_.n != static_cast<int>(psi_.size())) {
    throw DimensionError("outer function arity differs from inner slice");
  }
  for (const auto& p : psi_) {
    if (!p) throw ParameterError("null inner test function");
    if (p->dim() != psi_.front()->dim()) {
      throw DimensionError("inner test functions differ in dimension");
    }
  }
  if (!outer_.f || !outer_.grad || !outer_.hess) {
    throw ParameterError("outer function needs value, gradient and Hessian");
  }
}

CylindricalFunction CylindricalFunction::identity(TestFunctionPtr psi) {
  return quadratic({std::move(psi)}, {0.0}, {1.0}, 0.0);
}

CylindricalFunction CylindricalFunction::square(TestFunctionPtr psi) {
  return quadratic({std::move(psi)}, {2.0}, {0.0}, 0.0);
}

CylindricalFunction CylindricalFunction::constant(TestFunctionPtr psi,
                                                  double c) {
  return quadratic({std::move(psi)}, {0.0}, {0.0}, c);
}

CylindricalFunction CylindricalFunction::quadratic(
    std::vector<TestFunctionPtr> psi, std::vector<double> A,
    std::vector<double> b, double c) {
  const int k = static_cast<int>(psi.size());
  if (static_cast<int>(A.size()) != k * k || static_cast<int>(b.size()) != k) {
    throw DimensionError("quadratic outer function has wrong shapes");
  }
  SmoothFunction f;
  f.n = k;
  f.f = [A, b, c, k](std::span<const double> u) {
    double v = c;
    for (int i = 0; i < k; ++i) {
      v += b[i] * u[i];
      for (int j = 0; j < k; ++j) v += 0.5 * A[i * k + j] * u[i] * u[j];
    }
    return v;
  };
  f.grad = [A, b, k](std::span<const double> u, double* g) {
    for (int i = 0; i < k; ++i) {
      g[i] = b[i];
      for (int j = 0; j < k; ++j) g[i] += 0.5 * (A[i * k + j] + A[j * k + i]) * u[j];
    }
  };
  f.hess = [A, k](std::span<const double>, double* h) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) h[i * k + j] = 0.5 * (A[i * k + j] + A[j * k + i]);
    }
  };
  std::ostringstream os;
  os << "quadratic(k=" << k << ")";
  f.name = os.str();
  return CylindricalFunction(std::move(psi), std::move(f));
}

std::string CylindricalFunction::name() const {
  std::string s = outer_.name + "[";
  for (std::size_t i = 0; i < psi_.size(); ++i) {
    s += (i ? "," : "") + psi_[i]->name();
  }
  return s + "]";
}

std::vector<double> CylindricalFunction::inner(
    const WeightedAtomMeasure& nu) const {
  std::vector<double> u(psi_.size());
  for (std::size_t i = 0; i < psi_.size(); ++i) u[i] = pair(nu, *psi_[i]);
  return u;
}

double CylindricalFunction::operator()(const WeightedAtomMeasure& nu) const {
  const auto u = inner(nu);
  return outer_.f(u);
}

std::vector<double> CylindricalFunction::grad(std::span<const double> u) const {
  std::vector<double> g(psi_.size());
  outer_.grad(u, g.data());
  return g;
}

std::vector<double> CylindricalFunction::hess(std::span<const double> u) const {
  std::vector<double> h(psi_.size() * psi_.size());
  outer_.hess(u, h.data());
  return h;
}

namespace {

// D psi = (grad psi, psi) and D^2 psi (rows: components of D psi, columns:
// x derivatives, last column zero), both at x; dp has d+1 entries and d2p
// is (d+1)x(d+1) row-major.
void stacked_derivatives(const TestFunction& psi, const double* x, int d,
                         double* dp, double* d2p) {
  double v = 0.0;
  double g[kMaxDim];
  double h[kMaxDim * kMaxDim];
  psi.evaluate(x, &v, g, h);
  const int e = d + 1;
  for (int a = 0; a < d; ++a) dp[a] = g[a];
  dp[d] = v;
  if (!d2p) return;
  for (int a = 0; a < e; ++a) {
    for (int b = 0; b < e; ++b) {
      double val = 0.0;
      if (b < d) val = a < d ? h[a * d + b] : g[b];
      d2p[a * e + b] = val;
    }
  }
}

void check_measure(const CylindricalFunction& F, const WeightedAtomMeasure& n) {
  if (F.dim() != n.dim()) throw DimensionError("cylinder function and measure dimensions differ");
}

}  // namespace

LDerivative l_derivative_cylinder(const CylindricalFunction& F,
                                  const WeightedAtomMeasure& nu,
                                  std::span<const double> x,
                                  std::span<const double> x_prime) {
  check_measure(F, nu);
  const int d = F.dim();
  if (static_cast<int>(x.size()) != d || static_cast<int>(x_prime.size()) != d) {
    throw DimensionError("l_derivative_cylinder: point dimension mismatch");
  }
  const int e = d + 1;
  const std::size_t k = F.k();
  const auto u = F.inner(nu);
  const auto g = F.grad(u);
  const auto H = F.hess(u);

  LDerivative out;
  out.d_mu = Eigen::VectorXd::Zero(e);
  out.dx_dmu = Eigen::MatrixXd::Zero(e, e);
  out.d2_mu = Eigen::MatrixXd::Zero(e, e);
  std::vector<Eigen::VectorXd> dpx(k), dpy(k);
  double dp[kMaxDim + 1];
  double d2p[(kMaxDim + 1) * (kMaxDim + 1)];
  for (std::size_t i = 0; i < k; ++i) {
    stacked_derivatives(F.psi(i), x.data(), d, dp, d2p);
    dpx[i] = Eigen::Map<Eigen::VectorXd>(dp, e);
    out.d_mu += g[i] * dpx[i];
    for (int a = 0; a < e; ++a) {
      for (int b = 0; b < e; ++b) out.dx_dmu(a, b) += g[i] * d2p[a * e + b];
    }
    stacked_derivatives(F.psi(i), x_prime.data(), d, dp, nullptr);
    dpy[i] = Eigen::Map<Eigen::VectorXd>(dp, e);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double hij = H[i * k + j];
      if (hij != 0.0) out.d2_mu += hij * dpx[i] * dpy[j].transpose();
    }
  }
  return out;
}

std::vector<CoeffValues> evaluate_on_atoms(const WeightedAtomMeasure& n,
                                           const ObsContext& obs,
                                           const CoefficientSet& coeffs,
                                           double mass_threshold) {
  if (coeffs.dim() != n.dim()) throw DimensionError("coefficient and measure dimensions differ");
  std::vector<double> feats;
  if (coeffs.mu_dependence() == MuDependence::kState) {
    feats = coeffs.features(normalize(n, mass_threshold));
  } else if (!(n.total_mass() > mass_threshold)) {
    throw WeightDegeneracy("measure mass at or below threshold");
  }
  std::vector<CoeffValues> out(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    coeffs.eval(obs.t, n.atom(i), obs, feats, out[i]);
  }
  return out;
}

double generator_measure(const CylindricalFunction& F,
                         const WeightedAtomMeasure& n, const ObsContext& obs,
                         const CoefficientSet& coeffs) {
  check_measure(F, n);
  const int d = F.dim();
  const int e = d + 1;
  const std::size_t k = F.k();
  const auto coeff = evaluate_on_atoms(n, obs, coeffs);
  const auto u = F.inner(n);
  const auto g = F.grad(u);
  const auto H = F.hess(u);

  std::vector<CompensatedSum> gamma(k);
  CompensatedSum first;
  double dp[kMaxDim + 1];
  double d2p[(kMaxDim + 1) * (kMaxDim + 1)];
  double dmu[kMaxDim + 1];
  double dxdmu[(kMaxDim + 1) * (kMaxDim + 1)];
  for (std::size_t atom = 0; atom < n.size(); ++atom) {
    const double w = n.weight(atom);
    if (w == 0.0) continue;
    const double* x = n.atom(atom);
    const CoeffValues& c = coeff[atom];
    std::fill(dmu, dmu + e, 0.0);
    std::fill(dxdmu, dxdmu + e * e, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      stacked_derivatives(F.psi(i), x, d, dp, d2p);
      for (int a = 0; a < e; ++a) dmu[a] += g[i] * dp[a];
      for (int a = 0; a < e * e; ++a) dxdmu[a] += g[i] * d2p[a];
      // D psi_i(x) . (rho, h)
      double hi = dp[d] * c.h;
      for (int a = 0; a < d; ++a) hi += dp[a] * c.rho[a];
      gamma[i].add(w * hi);
    }
    // d_n F . (b, 0) + 1/2 d_x d_n F : diag(sigma sigma^T + rho rho^T, 0)
    double local = 0.0;
    for (int a = 0; a < d; ++a) local += dmu[a] * c.b[a];
    double contraction = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double A = c.rho[a] * c.rho[b];
        for (int q = 0; q < d; ++q) A += c.sigma[a * d + q] * c.sigma[b * d + q];
        contraction += dxdmu[a * e + b] * A;
      }
    }
    first.add(w * (local + 0.5 * contraction));
  }
  double second = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      second += H[i * k + j] * gamma[i].value() * gamma[j].value();
    }
  }
  return first.value() + 0.5 * second;
}

double generator_measure_expanded(const CylindricalFunction& F,
                                  const WeightedAtomMeasure& n,
                                  const ObsContext& obs,
                                  const CoefficientSet& coeffs) {
  check_measure(F, n);
  const int d = F.dim();
  const std::size_t k = F.k();
  const auto coeff = evaluate_on_atoms(n, obs, coeffs);
  const auto u = F.inner(n);
  const auto g = F.grad(u);
  const auto H = F.hess(u);
  std::vector<double> Lpair(k), Hpair(k);
  for (std::size_t i = 0; i < k; ++i) {
    CompensatedSum sl, sh;
    for (std::size_t atom = 0; atom < n.size(); ++atom) {
      double L = 0.0, Hv = 0.0;
      apply_LH(F.psi(i), n.atom(atom), coeff[atom], d, L, Hv);
      sl.add(n.weight(atom) * L);
      sh.add(n.weight(atom) * Hv);
    }
    Lpair[i] = sl.value();
    Hpair[i] = sh.value();
  }
  double out = 0.0;
  for (std::size_t i = 0; i < k; ++i) out += g[i] * Lpair[i];
  double second = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) second += H[i * k + j] * Hpair[i] * Hpair[j];
  }
  return out + 0.5 * second;
}

LiftedCoefficients lifted_coefficients(const WeightedAtomMeasure& n,
                                       const ObsContext& obs,
                                       const CoefficientSet& coeffs,
                                       const TestFunctionBasis& basis,
                                       std::size_t K) {
  if (K == 0 || K > basis.size()) {
    throw ParameterError("lifted coefficients: K must be in 1.." +
                         std::to_string(basis.size()));
  }
  if (basis.dim() != n.dim()) throw DimensionError("basis and measure dimensions differ");
  const int d = n.dim();
  const auto coeff = evaluate_on_atoms(n, obs, coeffs);
  LiftedCoefficients out;
  out.beta.resize(K);
  out.gamma.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    CompensatedSum sb, sg;
    for (std::size_t atom = 0; atom < n.size(); ++atom) {
      double L = 0.0, H = 0.0;
      apply_LH(basis[i], n.atom(atom), coeff[atom], d, L, H);
      sb.add(n.weight(atom) * L);
      sg.add(n.weight(atom) * H);
    }
    out.beta[i] = sb.value();
    out.gamma[i] = sg.value();
  }
  out.alpha.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      out.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          out.gamma[i] * out.gamma[j];
    }
  }
  return out;
}

namespace {

void check_projection(std::span<const double> z, std::size_t i,
                      const TestFunctionBasis& basis,
                      const WeightedAtomMeasure& n) {
  if (i >= z.size() || i >= basis.size()) {
    throw DimensionError("index " + std::to_string(i) + " exceeds the projection length");
  }
  const double expect = pair(n, basis[i]);
  if (std::abs(z[i] - expect) > 1e-9 * (1.0 + std::abs(expect))) {
    throw ParameterError("z[" + std::to_string(i) +
                         "] is not the projection of the supplied measure");
  }
}

}  // namespace

AlphaBetaGamma alpha_beta_gamma(const ObsContext& obs,
                                std::span<const double> z,
                                const CoefficientSet& coeffs,
                                const TestFunctionBasis& basis, std::size_t i,
                                std::size_t j, const WeightedAtomMeasure& n) {
  check_projection(z, i, basis, n);
  check_projection(z, j, basis, n);
  const auto lc = lifted_coefficients(n, obs, coeffs, basis, std::max(i, j) + 1);
  AlphaBetaGamma out;
  out.alpha_ij = lc.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  out.beta_i = lc.beta[i];
  out.gamma_i = lc.gamma[i];
  return out;
}

double generator_A(const SmoothFunction& f, const ObsContext& obs,
                   std::span<const double> z, const WeightedAtomMeasure& n,
                   const CoefficientSet& coeffs,
                   const TestFunctionBasis& basis) {
  if (f.n < 1) throw DimensionError("generator_A needs f on R^{k+1}, k >= 0");
  const std::size_t k = static_cast<std::size_t>(f.n - 1);
  if (z.size() < k) throw DimensionError("z shorter than the arity of f");
  std::vector<double> point(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    check_projection(z, i, basis, n);
    point[i] = z[i];
  }
  point[k] = obs.y;
  std::vector<double> g(k + 1), H((k + 1) * (k + 1));
  f.grad(point, g.data());
  f.hess(point, H.data());
  double out = 0.5 * H[k * (k + 1) + k];
  if (k == 0) return out;
  const auto lc = lifted_coefficients(n, obs, coeffs, basis, k);
  for (std::size_t i = 0; i < k; ++i) {
    out += g[i] * lc.beta[i];
    for (std::size_t j = 0; j < k; ++j) {
      out += 0.5 * H[i * (k + 1) + j] *
             lc.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

}  // namespace cmv
