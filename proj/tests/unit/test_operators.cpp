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

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "cmv/errors.hpp"
#include "cmv/operators.hpp"
#include "test_util.hpp"

using namespace cmv;
using cmv::testing::random_bump;
using cmv::testing::random_measure;

namespace {

// Probabilists' Gauss-Hermite rule by Golub-Welsch: E[g(Z)], Z ~ N(0,1).
struct Hermite {
  std::vector<double> x, w;
  explicit Hermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    for (int k = 0; k < n; ++k) {
      x.push_back(es.eigenvalues()(k));
      w.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
    }
  }
};

const ObsContext kObs{0.3, 0.2, 0.05, {}};

// One Euler step of the weighted scheme for a single atom, expectation over
// (dB, dY) by quadrature; the difference quotient tends to L phi.
double one_step_quotient(const TestFunction& phi, double x, const CoeffValues& c,
                         double dt, const Hermite& gh) {
  long double e = 0.0L;
  const double s = std::sqrt(dt);
  for (std::size_t a = 0; a < gh.x.size(); ++a) {
    for (std::size_t b = 0; b < gh.x.size(); ++b) {
      const double dB = s * gh.x[a], dY = s * gh.x[b];
      const double xn = x + (c.b[0] - c.rho[0] * c.h) * dt + c.sigma[0] * dB + c.rho[0] * dY;
      const double lw = c.h * dY - 0.5 * c.h * c.h * dt;
      e += static_cast<long double>(gh.w[a] * gh.w[b]) * std::exp(lw) * phi.value(&xn);
    }
  }
  return static_cast<double>((e - phi.value(&x)) / dt);
}

TestFunctionPtr square_fn() {
  return std::make_shared<LambdaFunction>(
      1, [](const double* x) { return x[0] * x[0]; },
      [](const double* x, double* g) { g[0] = 2 * x[0]; },
      [](const double*, double* h) { h[0] = 2.0; }, "square");
}

}  // namespace

TEST_CASE("apply_L and apply_H small examples") {
  const auto zero = make_coefficients("constant", 1, R"({"sigma": 0})");
  const CoordinateFunction id(1, 0);
  const double x = 0.7;
  CHECK(apply_L(id, {&x, 1}, kObs, nullptr, *zero) == 0.0);
  const auto unit = make_coefficients("constant", 1, R"({"sigma": 1})");
  CHECK(apply_L(*square_fn(), {&x, 1}, kObs, nullptr, *unit) == 1.0);
  const auto h1 = make_coefficients("constant", 1, R"({"h": 1})");
  Bump bump({0.1}, 1.5);
  CHECK(apply_H(bump, {&x, 1}, kObs, nullptr, *h1) == bump.value(&x));
  const auto r1 = make_coefficients("constant", 1, R"({"rho": 1})");
  CHECK(apply_H(id, {&x, 1}, kObs, nullptr, *r1) == 1.0);
}

TEST_CASE("apply_H uses the plus sign on h") {
  const auto c = make_coefficients("constant", 1, R"({"rho": 0.5, "h": 2})");
  const CoordinateFunction id(1, 0);
  const double x = 3.0;
  CHECK(apply_H(id, {&x, 1}, kObs, nullptr, *c) == doctest::Approx(0.5 + 6.0));
}

TEST_CASE("apply_H equals an independent recomputation") {
  std::mt19937_64 rng(11);
  const auto coeffs = make_coefficients("bounded_smooth", 2, "{}");
  const auto mu = cmv::testing::random_probability(rng, 2, 30);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    const auto phi = random_bump(rng, 2);
    const double x[2] = {g(rng), g(rng)};
    const auto c = coeffs->eval(kObs.t, {x, 2}, kObs, &mu);
    double grad[2];
    phi->gradient(x, grad);
    const double expect = c.rho[0] * grad[0] + c.rho[1] * grad[1] + c.h * phi->value(x);
    CHECK(apply_H(*phi, {x, 2}, kObs, &mu, *coeffs) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("apply_L matches the one-step Euler expectation") {
  std::mt19937_64 rng(5);
  const auto coeffs = make_coefficients("linear_gaussian", 1, R"({"rho": 0.4})");
  const Hermite gh(30);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 5; ++rep) {
    const auto phi = random_bump(rng, 1);
    const auto* bump = static_cast<const Bump*>(phi.get());
    const double x = bump->center()[0] + 0.4 * bump->radius() * g(rng) / 3.0;
    const auto c = coeffs->eval(kObs.t, {&x, 1}, kObs, nullptr);
    const double dt = 1e-3;
    const double q1 = one_step_quotient(*phi, x, c, dt, gh);
    const double q2 = one_step_quotient(*phi, x, c, dt / 2, gh);
    const double extrapolated = 2 * q2 - q1;
    const double L = apply_L(*phi, {&x, 1}, kObs, nullptr, *coeffs);
    CHECK(std::abs(extrapolated - L) <= 1e-4 * (1.0 + std::abs(L)));
    CHECK(std::abs(q1 - L) > std::abs(extrapolated - L));
  }
}

TEST_CASE("operators are linear in the test function") {
  std::mt19937_64 rng(17);
  const auto coeffs = make_coefficients("meanfield_linear", 1, "{}");
  const auto mu = cmv::testing::random_probability(rng, 1, 20);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = random_bump(rng, 1), g2 = random_bump(rng, 1);
    const double a = u(rng), b = u(rng), x = u(rng);
    LambdaFunction combo(
        1, [&](const double* p) { return a * f->value(p) + b * g2->value(p); },
        [&](const double* p, double* out) {
          double gf, gg;
          f->gradient(p, &gf);
          g2->gradient(p, &gg);
          out[0] = a * gf + b * gg;
        },
        [&](const double* p, double* out) {
          double hf, hg;
          f->hessian(p, &hf);
          g2->hessian(p, &hg);
          out[0] = a * hf + b * hg;
        });
    const double L = apply_L(combo, {&x, 1}, kObs, &mu, *coeffs);
    const double Ls = a * apply_L(*f, {&x, 1}, kObs, &mu, *coeffs) +
                      b * apply_L(*g2, {&x, 1}, kObs, &mu, *coeffs);
    CHECK(std::abs(L - Ls) <= 1e-12 * (1 + std::abs(L)));
    const double H = apply_H(combo, {&x, 1}, kObs, &mu, *coeffs);
    const double Hs = a * apply_H(*f, {&x, 1}, kObs, &mu, *coeffs) +
                      b * apply_H(*g2, {&x, 1}, kObs, &mu, *coeffs);
    CHECK(std::abs(H - Hs) <= 1e-12 * (1 + std::abs(H)));
  }
}

TEST_CASE("L-derivative examples") {
  std::mt19937_64 rng(2);
  const auto nu = random_measure(rng, 1, 10);
  const auto psi = random_bump(rng, 1);
  const double x = 0.3, xp = -0.4;
  SUBCASE("identity outer function") {
    const auto F = CylindricalFunction::identity(psi);
    const auto D = l_derivative_cylinder(F, nu, {&x, 1}, {&xp, 1});
    double grad;
    psi->gradient(&x, &grad);
    CHECK(D.d_mu(0) == doctest::Approx(grad).epsilon(1e-15));
    CHECK(D.d_mu(1) == doctest::Approx(psi->value(&x)).epsilon(1e-15));
    CHECK(D.d2_mu.isZero(0.0));
  }
  SUBCASE("constant outer function") {
    const auto F = CylindricalFunction::constant(psi, 2.5);
    const auto D = l_derivative_cylinder(F, nu, {&x, 1}, {&xp, 1});
    CHECK(D.d_mu.isZero(0.0));
    CHECK(D.dx_dmu.isZero(0.0));
    CHECK(D.d2_mu.isZero(0.0));
  }
}

TEST_CASE("L-derivative matches Gateaux finite differences") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + rep % 2;
    const auto nu = random_measure(rng, d, 12);
    const auto xi = random_measure(rng, d, 5);
    std::vector<TestFunctionPtr> psi{random_bump(rng, d), random_bump(rng, d)};
    const auto F = rep % 3 == 0
                       ? CylindricalFunction::square(psi[0])
                       : CylindricalFunction::quadratic(psi, {1.0, 0.4, 0.4, -0.7}, {0.3, 1.1}, 0.2);
    auto quotient = [&](double eps) {
      return (F(nu.combine(1.0, xi, eps)) - F(nu)) / eps;
    };
    const double eps = 1e-3;
    const double rich = 2 * quotient(eps / 2) - quotient(eps);
    double directional = 0.0;
    for (std::size_t a = 0; a < xi.size(); ++a) {
      std::span<const double> xa(xi.atom(a), d);
      const auto D = l_derivative_cylinder(F, nu, xa, xa);
      directional += xi.weight(a) * D.d_mu(d);
    }
    CHECK(std::abs(rich - directional) <= 1e-6 * (1 + std::abs(directional)));
  }
}

TEST_CASE("generator_measure examples") {
  std::mt19937_64 rng(4);
  const auto n = random_measure(rng, 1, 15);
  const auto psi = random_bump(rng, 1);
  const auto zero = make_coefficients("constant", 1, R"({"sigma": 0})");
  CHECK(generator_measure(CylindricalFunction::identity(psi), n, kObs, *zero) == 0.0);
  const auto coeffs = make_coefficients("bounded_smooth", 1, "{}");
  const auto mu = normalize(n);
  CompensatedSum direct;
  for (std::size_t a = 0; a < n.size(); ++a) {
    direct.add(n.weight(a) * apply_L(*psi, {n.atom(a), 1}, kObs, &mu, *coeffs));
  }
  CHECK(generator_measure(CylindricalFunction::identity(psi), n, kObs, *coeffs) ==
        doctest::Approx(direct.value()).epsilon(1e-12));
}

TEST_CASE("generator_measure equals the expanded cylinder form") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + rep % 3;
    const auto coeffs = make_coefficients(rep % 2 ? "bounded_smooth" : "meanfield_linear", d, "{}");
    const auto n = random_measure(rng, d, 40);
    std::vector<TestFunctionPtr> psi{random_bump(rng, d), random_bump(rng, d), random_bump(rng, d)};
    std::vector<double> A{1.0, 0.2, -0.3, 0.2, 0.5, 0.1, -0.3, 0.1, 2.0};
    const auto F = CylindricalFunction::quadratic(psi, A, {0.1, -1.0, 0.5}, 0.0);
    const double g1 = generator_measure(F, n, kObs, *coeffs);
    const double g2 = generator_measure_expanded(F, n, kObs, *coeffs);
    CHECK(std::abs(g1 - g2) <= 1e-12 * (1 + std::abs(g2)));
  }
}

TEST_CASE("generator_measure matches the one-step expectation of the scheme") {
  // Two atoms in d = 1; expectation over (dB_1, dB_2, dY) by quadrature.
  // The private noises add sum_i w_i^2 (sigma psi'(x_i))^2, which vanishes
  // only as N grows; the measure-space generator leaves it out.
  const auto coeffs = make_coefficients("bounded_smooth", 1, R"({"rho": 0.4})");
  const WeightedAtomMeasure n(1, {-0.3, 0.6}, {0.7, 0.5});
  const auto psi = std::make_shared<Bump>(std::vector<double>{0.2}, 2.0);
  const auto F = CylindricalFunction::square(psi);
  const auto mu = normalize(n);
  const auto c0 = coeffs->eval(kObs.t, {n.atom(0), 1}, kObs, &mu);
  const auto c1 = coeffs->eval(kObs.t, {n.atom(1), 1}, kObs, &mu);
  const Hermite gh(16);
  auto quotient = [&](double dt) {
    const double s = std::sqrt(dt);
    long double e = 0.0L;
    for (std::size_t a = 0; a < gh.x.size(); ++a)
      for (std::size_t b = 0; b < gh.x.size(); ++b)
        for (std::size_t y = 0; y < gh.x.size(); ++y) {
          const double dY = s * gh.x[y];
          double pos[2], w[2];
          const CoeffValues* c[2] = {&c0, &c1};
          const double dB[2] = {s * gh.x[a], s * gh.x[b]};
          for (int i = 0; i < 2; ++i) {
            pos[i] = n.atom(i)[0] + (c[i]->b[0] - c[i]->rho[0] * c[i]->h) * dt +
                     c[i]->sigma[0] * dB[i] + c[i]->rho[0] * dY;
            w[i] = n.weight(i) * std::exp(c[i]->h * dY - 0.5 * c[i]->h * c[i]->h * dt);
          }
          const double u = w[0] * psi->value(&pos[0]) + w[1] * psi->value(&pos[1]);
          e += static_cast<long double>(gh.w[a] * gh.w[b] * gh.w[y]) * u * u;
        }
    return static_cast<double>((e - F(n)) / dt);
  };
  const double rich = 2 * quotient(5e-4) - quotient(1e-3);
  double private_qv = 0.0;
  for (int i = 0; i < 2; ++i) {
    double gp;
    psi->gradient(n.atom(i), &gp);
    const double s = (i == 0 ? c0 : c1).sigma[0] * gp * n.weight(i);
    private_qv += s * s;
  }
  const double gen = generator_measure(F, n, kObs, *coeffs) + private_qv;
  CHECK(std::abs(rich - gen) <= 1e-4 * (1 + std::abs(gen)));
}

TEST_CASE("lifted coefficients") {
  std::mt19937_64 rng(9);
  const auto basis = make_dyadic_basis(1, 12);
  const auto n = random_measure(rng, 1, 50, 1.5);
  const auto z = project_T(n, 12, basis);
  SUBCASE("no observation coupling") {
    const auto c = make_coefficients("constant", 1, R"({"b": 0.3})");
    const auto r = alpha_beta_gamma(kObs, z, *c, basis, 2, 5, n);
    CHECK(r.alpha_ij == 0.0);
    CHECK(r.gamma_i == 0.0);
  }
  SUBCASE("alpha is gamma gamma^T and beta re-evaluates apply_L") {
    const auto c = make_coefficients("bounded_smooth", 1, "{}");
    const auto lc = lifted_coefficients(n, kObs, *c, basis, 12);
    const auto mu = normalize(n);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(lc.alpha(i, i) == lc.gamma[i] * lc.gamma[i]);
      for (std::size_t j = 0; j < 12; ++j) CHECK(lc.alpha(i, j) == lc.alpha(j, i));
      CompensatedSum beta;
      for (std::size_t a = 0; a < n.size(); ++a) {
        beta.add(n.weight(a) * apply_L(basis[i], {n.atom(a), 1}, kObs, &mu, *c));
      }
      CHECK(lc.beta[i] == doctest::Approx(beta.value()).epsilon(1e-12));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lc.alpha);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    const auto r = alpha_beta_gamma(kObs, z, *c, basis, 3, 7, n);
    CHECK(r.alpha_ij == lc.alpha(3, 7));
    CHECK(r.beta_i == lc.beta[3]);
  }
  SUBCASE("z must be the projection of n") {
    const auto c = make_coefficients("bounded_smooth", 1, "{}");
    auto bad = z;
    bad[1] += 0.1;
    CHECK_THROWS_AS(alpha_beta_gamma(kObs, bad, *c, basis, 1, 1, n), ParameterError);
  }
}

TEST_CASE("generator_A examples") {
  std::mt19937_64 rng(10);
  const auto basis = make_dyadic_basis(1, 6);
  const auto n = random_measure(rng, 1, 30);
  const auto z = project_T(n, 6, basis);
  const auto c = make_coefficients("bounded_smooth", 1, "{}");
  SmoothFunction ysq{1, [](std::span<const double> u) { return u[0] * u[0]; },
                     [](std::span<const double> u, double* g) { g[0] = 2 * u[0]; },
                     [](std::span<const double>, double* h) { h[0] = 2.0; }, "ysq"};
  CHECK(generator_A(ysq, kObs, z, n, *c, basis) == 1.0);
  const std::vector<double> coef{0.5, -1.2, 2.0};
  SmoothFunction lin{4,
                     [&](std::span<const double> u) { return coef[0] * u[0] + coef[1] * u[1] + coef[2] * u[2]; },
                     [&](std::span<const double>, double* g) {
                       for (int i = 0; i < 3; ++i) g[i] = coef[i];
                       g[3] = 0.0;
                     },
                     [](std::span<const double>, double* h) { std::fill(h, h + 16, 0.0); }, "lin"};
  const auto lc = lifted_coefficients(n, kObs, *c, basis, 3);
  const double expect = coef[0] * lc.beta[0] + coef[1] * lc.beta[1] + coef[2] * lc.beta[2];
  CHECK(generator_A(lin, kObs, z, n, *c, basis) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("generator_A on a cylinder function equals generator_measure plus the y part") {
  // f(z, ybar) = z_0^2 gives A f = 2 z_0 beta_0 + alpha_00.
  std::mt19937_64 rng(12);
  const auto basis = make_dyadic_basis(1, 4);
  const auto n = random_measure(rng, 1, 25);
  const auto z = project_T(n, 4, basis);
  const auto c = make_coefficients("meanfield_linear", 1, "{}");
  SmoothFunction f{2, [](std::span<const double> u) { return u[0] * u[0]; },
                   [](std::span<const double> u, double* g) { g[0] = 2 * u[0]; g[1] = 0; },
                   [](std::span<const double>, double* h) { h[0] = 2; h[1] = h[2] = h[3] = 0; },
                   "z0sq"};
  const auto F = CylindricalFunction::square(basis.ptr(0));
  CHECK(generator_A(f, kObs, z, n, *c, basis) ==
        doctest::Approx(generator_measure(F, n, kObs, *c)).epsilon(1e-12));
}
