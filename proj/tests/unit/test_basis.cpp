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

#include <cmath>
#include <random>

#include "cmv/basis.hpp"
#include "cmv/errors.hpp"
#include "test_util.hpp"

using namespace cmv;

TEST_CASE("bump value at the center and outside the support") {
  const Bump b({0.5}, 2.0);
  const double c = 0.5;
  CHECK(b.value(&c) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  const double out = 2.6;
  CHECK(b.value(&out) == 0.0);
  double g = 1.0, h = 1.0;
  b.gradient(&out, &g);
  b.hessian(&out, &h);
  CHECK(g == 0.0);
  CHECK(h == 0.0);
}

TEST_CASE("bump derivatives match central differences") {
  std::mt19937_64 rng(11);
  for (int d : {1, 2, 3}) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto f = testing::random_bump(rng, d);
      std::normal_distribution<double> n(0.0, 0.6);
      std::vector<double> x(d);
      for (auto& v : x) v = n(rng);
      if (f->value(x.data()) < 1e-6) continue;
      std::vector<double> g(d), H(d * d);
      f->gradient(x.data(), g.data());
      f->hessian(x.data(), H.data());
      const double e = 1e-5;
      for (int a = 0; a < d; ++a) {
        auto xp = x, xm = x;
        xp[a] += e;
        xm[a] -= e;
        const double fd = (f->value(xp.data()) - f->value(xm.data())) / (2 * e);
        CHECK(g[a] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        std::vector<double> gp(d), gm(d);
        f->gradient(xp.data(), gp.data());
        f->gradient(xm.data(), gm.data());
        for (int b = 0; b < d; ++b) {
          CHECK(H[a * d + b] == doctest::Approx((gp[b] - gm[b]) / (2 * e)).epsilon(1e-5).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("evaluate agrees with the separate calls") {
  std::mt19937_64 rng(3);
  const auto f = testing::random_bump(rng, 2);
  const double x[2] = {0.1, -0.2};
  double v, g[2], h[4], g2[2], h2[4];
  f->evaluate(x, &v, g, h);
  f->gradient(x, g2);
  f->hessian(x, h2);
  CHECK(v == f->value(x));
  for (int i = 0; i < 2; ++i) CHECK(g[i] == g2[i]);
  for (int i = 0; i < 4; ++i) CHECK(h[i] == h2[i]);
}

TEST_CASE("bump hessian is symmetric") {
  const Bump b({0.0, 1.0, -1.0}, 2.5);
  const double x[3] = {0.3, 0.7, -0.4};
  double h[9];
  b.hessian(x, h);
  for (int a = 0; a < 3; ++a) {
    for (int c = 0; c < 3; ++c) CHECK(h[a * 3 + c] == h[c * 3 + a]);
  }
}

TEST_CASE("dyadic basis layout") {
  const auto basis = make_dyadic_basis(1, 50, {});
  REQUIRE(basis.size() == 50);
  const auto* first = dynamic_cast<const Bump*>(&basis[0]);
  REQUIRE(first);
  CHECK(first->center()[0] == 0.0);
  CHECK(first->radius() == 4.0);
  // Level 0 has centers -4..4 in steps of 2 (5 bumps), nearest-first.
  const auto* second = dynamic_cast<const Bump*>(&basis[1]);
  CHECK(second->center()[0] == -2.0);
  const auto* level1 = dynamic_cast<const Bump*>(&basis[5]);
  CHECK(level1->radius() == 2.0);
  CHECK(level1->center()[0] == 0.0);
  // Deterministic.
  const auto again = make_dyadic_basis(1, 50, {});
  for (std::size_t k = 0; k < 50; ++k) CHECK(again[k].name() == basis[k].name());
}

TEST_CASE("dyadic basis in two dimensions") {
  const auto basis = make_dyadic_basis(2, 30, {});
  CHECK(basis.size() == 30);
  CHECK(basis.dim() == 2);
  CHECK(basis[0].name() == "bump(c=0,0;r=4)");
}

TEST_CASE("basis prefix and dimension errors") {
  const auto basis = make_dyadic_basis(1, 10, {});
  CHECK(basis.prefix(4).size() == 4);
  CHECK_THROWS_AS(basis.prefix(11), ParameterError);
  CHECK_THROWS_AS(make_dyadic_basis(9, 5, {}), DimensionError);
  CHECK_THROWS_AS(make_dyadic_basis(1, 5, {0.0, 1.0}), ParameterError);
  std::vector<TestFunctionPtr> mixed{std::make_shared<Bump>(std::vector<double>{0.0}, 1.0),
                                     std::make_shared<Bump>(std::vector<double>{0.0, 0.0}, 1.0)};
  CHECK_THROWS_AS(TestFunctionBasis(1, mixed), DimensionError);
}

TEST_CASE("constant and coordinate functions") {
  const ConstantFunction one(2, 1.0);
  const CoordinateFunction x1(2, 1);
  const double x[2] = {3.0, -4.0};
  double g[2], h[4];
  CHECK(one.value(x) == 1.0);
  one.gradient(x, g);
  CHECK(g[0] == 0.0);
  CHECK(x1.value(x) == -4.0);
  x1.gradient(x, g);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  x1.hessian(x, h);
  for (double v : h) CHECK(v == 0.0);
}
