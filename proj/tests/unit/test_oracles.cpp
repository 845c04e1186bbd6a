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
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "cmv/errors.hpp"
#include "cmv/oracles.hpp"
#include "test_util.hpp"

using namespace cmv;
using nlohmann::json;

namespace {

ObservationPath bm_path(std::uint64_t seed, std::size_t steps, double dt) {
  return generate_observation_path(StreamId{seed, 0, 0, 0}, steps, dt);
}

// Self-normalized particle mean at the recorded snapshots with a bootstrap
// SE over particles.
struct ParticleMean {
  std::vector<double> t, mean, se;
};

ParticleMean particle_mean(const Trajectory& tr, std::size_t resamples, std::uint64_t seed) {
  ParticleMean out;
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < tr.nu.size(); ++s) {
    const auto& nu = tr.nu[s];
    const std::size_t n = nu.size();
    auto est = [&](auto&& index) {
      CompensatedSum num, den;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = index(i);
        num.add(nu.weight(j) * nu.atom(j)[0]);
        den.add(nu.weight(j));
      }
      return num.value() / den.value();
    };
    const double m = est([](std::size_t i) { return i; });
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double acc = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
      const double b = est([&](std::size_t) { return pick(rng); });
      acc += (b - m) * (b - m);
    }
    out.t.push_back(tr.time(tr.recorded_steps[s]));
    out.mean.push_back(m);
    out.se.push_back(std::sqrt(acc / static_cast<double>(resamples - 1)));
  }
  return out;
}

std::string fixture_path(const std::string& name) {
  return std::string(CMV_FIXTURE_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("Riccati examples") {
  const auto y = bm_path(1, 20000, 1e-3);
  SUBCASE("stationary variance one from either side") {
    const LinearModel m{0.0, 1.0, 0.0, 1.0};
    for (double P0 : {0.0, 3.0}) {
      const auto k = kalman_bucy_correlated(m, {0.0, P0}, y);
      CHECK(k.P.back() == doctest::Approx(1.0).epsilon(1e-6));
      for (std::size_t i = 1; i < k.P.size(); ++i) {
        if (P0 < 1.0) {
          CHECK(k.P[i] >= k.P[i - 1]);
        } else {
          CHECK(k.P[i] <= k.P[i - 1]);
        }
        CHECK((k.P[i] - 1.0) * (P0 - 1.0) >= 0.0);
      }
      CHECK(riccati_rhs(m, 1.0) == 0.0);
    }
  }
  SUBCASE("unobserved state diffuses linearly") {
    const LinearModel m{0.0, 1.0, 0.0, 0.0};
    const auto k = kalman_bucy_correlated(m, {0.3, 0.5}, y);
    for (std::size_t i = 0; i < k.P.size(); i += 997) {
      CHECK(k.P[i] == doctest::Approx(0.5 + k.t[i]).epsilon(1e-10));
      CHECK(k.m[i] == 0.3);
    }
  }
  SUBCASE("static fully observed state") {
    const LinearModel m{0.0, 0.0, 0.0, 1.0};
    const auto k = kalman_bucy_correlated(m, {0.7, 0.0}, y);
    for (std::size_t i = 0; i < k.P.size(); ++i) {
      CHECK(k.P[i] == 0.0);
      CHECK(k.m[i] == 0.7);
    }
  }
  SUBCASE("negative initial variance is refused") {
    CHECK_THROWS_AS(kalman_bucy_correlated({}, {0.0, -1.0}, y), OracleError);
  }
}

TEST_CASE("mean-field linear mean reductions") {
  const auto y = bm_path(2, 1000, 1e-3);
  const LinearModel m{-0.5, 1.0, 0.3, 1.0};
  SUBCASE("no mean-field term") {
    const auto a = meanfield_linear_mean(m, 0.0, {0.4, 0.2}, y);
    const auto b = kalman_bucy_correlated(m, {0.4, 0.2}, y);
    CHECK(a.m == b.m);
    CHECK(a.P == b.P);
  }
  SUBCASE("cancelling drift") {
    const LinearModel mm{-0.5, 1.0, 0.3, 1.0};
    const auto a = meanfield_linear_mean(mm, 0.5, {0.4, 0.2}, y);
    double mean = 0.4;
    for (std::size_t k = 0; k + 1 < a.m.size(); ++k) {
      CHECK(a.m[k] == doctest::Approx(mean).epsilon(1e-13));
      const double gain = mm.c * a.P[k] + mm.rho;
      mean += gain * (y.increment(k) - mm.c * mean * y.dt);
    }
    CHECK(a.m.back() == doctest::Approx(mean).epsilon(1e-13));
  }
}

TEST_CASE("mean-field linear mean against 1e5 particles") {
  SimulationConfig c;
  c.N = 100000;
  c.T = 0.5;
  c.dt = 1e-3;
  c.seed = 2026;
  c.record_stride = 100;
  c.x0.mean = {1.0};
  c.coeffs = make_coefficients("meanfield_linear", 1, R"({"a": 0, "abar": 0.5, "rho": 0.3})");
  const auto tr = simulate_canonical(c);
  const auto pm = particle_mean(tr, 100, 3);
  const auto k = meanfield_linear_mean({0.0, 1.0, 0.3, 1.0}, 0.5, {1.0, 0.0}, tr.y_path);
  for (std::size_t s = 1; s < pm.t.size(); ++s) {
    const double oracle = k.m[tr.recorded_steps[s]];
    CHECK(std::abs(pm.mean[s] - oracle) <= 3.0 * pm.se[s]);
  }
}

TEST_CASE("Kalman-Bucy filter against the recorded 1e6-particle run") {
  const std::string path = fixture_path("kalman_bruteforce.json");
  const LinearModel model{-0.5, 1.0, 0.3, 1.0};
  const std::uint64_t seed = 20261016;
  const double T = 0.5, dt = 1e-3;
  const std::size_t N = 1000000;
  if (std::getenv("CMV_REGEN_FIXTURES")) {
    SimulationConfig c;
    c.N = N;
    c.T = T;
    c.dt = dt;
    c.seed = seed;
    c.record_stride = 100;
    c.x0.mean = {1.0};
    c.coeffs = make_coefficients("linear_gaussian", 1, R"({"a": -0.5, "sigma": 1, "rho": 0.3, "c": 1})");
    const auto tr = simulate_canonical(c);
    const auto pm = particle_mean(tr, 100, seed);
    json j;
    j["oracle"] = "kalman_bucy_correlated";
    j["params"] = {{"a", model.a}, {"sigma", model.sigma}, {"rho", model.rho}, {"c", model.c},
                   {"m0", 1.0}, {"P0", 0.0}, {"T", T}, {"dt", dt}, {"N", N}, {"substeps", 10}};
    j["seed"] = seed;
    j["t"] = pm.t;
    j["value"] = pm.mean;
    j["standard_error"] = pm.se;
    j["tolerance"] = 3.0;
    std::ofstream(path) << j.dump(2) << "\n";
  }
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing fixture " << path << "; run with CMV_REGEN_FIXTURES=1");
  const json j = json::parse(in);
  CHECK(j["oracle"] == "kalman_bucy_correlated");
  REQUIRE(j["seed"].get<std::uint64_t>() == seed);
  const auto y = generate_observation_path(StreamId{seed, 0, 0, 0}, 500, dt);
  const auto k = kalman_bucy_correlated(model, {1.0, 0.0}, y, j["params"]["substeps"].get<int>());
  const auto t = j["t"].get<std::vector<double>>();
  const auto v = j["value"].get<std::vector<double>>();
  const auto se = j["standard_error"].get<std::vector<double>>();
  const double tol = j["tolerance"].get<double>();
  for (std::size_t s = 1; s < t.size(); ++s) {
    const auto step = static_cast<std::size_t>(std::llround(t[s] / dt));
    CHECK(std::abs(k.m[step] - v[s]) <= tol * se[s]);
  }
}

TEST_CASE("brute-force W1") {
  const double a = 0.3, b = -1.2;
  CHECK(w1_bruteforce(ProbabilityAtomMeasure(1, {a}, {1.0}), ProbabilityAtomMeasure(1, {b}, {1.0})) ==
        doctest::Approx(1.5).epsilon(1e-15));
  const auto p = ProbabilityAtomMeasure::uniform(2, {0, 0, 1, 1});
  const auto q = ProbabilityAtomMeasure::uniform(2, {0, 1, 1, 0});
  CHECK(w1_bruteforce(p, q) == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m1 = cmv::testing::random_probability(rng, 1, 2 + rep % 7);
    const auto m2 = cmv::testing::random_probability(rng, 1, 1 + rep % 8);
    const double lp = w1_bruteforce(m1, m2);
    CHECK(std::abs(lp - wasserstein1(m1, m2)) <= 1e-9);
    // The product coupling is feasible, so it bounds the optimum from above.
    double product = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i)
      for (std::size_t j = 0; j < m2.size(); ++j)
        product += m1.weight(i) * m2.weight(j) * std::abs(m1.atom(i)[0] - m2.atom(j)[0]);
    CHECK(lp <= product + 1e-12);
  }
  CHECK_THROWS_AS(w1_bruteforce(cmv::testing::random_probability(rng, 1, 9), p), OracleError);
}

TEST_CASE("quadrature of the mollified inner product") {
  for (int d = 1; d <= 2; ++d) {
    const std::vector<double> x(d, 0.0);
    std::vector<double> y(d, 0.0);
    y[0] = 0.35;
    const auto n1 = WeightedAtomMeasure::dirac(x), n2 = WeightedAtomMeasure::dirac(y);
    const double q = quadrature_mollified(n1, n2, 0.1);
    CHECK(q == doctest::Approx(gaussian_kernel(y, 0.2)).epsilon(1e-8));
  }
  std::mt19937_64 rng(6);
  for (int d = 1; d <= 2; ++d) {
    const auto n1 = cmv::testing::random_measure(rng, d, 5, 0.5);
    const auto n2 = cmv::testing::random_measure(rng, d, 5, 0.5);
    const double q = quadrature_mollified(n1, n2, 0.1);
    CHECK(cmv::testing::rel_err(q, mollified_inner(n1, n2, 0.1)) <= 1e-6);
  }
  const auto n3 = cmv::testing::random_measure(rng, 3, 2);
  CHECK_THROWS_AS(quadrature_mollified(n3, n3, 0.1), OracleError);
}
