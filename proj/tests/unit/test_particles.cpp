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
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cmv/errors.hpp"
#include "cmv/particles.hpp"
#include "test_util.hpp"

using namespace cmv;

namespace {

SimulationConfig base(const std::string& family, const std::string& params,
                      std::size_t N = 300, double T = 0.5, double dt = 0.01) {
  SimulationConfig c;
  c.N = N;
  c.T = T;
  c.dt = dt;
  c.dim = 1;
  c.coeffs = make_coefficients(family, 1, params);
  c.seed = 42;
  return c;
}

bool same_measure(const WeightedAtomMeasure& a, const WeightedAtomMeasure& b) {
  return a.positions() == b.positions() && a.weights() == b.weights();
}

}  // namespace

TEST_CASE("configuration preconditions") {
  auto c = base("constant", "{}");
  c.N = 1;
  CHECK_THROWS_AS(simulate_canonical(c), ParameterError);
  c = base("constant", "{}");
  c.dt = 0.03;
  CHECK_THROWS_AS(simulate_canonical(c), ParameterError);
  c = base("constant", "{}");
  c.dim = 2;
  CHECK_THROWS_AS(simulate_canonical(c), DimensionError);
}

TEST_CASE("one Euler step by hand") {
  const auto coeffs = make_coefficients("constant", 1, R"({"b": 1, "sigma": 1, "rho": 0, "h": 0})");
  EnsembleState s;
  s.dim = 1;
  s.x = {0.25};
  s.log_w = {0.0};
  s.h_integral = {0.0};
  const double dB = 0.05;
  const auto next = step_canonical(s, {&dB, 1}, 0.0, 0.01, *coeffs);
  CHECK(next.x[0] == doctest::Approx(0.31).epsilon(1e-15));
  CHECK(next.step == 1);
  CHECK(next.t == 0.01);
}

TEST_CASE("correction term -rho h enters the drift") {
  const auto coeffs = make_coefficients("constant", 1, R"({"b": 1, "sigma": 0, "rho": 0.5, "h": 2})");
  EnsembleState s;
  s.dim = 1;
  s.x = {0.0};
  s.log_w = {0.0};
  s.h_integral = {0.0};
  const double dB = 0.0;
  const auto next = step_canonical(s, {&dB, 1}, 0.1, 0.01, *coeffs);
  // (1 - 0.5*2)*0.01 + 0.5*0.1
  CHECK(next.x[0] == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(next.log_w[0] == doctest::Approx(2 * 0.1 - 0.5 * 4 * 0.01).epsilon(1e-14));
}

TEST_CASE("common noise keeps every log-weight at zero and nu equal to mu") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto c = base("common_noise", "{}", 500);
    c.seed = seed;
    const auto tr = simulate_canonical(c);
    for (double l : tr.final_state.log_w) CHECK(l == 0.0);
    for (std::size_t s = 0; s < tr.nu.size(); ++s) {
      CHECK(tr.nu[s].total_mass() == 1.0);
      CHECK(same_measure(tr.nu[s], tr.mu(s)));
    }
  }
}

TEST_CASE("frozen particles with h = 1 carry the exponential martingale") {
  const auto c = base("constant", R"({"b": 0, "sigma": 0, "rho": 0, "h": 1})", 16, 1.0, 0.01);
  const auto tr = simulate_canonical(c);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(tr.final_state.x[i] == 0.0);
    CHECK(tr.final_state.log_w[i] ==
          doctest::Approx(tr.final_state.y - 0.5 * tr.final_state.t).epsilon(1e-12));
  }
}

TEST_CASE("observation path depends only on seed and replica") {
  auto c = base("meanfield_linear", "{}");
  const auto a = simulate_canonical(c);
  c.nu_index = 3;
  c.b1_epoch = 2;
  const auto b = simulate_canonical(c);
  CHECK(a.y_path.y == b.y_path.y);
  CHECK(a.final_state.x != b.final_state.x);
  c.replica = 1;
  CHECK(simulate_canonical(c).y_path.y != a.y_path.y);
}

TEST_CASE("recording stride keeps the terminal snapshot") {
  auto c = base("constant", "{}", 10, 0.5, 0.01);
  c.record_stride = 20;
  const auto tr = simulate_canonical(c);
  CHECK(tr.recorded_steps == std::vector<std::size_t>{0, 20, 40, 50});
  CHECK_FALSE(tr.full_record());
  CHECK_THROWS_AS(freeze_mu(tr), GridError);
  CHECK_THROWS_AS(tr.snapshot_index(10), GridError);
}

TEST_CASE("freezing the live mu and reusing B1 reproduces the run bitwise") {
  auto c = base("bounded_smooth", "{}", 400, 0.3, 0.01);
  const auto live = simulate_canonical(c);
  const auto again = simulate_frozen_mu(c, freeze_mu(live), live.y_path);
  CHECK(again.final_state.x == live.final_state.x);
  CHECK(again.final_state.log_w == live.final_state.log_w);
  c.b1_epoch = 1;
  const auto fresh = simulate_frozen_mu(c, freeze_mu(live), live.y_path);
  CHECK(fresh.final_state.x != live.final_state.x);
}

TEST_CASE("mu-independent coefficients: frozen and live runs agree") {
  const auto c = base("linear_gaussian", "{}", 300, 0.2, 0.01);
  const auto live = simulate_canonical(c);
  const auto frozen = simulate_frozen_mu(c, freeze_mu(live), live.y_path);
  CHECK(frozen.final_state.x == live.final_state.x);
}

TEST_CASE("frozen path and observation grid checks") {
  const auto c = base("meanfield_linear", "{}", 50, 0.2, 0.01);
  const auto live = simulate_canonical(c);
  ObservationPath shorter = live.y_path;
  shorter.y.pop_back();
  CHECK_THROWS_AS(simulate_frozen_mu(c, freeze_mu(live), shorter), GridError);
  auto longer = c;
  longer.T = 0.4;
  const auto y_long = generate_observation_path(longer.stream(), longer.steps(), longer.dt);
  CHECK_THROWS_AS(simulate_frozen_mu(longer, freeze_mu(live), y_long), GridError);
}

TEST_CASE("bitwise determinism across thread counts") {
  const auto c = base("bounded_smooth", "{}", 2000, 0.2, 0.01);
  omp_set_num_threads(1);
  const auto one = simulate_canonical(c);
  omp_set_num_threads(4);
  const auto four = simulate_canonical(c);
  omp_set_num_threads(1);
  CHECK(one.final_state.x == four.final_state.x);
  CHECK(one.final_state.log_w == four.final_state.log_w);
  for (std::size_t s = 0; s < one.nu.size(); ++s) CHECK(same_measure(one.nu[s], four.nu[s]));
}

TEST_CASE("exchangeability under particle permutation") {
  const auto coeffs = make_coefficients("bounded_smooth", 1, "{}");
  const std::size_t n = 64;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  EnsembleState a;
  a.dim = 1;
  a.x.resize(n);
  for (auto& v : a.x) v = g(rng);
  a.log_w.assign(n, 0.0);
  a.h_integral.assign(n, 0.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  EnsembleState b = a;
  for (std::size_t i = 0; i < n; ++i) b.x[i] = a.x[perm[i]];
  const auto basis = make_dyadic_basis(1, 8, {});
  for (int step = 0; step < 20; ++step) {
    std::vector<double> dB(n), dBp(n);
    for (auto& v : dB) v = 0.1 * g(rng);
    for (std::size_t i = 0; i < n; ++i) dBp[i] = dB[perm[i]];
    const double dY = 0.1 * g(rng);
    a = step_canonical(a, dB, dY, 0.01, *coeffs);
    b = step_canonical(b, dBp, dY, 0.01, *coeffs);
  }
  for (std::size_t k = 0; k < basis.size(); ++k) {
    CHECK(pair(a.nu(), basis[k]) == doctest::Approx(pair(b.nu(), basis[k])).epsilon(1e-12));
  }
}

TEST_CASE("log-weights stay finite") {
  const auto tr = simulate_canonical(base("linear_gaussian", "{}", 500, 1.0, 0.01));
  for (double l : tr.final_state.log_w) CHECK(std::isfinite(l));
  for (const auto& nu : tr.nu) {
    for (double w : nu.weights()) CHECK(w > 0.0);
  }
}

TEST_CASE("numerical blowup is reported with the step") {
  const auto c = base("constant", R"({"h": 1e200})", 10, 0.1, 0.01);
  try {
    simulate_canonical(c);
    FAIL("expected NumericalBlowup");
  } catch (const NumericalBlowup& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("girsanov tilt") {
  const CoordinateFunction id(1, 0);
  const ConstantFunction one(1, 1.0);
  SUBCASE("common noise: tilted mean is the plain mean") {
    const auto tr = simulate_canonical(base("common_noise", "{}", 500));
    const auto est = girsanov_tilt(tr, id);
    const double plain = std::accumulate(tr.final_state.x.begin(), tr.final_state.x.end(), 0.0) / 500;
    CHECK(est.value == doctest::Approx(plain).epsilon(1e-13));
    CHECK(est.ess == doctest::Approx(500.0));
  }
  SUBCASE("constant statistic") {
    const auto tr = simulate_canonical(base("linear_gaussian", "{}", 500));
    CHECK(girsanov_tilt(tr, one).value == 1.0);
    CHECK(girsanov_tilt(tr, one).standard_error == 0.0);
    CHECK(girsanov_tilt(tr, id).b2_terminal.size() == 500);
  }
  SUBCASE("collapsed weights are refused") {
    const auto tr = simulate_canonical(
        base("constant", R"({"h": 60, "sigma": 1})", 20, 1.0, 0.01));
    CHECK_THROWS_AS(girsanov_tilt(tr, id), WeightDegeneracy);
  }
}

TEST_CASE("effective sample size") {
  CHECK(effective_sample_size(std::vector<double>(100, 0.3)) == doctest::Approx(100.0));
  std::vector<double> dominant(50, -50.0);
  dominant[0] = 50.0;
  CHECK(effective_sample_size(dominant) == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> l(200);
  for (auto& v : l) v = g(rng);
  long double s1 = 0, s2 = 0;
  for (double v : l) {
    s1 += std::exp(static_cast<long double>(v));
    s2 += std::exp(2.0L * v);
  }
  CHECK(effective_sample_size(l) == doctest::Approx(static_cast<double>(s1 * s1 / s2)).epsilon(1e-12));
}

TEST_CASE("gaussian initial law") {
  auto c = base("common_noise", "{}", 4000, 0.01, 0.01);
  c.x0.kind = InitialLaw::Kind::kGaussian;
  c.x0.mean = {1.5};
  c.x0.stddev = 0.5;
  const auto s = initial_state(c);
  double m = 0.0;
  for (double v : s.x) m += v;
  m /= 4000;
  CHECK(std::abs(m - 1.5) < 5 * 0.5 / std::sqrt(4000.0));
}
