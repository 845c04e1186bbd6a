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

#include <nlohmann/json.hpp>
#include <string>

#include "cmv/config.hpp"
#include "cmv/errors.hpp"

using namespace cmv;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const auto c = parse_config(R"({"seed": 3})");
  CHECK(c.seed == 3);
  CHECK(c.family == "linear_gaussian");
  CHECK(c.basis.count == 50);
  CHECK(c.record_stride == 10);
}

TEST_CASE("serialization round trip is lossless") {
  const std::string text = R"({
    "seed": 18446744073709551615,
    "family": "bounded_smooth",
    "params": {"kappa": 1.5, "xi": 0.25},
    "dim": 2, "N": 777, "T": 0.5, "dt": 0.005, "M_Y": 3, "M_nu": 2,
    "record_stride": 5,
    "x0": {"kind": "gaussian", "mean": [0.5, -0.5], "stddev": 0.3},
    "basis": {"count": 20, "half_width": 3, "base_radius": 2},
    "K": 6, "checks": ["ks", "rinf", "martingale"], "bootstrap": 40,
    "tolerances": {"zakai_z": 4.5, "oracle_rel_l2": 0.1},
    "cfpe": {"mass_spread": 0.25, "outer": "identity", "function": 2},
    "lyapunov": {"delta": 0.2, "K_const": 3},
    "regularity": {"p": 1.5},
    "roundtrip": {"N_list": [100, 200], "K": 4, "delta": 0.05, "fresh_b1": false},
    "sweep": {"axis": "dt", "values": [0.01, 0.005], "gate_slope": false},
    "output": "somewhere", "workers": 2
  })";
  const auto a = parse_config(text);
  CHECK(a.seed == 18446744073709551615ULL);
  CHECK(a.x0.mean == std::vector<double>{0.5, -0.5});
  CHECK(a.roundtrip.N_list == std::vector<std::size_t>{100, 200});
  const auto s = serialize_config(a);
  const auto b = parse_config(s);
  CHECK(serialize_config(b) == s);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(b.output == "somewhere");
  CHECK(b.workers == 2);
}

TEST_CASE("hash ignores output and workers only") {
  auto a = parse_config(R"({"seed": 1})");
  auto b = a;
  b.output = "elsewhere";
  b.workers = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 40);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(canonical_config(a).find("workers") == std::string::npos);
}

TEST_CASE("unknown keys are named with their line") {
  const auto msg = error_of("{\n  \"seed\": 1,\n  \"Nn\": 5\n}");
  CHECK(msg.find("'Nn'") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);
  const auto nested = error_of("{\"seed\": 1,\n \"basis\": {\"count\": 4,\n \"radius\": 1}}");
  CHECK(nested.find("basis.radius") != std::string::npos);
  CHECK(nested.find("line 3") != std::string::npos);
}

TEST_CASE("field errors") {
  CHECK(error_of("{}").find("'seed' is required") != std::string::npos);
  CHECK(error_of(R"({"seed": -1})").find("'seed'") != std::string::npos);
  CHECK(error_of(R"({"seed": 1, "N": "many"})").find("'N'") != std::string::npos);
  CHECK(error_of(R"({"seed": 1, "checks": ["zakia"]})").find("zakia") != std::string::npos);
  CHECK(error_of(R"({"seed": 1, "x0": {"kind": "cloud"}})").find("x0.kind") != std::string::npos);
  CHECK(error_of("{\"seed\": 1,\n\"N\": }").find("line 2") != std::string::npos);
  CHECK_FALSE(error_of(R"({"seed": 1, "T": 1, "dt": 0.3})").empty());
  CHECK_FALSE(error_of(R"({"seed": 1, "family": "nope"})").empty());
  CHECK_FALSE(error_of(R"({"seed": 1, "params": {"bogus": 1}})").empty());
}

TEST_CASE("load_config reports missing files as IO errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/cmv.json"), IoError);
}

TEST_CASE("simulation config carries replica indices") {
  const auto c = parse_config(R"({"seed": 9, "N": 64, "T": 0.1, "dt": 0.01, "x0": {"mean": [2]}})");
  const auto coeffs = build_coefficients(c);
  const auto s = simulation_config(c, coeffs, 4, 2);
  CHECK(s.replica == 4);
  CHECK(s.nu_index == 2);
  CHECK(s.N == 64);
  CHECK(s.x0.mean == std::vector<double>{2.0});
  CHECK(build_basis(c).size() == 50);
}
