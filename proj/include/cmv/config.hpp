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

#ifndef CMV_CONFIG_HPP
#define CMV_CONFIG_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmv/basis.hpp"
#include "cmv/coefficients.hpp"
#include "cmv/particles.hpp"

namespace cmv {

struct BasisSpec {
  std::size_t count = 50;
  double half_width = 4.0;
  double base_radius = 4.0;
};

struct Tolerances {
  double zakai_z = 5.0;
  double zakai_fraction = 0.9;
  double cfpe_z = 5.0;
  double dirac_gap = 1e-10;
  double martingale_z = 3.0;
  double ks = 1e-12;
  double rinf = 1e-12;
  double lyapunov_uptick = 0.02;
  double lipschitz = 0.01;
  double oracle_se = 3.0;
  double oracle_rel_l2 = 0.05;
};

struct CfpeSpec {
  double mass_spread = 0.5;     // initial masses ~ U[1 - s, 1 + s]
  std::string outer = "square";  // identity | square
  std::size_t function = 0;      // index into the basis
};

struct LyapunovSpec {
  double delta = 0.1;
  double K_const = -1.0;  // < 0: use the declared Lipschitz constant
};

struct RoundtripSpec {
  std::vector<std::size_t> N_list{500, 2000, 8000};
  std::size_t K = 16;
  double delta = 0.1;
  bool fresh_b1 = true;
  std::size_t mollified_max_N = 2000;
};

struct SweepSpec {
  std::string axis = "N";  // N | dt | K
  std::vector<double> values{500, 2000, 8000};
  std::size_t functions = 10;
  double base_radius = 1.0;
  bool gate_slope = true;
  double slope_min = -0.65;
  double slope_max = -0.35;
};

/// Everything a run needs. Serializes back to the same JSON it was read from
/// (modulo defaults being written out).
struct RunConfig {
  std::uint64_t seed = 0;
  std::string family = "linear_gaussian";
  std::string params = "{}";  // JSON object text, canonical dump
  int dim = 1;
  std::size_t N = 1000;
  double T = 1.0;
  double dt = 0.01;
  std::size_t M_Y = 1;
  std::size_t M_nu = 1;
  std::size_t record_stride = 10;
  InitialLaw x0;
  BasisSpec basis;
  std::size_t K = 8;
  std::vector<std::string> checks{"ks", "zakai"};
  std::size_t bootstrap = 200;
  Tolerances tolerances;
  CfpeSpec cfpe;
  LyapunovSpec lyapunov;
  double regularity_p = 2.0;
  RoundtripSpec roundtrip;
  std::size_t validator_probes = 2000;
  int oracle_substeps = 10;
  SweepSpec sweep;
  std::string output = "out";
  int workers = 0;  // 0: runtime default
};

std::vector<std::string> known_checks();

/// Throws ConfigError naming the field and, where possible, the line.
RunConfig parse_config(std::string_view text);
/// Throws IoError if unreadable, ConfigError if invalid.
RunConfig load_config(const std::string& path);
/// Pretty JSON with every field spelled out.
std::string serialize_config(const RunConfig& config);
/// Compact JSON of the config without `output` and `workers`.
std::string canonical_config(const RunConfig& config);
/// Hash of the serialized config without `output` and `workers`.
std::string config_hash(const RunConfig& config);

/// Cross-field validation; parse_config calls it.
void validate_config(const RunConfig& config);

CoefficientsPtr build_coefficients(const RunConfig& config);
TestFunctionBasis build_basis(const RunConfig& config);
SimulationConfig simulation_config(const RunConfig& config,
                                   const CoefficientsPtr& coeffs,
                                   std::size_t replica, std::size_t nu_index);

}  // namespace cmv

#endif  // CMV_CONFIG_HPP
