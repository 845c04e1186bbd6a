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

#include "cmv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cmv/errors.hpp"
#include "cmv/hash.hpp"

namespace cmv {

using json = nlohmann::json;

std::vector<std::string> known_checks() {
  return {"zakai", "cfpe",       "rinf",      "ks",           "martingale",
          "lyapunov", "roundtrip", "regularity", "lipschitz", "nondegeneracy"};
}

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path, std::string_view text)
      : j_(j), path_(std::move(path)), text_(text) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    std::string msg = "config field '" + field + "' " + what;
    const std::string leaf = field.substr(field.rfind('.') + 1);
    const auto pos = text_.find("\"" + leaf + "\"");
    if (pos != std::string_view::npos) {
      msg += " (line " + std::to_string(line_of_offset(text_, pos)) + ")";
    }
    throw ConfigError(msg);
  }

  std::string full(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) { return j_.at(key); }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(full(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(full(key), "must be finite");
    return x;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      fail(full(key), "must be a nonnegative integer");
    }
    return v.get<std::size_t>();
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(full(key), "must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(full(key), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(full(key), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(full(key), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(full(key), "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key,
                                   std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(full(key), "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(full(key), "must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    static const json kEmpty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : kEmpty, full(key), text_);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(full(it.key()), "is not a known key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::string_view text_;
  std::set<std::string> used_;
};

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "' " + what);
}

json to_json(const RunConfig& c, bool runtime) {
  json j;
  j["seed"] = c.seed;
  j["family"] = c.family;
  j["params"] = json::parse(c.params);
  j["dim"] = c.dim;
  j["N"] = c.N;
  j["T"] = c.T;
  j["dt"] = c.dt;
  j["M_Y"] = c.M_Y;
  j["M_nu"] = c.M_nu;
  j["record_stride"] = c.record_stride;
  j["x0"] = {{"kind", c.x0.kind == InitialLaw::Kind::kPoint ? "point" : "gaussian"},
             {"mean", c.x0.mean},
             {"stddev", c.x0.stddev}};
  j["basis"] = {{"count", c.basis.count},
                {"half_width", c.basis.half_width},
                {"base_radius", c.basis.base_radius}};
  j["K"] = c.K;
  j["checks"] = c.checks;
  j["bootstrap"] = c.bootstrap;
  const Tolerances& t = c.tolerances;
  j["tolerances"] = {{"zakai_z", t.zakai_z},
                     {"zakai_fraction", t.zakai_fraction},
                     {"cfpe_z", t.cfpe_z},
                     {"dirac_gap", t.dirac_gap},
                     {"martingale_z", t.martingale_z},
                     {"ks", t.ks},
                     {"rinf", t.rinf},
                     {"lyapunov_uptick", t.lyapunov_uptick},
                     {"lipschitz", t.lipschitz},
                     {"oracle_se", t.oracle_se},
                     {"oracle_rel_l2", t.oracle_rel_l2}};
  j["cfpe"] = {{"mass_spread", c.cfpe.mass_spread},
               {"outer", c.cfpe.outer},
               {"function", c.cfpe.function}};
  j["lyapunov"] = {{"delta", c.lyapunov.delta}, {"K_const", c.lyapunov.K_const}};
  j["regularity"] = {{"p", c.regularity_p}};
  j["roundtrip"] = {{"N_list", c.roundtrip.N_list},
                    {"K", c.roundtrip.K},
                    {"delta", c.roundtrip.delta},
                    {"fresh_b1", c.roundtrip.fresh_b1},
                    {"mollified_max_N", c.roundtrip.mollified_max_N}};
  j["validators"] = {{"probes", c.validator_probes}};
  j["oracle"] = {{"substeps", c.oracle_substeps}};
  j["sweep"] = {{"axis", c.sweep.axis},
                {"values", c.sweep.values},
                {"functions", c.sweep.functions},
                {"base_radius", c.sweep.base_radius},
                {"gate_slope", c.sweep.gate_slope},
                {"slope_min", c.sweep.slope_min},
                {"slope_max", c.sweep.slope_max}};
  if (runtime) {
    j["output"] = c.output;
    j["workers"] = c.workers;
  }
  return j;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON (line " +
                      std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                      "): " + e.what());
  }
  RunConfig c;
  Reader r(root, "", text);
  if (!r.has("seed")) throw ConfigError("config field 'seed' is required");
  {
    const json& s = r.at("seed");
    if (!s.is_number_unsigned()) r.fail("seed", "must be an unsigned 64-bit integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.family = r.string("family", c.family);
  if (r.has("params")) {
    const json& p = r.at("params");
    if (!p.is_object()) r.fail("params", "must be an object");
    c.params = p.dump();
  }
  c.dim = r.integer("dim", c.dim);
  c.N = r.count("N", c.N);
  c.T = r.number("T", c.T);
  c.dt = r.number("dt", c.dt);
  c.M_Y = r.count("M_Y", c.M_Y);
  c.M_nu = r.count("M_nu", c.M_nu);
  c.record_stride = r.count("record_stride", c.record_stride);
  {
    Reader x = r.child("x0");
    const std::string kind = x.string("kind", "point");
    if (kind == "point") {
      c.x0.kind = InitialLaw::Kind::kPoint;
    } else if (kind == "gaussian") {
      c.x0.kind = InitialLaw::Kind::kGaussian;
    } else {
      x.fail("x0.kind", "must be 'point' or 'gaussian'");
    }
    c.x0.mean = x.numbers("mean", {});
    c.x0.stddev = x.number("stddev", 0.0);
    x.finish();
  }
  {
    Reader b = r.child("basis");
    c.basis.count = b.count("count", c.basis.count);
    c.basis.half_width = b.number("half_width", c.basis.half_width);
    c.basis.base_radius = b.number("base_radius", c.basis.base_radius);
    b.finish();
  }
  c.K = r.count("K", c.K);
  c.checks = r.strings("checks", c.checks);
  c.bootstrap = r.count("bootstrap", c.bootstrap);
  {
    Reader t = r.child("tolerances");
    Tolerances& tl = c.tolerances;
    tl.zakai_z = t.number("zakai_z", tl.zakai_z);
    tl.zakai_fraction = t.number("zakai_fraction", tl.zakai_fraction);
    tl.cfpe_z = t.number("cfpe_z", tl.cfpe_z);
    tl.dirac_gap = t.number("dirac_gap", tl.dirac_gap);
    tl.martingale_z = t.number("martingale_z", tl.martingale_z);
    tl.ks = t.number("ks", tl.ks);
    tl.rinf = t.number("rinf", tl.rinf);
    tl.lyapunov_uptick = t.number("lyapunov_uptick", tl.lyapunov_uptick);
    tl.lipschitz = t.number("lipschitz", tl.lipschitz);
    tl.oracle_se = t.number("oracle_se", tl.oracle_se);
    tl.oracle_rel_l2 = t.number("oracle_rel_l2", tl.oracle_rel_l2);
    t.finish();
  }
  {
    Reader f = r.child("cfpe");
    c.cfpe.mass_spread = f.number("mass_spread", c.cfpe.mass_spread);
    c.cfpe.outer = f.string("outer", c.cfpe.outer);
    c.cfpe.function = f.count("function", c.cfpe.function);
    f.finish();
  }
  {
    Reader l = r.child("lyapunov");
    c.lyapunov.delta = l.number("delta", c.lyapunov.delta);
    c.lyapunov.K_const = l.number("K_const", c.lyapunov.K_const);
    l.finish();
  }
  {
    Reader g = r.child("regularity");
    c.regularity_p = g.number("p", c.regularity_p);
    g.finish();
  }
  {
    Reader rt = r.child("roundtrip");
    const auto ns = rt.numbers("N_list", {});
    if (rt.has("N_list")) {
      c.roundtrip.N_list.clear();
      for (double v : ns) {
        if (!(v >= 2.0) || v != std::floor(v)) rt.fail("roundtrip.N_list", "must hold integers >= 2");
        c.roundtrip.N_list.push_back(static_cast<std::size_t>(v));
      }
    }
    c.roundtrip.K = rt.count("K", c.roundtrip.K);
    c.roundtrip.delta = rt.number("delta", c.roundtrip.delta);
    c.roundtrip.fresh_b1 = rt.boolean("fresh_b1", c.roundtrip.fresh_b1);
    c.roundtrip.mollified_max_N = rt.count("mollified_max_N", c.roundtrip.mollified_max_N);
    rt.finish();
  }
  {
    Reader v = r.child("validators");
    c.validator_probes = v.count("probes", c.validator_probes);
    v.finish();
  }
  {
    Reader o = r.child("oracle");
    c.oracle_substeps = o.integer("substeps", c.oracle_substeps);
    o.finish();
  }
  {
    Reader s = r.child("sweep");
    c.sweep.axis = s.string("axis", c.sweep.axis);
    c.sweep.values = s.numbers("values", c.sweep.values);
    c.sweep.functions = s.count("functions", c.sweep.functions);
    c.sweep.base_radius = s.number("base_radius", c.sweep.base_radius);
    c.sweep.gate_slope = s.boolean("gate_slope", c.sweep.gate_slope);
    c.sweep.slope_min = s.number("slope_min", c.sweep.slope_min);
    c.sweep.slope_max = s.number("slope_max", c.sweep.slope_max);
    s.finish();
  }
  c.output = r.string("output", c.output);
  c.workers = r.integer("workers", c.workers);
  r.finish();
  validate_config(c);
  return c;
}

void validate_config(const RunConfig& c) {
  const auto families = coefficient_families();
  if (std::find(families.begin(), families.end(), c.family) == families.end()) {
    invalid("family", "names an unknown coefficient family '" + c.family + "'");
  }
  if (c.dim < 1 || c.dim > kMaxDim) invalid("dim", "must be in 1..8");
  if (c.N < 2) invalid("N", "must be at least 2");
  if (!(c.T > 0.0)) invalid("T", "must be positive");
  if (!(c.dt > 0.0)) invalid("dt", "must be positive");
  const double ratio = c.T / c.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    invalid("dt", "must divide T");
  }
  if (c.M_Y < 1) invalid("M_Y", "must be at least 1");
  if (c.M_nu < 1) invalid("M_nu", "must be at least 1");
  if (c.record_stride < 1) invalid("record_stride", "must be at least 1");
  if (!c.x0.mean.empty() && static_cast<int>(c.x0.mean.size()) != c.dim) {
    invalid("x0.mean", "must have dim entries");
  }
  if (!(c.x0.stddev >= 0.0)) invalid("x0.stddev", "must be nonnegative");
  if (c.basis.count < 1) invalid("basis.count", "must be at least 1");
  if (!(c.basis.half_width > 0.0)) invalid("basis.half_width", "must be positive");
  if (!(c.basis.base_radius > 0.0)) invalid("basis.base_radius", "must be positive");
  if (c.K < 1 || c.K > c.basis.count) invalid("K", "must be in 1..basis.count");
  const auto checks = known_checks();
  for (const auto& name : c.checks) {
    if (std::find(checks.begin(), checks.end(), name) == checks.end()) {
      invalid("checks", "names an unknown check '" + name + "'");
    }
  }
  const Tolerances& t = c.tolerances;
  for (const auto& [name, v] :
       {std::pair{"zakai_z", t.zakai_z}, {"cfpe_z", t.cfpe_z}, {"dirac_gap", t.dirac_gap},
        {"martingale_z", t.martingale_z}, {"ks", t.ks}, {"rinf", t.rinf},
        {"lyapunov_uptick", t.lyapunov_uptick}, {"lipschitz", t.lipschitz},
        {"oracle_se", t.oracle_se}, {"oracle_rel_l2", t.oracle_rel_l2}}) {
    if (!(v > 0.0)) invalid(std::string("tolerances.") + name, "must be positive");
  }
  if (!(t.zakai_fraction > 0.0 && t.zakai_fraction <= 1.0)) {
    invalid("tolerances.zakai_fraction", "must be in (0, 1]");
  }
  if (!(c.cfpe.mass_spread >= 0.0 && c.cfpe.mass_spread < 1.0)) {
    invalid("cfpe.mass_spread", "must be in [0, 1)");
  }
  if (c.cfpe.outer != "square" && c.cfpe.outer != "identity") {
    invalid("cfpe.outer", "must be 'square' or 'identity'");
  }
  if (c.cfpe.function >= c.basis.count) invalid("cfpe.function", "must index the basis");
  if (!(c.lyapunov.delta > 0.0)) invalid("lyapunov.delta", "must be positive");
  if (!(c.regularity_p > 1.0)) invalid("regularity.p", "must exceed 1");
  if (c.roundtrip.N_list.empty()) invalid("roundtrip.N_list", "must not be empty");
  for (std::size_t i = 1; i < c.roundtrip.N_list.size(); ++i) {
    if (c.roundtrip.N_list[i] <= c.roundtrip.N_list[i - 1]) {
      invalid("roundtrip.N_list", "must be increasing");
    }
  }
  const bool roundtrip = std::find(c.checks.begin(), c.checks.end(), "roundtrip") != c.checks.end();
  if (c.roundtrip.K < 1 || (roundtrip && c.roundtrip.K > c.basis.count)) {
    invalid("roundtrip.K", "must be in 1..basis.count");
  }
  if (!(c.roundtrip.delta > 0.0)) invalid("roundtrip.delta", "must be positive");
  if (c.validator_probes < 1) invalid("validators.probes", "must be at least 1");
  if (c.oracle_substeps < 1) invalid("oracle.substeps", "must be at least 1");
  if (c.sweep.axis != "N" && c.sweep.axis != "dt" && c.sweep.axis != "K") {
    invalid("sweep.axis", "must be 'N', 'dt' or 'K'");
  }
  if (c.sweep.values.size() < 2) invalid("sweep.values", "needs at least two values");
  for (double v : c.sweep.values) {
    if (!(v > 0.0)) invalid("sweep.values", "must be positive");
  }
  if (c.sweep.functions < 1) invalid("sweep.functions", "must be at least 1");
  if (!(c.sweep.base_radius > 0.0)) invalid("sweep.base_radius", "must be positive");
  if (c.workers < 0) invalid("workers", "must be >= 0");
  try {
    build_coefficients(c);
  } catch (const ParameterError& e) {
    invalid("params", std::string("rejected: ") + e.what());
  } catch (const DimensionError& e) {
    invalid("params", std::string("rejected: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  return to_json(config, true).dump(2) + "\n";
}

std::string canonical_config(const RunConfig& config) {
  return to_json(config, false).dump();
}

std::string config_hash(const RunConfig& config) {
  return git_blob_sha1(canonical_config(config));
}

CoefficientsPtr build_coefficients(const RunConfig& config) {
  return make_coefficients(config.family, config.dim, config.params);
}

TestFunctionBasis build_basis(const RunConfig& config) {
  DyadicBasisOptions o;
  o.half_width = config.basis.half_width;
  o.base_radius = config.basis.base_radius;
  return make_dyadic_basis(config.dim, config.basis.count, o);
}

SimulationConfig simulation_config(const RunConfig& config,
                                   const CoefficientsPtr& coeffs,
                                   std::size_t replica, std::size_t nu_index) {
  SimulationConfig s;
  s.N = config.N;
  s.T = config.T;
  s.dt = config.dt;
  s.dim = config.dim;
  s.x0 = config.x0;
  s.coeffs = coeffs;
  s.seed = config.seed;
  s.M_Y = config.M_Y;
  s.M_nu = config.M_nu;
  s.record_stride = config.record_stride;
  s.replica = replica;
  s.nu_index = nu_index;
  return s;
}

}  // namespace cmv
