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

#include "cmv/coefficients.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "cmv/errors.hpp"
#include "cmv/hash.hpp"
#include <nlohmann/json.hpp>

namespace cmv {

using nlohmann::json;

CoefficientSet::CoefficientSet(std::string family, int dim, YDependence y_dep,
                               MuDependence mu_dep, DeclaredBounds bounds,
                               std::string description)
    : family_(std::move(family)),
      dim_(dim),
      y_dep_(y_dep),
      mu_dep_(mu_dep),
      bounds_(bounds),
      description_(std::move(description)) {
  if (dim_ < 1 || dim_ > kMaxDim) {
    throw DimensionError("coefficient dimension must be 1.." +
                         std::to_string(kMaxDim));
  }
}

std::string CoefficientSet::content_hash() const {
  return git_blob_sha1(description_);
}

std::vector<double> CoefficientSet::features(
    const ProbabilityAtomMeasure&) const {
  return {};
}

void CoefficientSet::eval(double t, const double* x, const ObsContext& obs,
                          std::span<const double> features,
                          CoeffValues& out) const {
  evaluate(t, x, obs, features, out);
  const int d = dim_;
  bool ok = std::isfinite(out.h);
  for (int a = 0; a < d && ok; ++a) {
    ok = std::isfinite(out.b[a]) && std::isfinite(out.rho[a]);
  }
  for (int a = 0; a < d * d && ok; ++a) ok = std::isfinite(out.sigma[a]);
  if (!ok) {
    std::ostringstream os;
    os << family_ << ": non-finite coefficient at t=" << t << ", y=" << obs.y
       << ", x=(";
    for (int a = 0; a < d; ++a) os << (a ? "," : "") << x[a];
    os << ")";
    throw CoefficientError(os.str());
  }
}

CoeffValues CoefficientSet::eval(double t, std::span<const double> x,
                                 const ObsContext& obs,
                                 const ProbabilityAtomMeasure* mu) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw DimensionError("coefficient input has dimension " +
                         std::to_string(x.size()) + ", expected " +
                         std::to_string(dim_));
  }
  std::vector<double> feats;
  if (mu_dep_ == MuDependence::kState) {
    if (!mu) throw ParameterError(family_ + ": measure argument required");
    if (mu->dim() != dim_) throw DimensionError("measure dimension mismatch");
    feats = features(*mu);
  }
  CoeffValues out;
  eval(t, x.data(), obs, feats, out);
  return out;
}

LambdaCoefficients::LambdaCoefficients(int dim, EvalFn eval,
                                       FeatureFn features,
                                       DeclaredBounds bounds,
                                       YDependence y_dep, std::string name)
    : CoefficientSet(name, dim, y_dep,
                     features ? MuDependence::kState : MuDependence::kNone,
                     bounds, json{{"family", name}, {"dim", dim}}.dump()),
      eval_(std::move(eval)),
      features_(std::move(features)) {}

std::vector<double> LambdaCoefficients::features(
    const ProbabilityAtomMeasure& mu) const {
  return features_ ? features_(mu) : std::vector<double>{};
}

void LambdaCoefficients::evaluate(double t, const double* x,
                                  const ObsContext& obs,
                                  std::span<const double> features,
                                  CoeffValues& out) const {
  eval_(t, x, obs, features, out);
}

std::vector<double> measure_mean(const ProbabilityAtomMeasure& mu) {
  const int d = mu.dim();
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double w = mu.weight(i);
    const double* x = mu.atom(i);
    for (int a = 0; a < d; ++a) acc[a].add(w * x[a]);
  }
  std::vector<double> m(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) m[a] = acc[a].value();
  return m;
}

namespace {

// ---- parameter parsing ----------------------------------------------------

class Params {
 public:
  Params(const std::string& family, const std::string& text) : family_(family) {
    try {
      j_ = text.empty() ? json::object() : json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParameterError(family + ": invalid parameter JSON: " + e.what());
    }
    if (!j_.is_object()) throw ParameterError(family + ": params must be an object");
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    if (!j_.contains(key)) {
      canonical_[key] = fallback;
      return fallback;
    }
    const json& v = j_.at(key);
    if (!v.is_number()) throw ParameterError(family_ + "." + key + " must be a number");
    const double out = v.get<double>();
    if (!std::isfinite(out)) throw ParameterError(family_ + "." + key + " must be finite");
    canonical_[key] = out;
    return out;
  }

  // Scalar s -> s * ones(d), or an explicit length-d vector.
  std::vector<double> vector(const std::string& key, int d, double fallback) {
    used_.insert(key);
    std::vector<double> out(static_cast<std::size_t>(d), fallback);
    if (j_.contains(key)) {
      const json& v = j_.at(key);
      if (v.is_number()) {
        std::fill(out.begin(), out.end(), v.get<double>());
      } else if (v.is_array() && static_cast<int>(v.size()) == d) {
        for (int a = 0; a < d; ++a) {
          if (!v[a].is_number()) throw ParameterError(family_ + "." + key + " entries must be numbers");
          out[a] = v[a].get<double>();
        }
      } else {
        throw ParameterError(family_ + "." + key + " must be a number or a length-" +
                             std::to_string(d) + " array");
      }
    }
    for (double x : out) {
      if (!std::isfinite(x)) throw ParameterError(family_ + "." + key + " must be finite");
    }
    canonical_[key] = out;
    return out;
  }

  // Scalar s -> s * I, or an explicit d x d nested array.
  std::vector<double> matrix(const std::string& key, int d, double fallback) {
    used_.insert(key);
    std::vector<double> out(static_cast<std::size_t>(d * d), 0.0);
    auto diag = [&](double s) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int a = 0; a < d; ++a) out[a * d + a] = s;
    };
    diag(fallback);
    if (j_.contains(key)) {
      const json& v = j_.at(key);
      if (v.is_number()) {
        diag(v.get<double>());
      } else if (v.is_array() && static_cast<int>(v.size()) == d) {
        for (int a = 0; a < d; ++a) {
          if (!v[a].is_array() || static_cast<int>(v[a].size()) != d) {
            throw ParameterError(family_ + "." + key + " must be a " + std::to_string(d) +
                                 "x" + std::to_string(d) + " array");
          }
          for (int b = 0; b < d; ++b) out[a * d + b] = v[a][b].get<double>();
        }
      } else {
        throw ParameterError(family_ + "." + key + " must be a number or a matrix");
      }
    }
    for (double x : out) {
      if (!std::isfinite(x)) throw ParameterError(family_ + "." + key + " must be finite");
    }
    json rows = json::array();
    for (int a = 0; a < d; ++a) {
      rows.push_back(std::vector<double>(out.begin() + a * d, out.begin() + (a + 1) * d));
    }
    canonical_[key] = rows;
    return out;
  }

  // Applies "declared" overrides and rejects unknown keys.
  void finish(DeclaredBounds& b) {
    used_.insert("declared");
    if (j_.contains("declared")) {
      const json& dj = j_.at("declared");
      if (!dj.is_object()) throw ParameterError(family_ + ".declared must be an object");
      const std::pair<const char*, double*> fields[] = {
          {"c_lip", &b.c_lip},       {"sigma0", &b.sigma0},
          {"b_sup", &b.b_sup},       {"sigma_sup", &b.sigma_sup},
          {"rho_sup", &b.rho_sup},   {"h_sup", &b.h_sup},
          {"b_c1", &b.b_c1},         {"h_c1", &b.h_c1},
          {"rho_c2", &b.rho_c2},     {"sigma_c2", &b.sigma_c2}};
      for (auto it = dj.begin(); it != dj.end(); ++it) {
        bool known = false;
        for (const auto& [name, ptr] : fields) {
          if (it.key() == name) {
            if (!it.value().is_number()) {
              throw ParameterError(family_ + ".declared." + it.key() + " must be a number");
            }
            *ptr = it.value().get<double>();
            known = true;
          }
        }
        if (!known) throw ParameterError(family_ + ".declared: unknown key '" + it.key() + "'");
      }
    }
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ParameterError(family_ + ": unknown parameter '" + it.key() + "'");
      }
    }
    canonical_["declared"] = {
        {"c_lip", b.c_lip},   {"sigma0", b.sigma0},       {"b_sup", b.b_sup},
        {"sigma_sup", b.sigma_sup}, {"rho_sup", b.rho_sup}, {"h_sup", b.h_sup},
        {"b_c1", b.b_c1},     {"h_c1", b.h_c1},           {"rho_c2", b.rho_c2},
        {"sigma_c2", b.sigma_c2}};
  }

  std::string description(int dim) const {
    return json{{"family", family_}, {"dim", dim}, {"params", canonical_}}.dump();
  }

 private:
  std::string family_;
  json j_;
  json canonical_ = json::object();
  std::set<std::string> used_;
};

double frobenius(const std::vector<double>& m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

double euclid(const std::vector<double>& v) { return frobenius(v); }

double min_eig_constant(const std::vector<double>& sigma,
                        const std::vector<double>& rho, int d) {
  CoeffValues v;
  std::copy(sigma.begin(), sigma.end(), v.sigma);
  std::copy(rho.begin(), rho.end(), v.rho);
  return nondegeneracy_eigenvalue(v, d);
}

double default_sigma0(double min_eig) {
  return min_eig > 1e-8 ? min_eig * (1.0 - 1e-9) : 1e-8;
}

// ---- families -------------------------------------------------------------

class ConstantCoefficients final : public CoefficientSet {
 public:
  ConstantCoefficients(int d, std::vector<double> b, std::vector<double> sigma,
                       std::vector<double> rho, double h, DeclaredBounds bounds,
                       std::string desc)
      : CoefficientSet("constant", d, YDependence::kState, MuDependence::kNone,
                       bounds, std::move(desc)),
        b_(std::move(b)),
        sigma_(std::move(sigma)),
        rho_(std::move(rho)),
        h_(h) {}

 protected:
  void evaluate(double, const double*, const ObsContext&,
                std::span<const double>, CoeffValues& out) const override {
    std::copy(b_.begin(), b_.end(), out.b);
    std::copy(sigma_.begin(), sigma_.end(), out.sigma);
    std::copy(rho_.begin(), rho_.end(), out.rho);
    out.h = h_;
  }

 private:
  std::vector<double> b_, sigma_, rho_;
  double h_;
};

// b = a x + abar <mu, id>, constant sigma and rho, h = c x_1.
class LinearCoefficients final : public CoefficientSet {
 public:
  LinearCoefficients(std::string family, int d, double a, double abar,
                     std::vector<double> sigma, std::vector<double> rho,
                     double c, DeclaredBounds bounds, std::string desc)
      : CoefficientSet(std::move(family), d, YDependence::kState,
                       abar != 0.0 ? MuDependence::kState : MuDependence::kNone,
                       bounds, std::move(desc)),
        a_(a),
        abar_(abar),
        sigma_(std::move(sigma)),
        rho_(std::move(rho)),
        c_(c) {}

  std::vector<double> features(const ProbabilityAtomMeasure& mu) const override {
    if (abar_ == 0.0) return {};
    return measure_mean(mu);
  }

  void mark_oracle_only() { set_oracle_only(true); }

 protected:
  void evaluate(double, const double* x, const ObsContext&,
                std::span<const double> f, CoeffValues& out) const override {
    const int d = dim();
    for (int k = 0; k < d; ++k) {
      out.b[k] = a_ * x[k];
      if (abar_ != 0.0) out.b[k] += abar_ * f[k];
    }
    std::copy(sigma_.begin(), sigma_.end(), out.sigma);
    std::copy(rho_.begin(), rho_.end(), out.rho);
    out.h = c_ == 0.0 ? 0.0 : c_ * x[0];
  }

 private:
  double a_, abar_;
  std::vector<double> sigma_, rho_;
  double c_;
};

// b_k = -kappa tanh(x_k) + abar tanh(m_k) + eta tanh(y) + xi tanh(int Y),
// h = c tanh(x_1 - lambda m_1), constant sigma and rho.
class BoundedSmoothCoefficients final : public CoefficientSet {
 public:
  BoundedSmoothCoefficients(int d, double kappa, double abar, double eta,
                            double xi, std::vector<double> sigma,
                            std::vector<double> rho, double c, double lambda,
                            DeclaredBounds bounds, std::string desc)
      : CoefficientSet("bounded_smooth", d,
                       xi != 0.0 ? YDependence::kPathPrefix : YDependence::kState,
                       (abar != 0.0 || (lambda != 0.0 && c != 0.0))
                           ? MuDependence::kState
                           : MuDependence::kNone,
                       bounds, std::move(desc)),
        kappa_(kappa),
        abar_(abar),
        eta_(eta),
        xi_(xi),
        sigma_(std::move(sigma)),
        rho_(std::move(rho)),
        c_(c),
        lambda_(lambda) {}

  std::vector<double> features(const ProbabilityAtomMeasure& mu) const override {
    if (mu_dependence() == MuDependence::kNone) return {};
    return measure_mean(mu);
  }

 protected:
  void evaluate(double, const double* x, const ObsContext& obs,
                std::span<const double> f, CoeffValues& out) const override {
    const int d = dim();
    const bool mf = !f.empty();
    double common = eta_ * std::tanh(obs.y);
    if (xi_ != 0.0) common += xi_ * std::tanh(obs.y_integral);
    for (int k = 0; k < d; ++k) {
      out.b[k] = -kappa_ * std::tanh(x[k]) + common;
      if (mf) out.b[k] += abar_ * std::tanh(f[k]);
    }
    std::copy(sigma_.begin(), sigma_.end(), out.sigma);
    std::copy(rho_.begin(), rho_.end(), out.rho);
    out.h = c_ * std::tanh(x[0] - (mf ? lambda_ * f[0] : 0.0));
  }

 private:
  double kappa_, abar_, eta_, xi_;
  std::vector<double> sigma_, rho_;
  double c_, lambda_;
};

CoefficientsPtr make_constant(int d, Params& p) {
  auto b = p.vector("b", d, 0.0);
  auto sigma = p.matrix("sigma", d, 1.0);
  auto rho = p.vector("rho", d, 0.0);
  const double h = p.number("h", 0.0);
  DeclaredBounds bd;
  bd.c_lip = 0.0;
  bd.sigma0 = default_sigma0(min_eig_constant(sigma, rho, d));
  bd.b_sup = bd.b_c1 = euclid(b);
  bd.sigma_sup = bd.sigma_c2 = frobenius(sigma);
  bd.rho_sup = bd.rho_c2 = euclid(rho);
  bd.h_sup = bd.h_c1 = std::abs(h);
  p.finish(bd);
  return std::make_shared<ConstantCoefficients>(d, b, sigma, rho, h, bd,
                                                p.description(d));
}

CoefficientsPtr make_linear(const std::string& family, int d, Params& p) {
  const bool has_abar = family != "linear_gaussian";
  const bool has_c = family != "common_noise";
  const double a = p.number("a", -0.5);
  const double abar = has_abar ? p.number("abar", 0.5) : 0.0;
  auto sigma = p.matrix("sigma", d, 1.0);
  auto rho = p.vector("rho", d, family == "common_noise" ? 0.5 : 0.3);
  const double c = has_c ? p.number("c", 1.0) : 0.0;
  const double radius = p.number("bound_radius", 4.0);
  if (!(radius > 0.0)) throw ParameterError(family + ".bound_radius must be positive");
  DeclaredBounds bd;
  bd.c_lip = std::max({std::abs(a), std::abs(abar), std::abs(c)});
  bd.sigma0 = default_sigma0(min_eig_constant(sigma, rho, d));
  bd.b_sup = (std::abs(a) + std::abs(abar)) * radius;
  bd.b_c1 = bd.b_sup + std::abs(a);
  bd.h_sup = std::abs(c) * radius;
  bd.h_c1 = bd.h_sup + std::abs(c);
  bd.sigma_sup = bd.sigma_c2 = frobenius(sigma);
  bd.rho_sup = bd.rho_c2 = euclid(rho);
  p.finish(bd);
  auto out = std::make_shared<LinearCoefficients>(family, d, a, abar, sigma,
                                                  rho, c, bd, p.description(d));
  if (family == "linear_gaussian") out->mark_oracle_only();
  return out;
}

CoefficientsPtr make_bounded_smooth(int d, Params& p) {
  const double kappa = p.number("kappa", 1.0);
  const double abar = p.number("abar", 0.5);
  const double eta = p.number("eta", 0.2);
  const double xi = p.number("xi", 0.0);
  auto sigma = p.matrix("sigma", d, 1.0);
  auto rho = p.vector("rho", d, 0.3);
  const double c = p.number("c", 1.0);
  const double lambda = p.number("lambda", 0.5);
  DeclaredBounds bd;
  bd.c_lip = std::max({std::abs(kappa), std::abs(abar),
                       std::abs(c) * std::max(1.0, std::abs(lambda))});
  bd.sigma0 = default_sigma0(min_eig_constant(sigma, rho, d));
  bd.b_sup = std::sqrt(static_cast<double>(d)) *
             (std::abs(kappa) + std::abs(abar) + std::abs(eta) + std::abs(xi));
  bd.b_c1 = bd.b_sup + std::abs(kappa);
  bd.h_sup = std::abs(c);
  bd.h_c1 = 2.0 * std::abs(c);
  bd.sigma_sup = bd.sigma_c2 = frobenius(sigma);
  bd.rho_sup = bd.rho_c2 = euclid(rho);
  p.finish(bd);
  return std::make_shared<BoundedSmoothCoefficients>(
      d, kappa, abar, eta, xi, sigma, rho, c, lambda, bd, p.description(d));
}

}  // namespace

std::vector<std::string> coefficient_families() {
  return {"constant", "common_noise", "linear_gaussian", "meanfield_linear",
          "bounded_smooth"};
}

CoefficientsPtr make_coefficients(const std::string& family, int dim,
                                  const std::string& params_json) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionError("dimension must be 1.." + std::to_string(kMaxDim));
  }
  Params p(family, params_json);
  if (family == "constant") return make_constant(dim, p);
  if (family == "common_noise" || family == "linear_gaussian" ||
      family == "meanfield_linear") {
    return make_linear(family, dim, p);
  }
  if (family == "bounded_smooth") return make_bounded_smooth(dim, p);
  throw ParameterError("unknown coefficient family '" + family + "'");
}

// ---- validators -------------------------------------------------------------

double nondegeneracy_eigenvalue(const CoeffValues& v, int d) {
  Eigen::MatrixXd s(d, d);
  Eigen::VectorXd r(d);
  for (int a = 0; a < d; ++a) {
    r(a) = v.rho[a];
    for (int b = 0; b < d; ++b) s(a, b) = v.sigma[a * d + b];
  }
  const Eigen::MatrixXd m = s * s.transpose() - r * r.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace {

struct Probe {
  double t = 0.0;
  ObsContext obs;
  std::vector<double> x, xp;
  ProbabilityAtomMeasure mu, mup;
  double w1 = 0.0;
  std::string mode;
};

ProbabilityAtomMeasure random_measure(int d, std::mt19937_64& eng) {
  std::uniform_int_distribution<int> count(1, 5);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  const int n = count(eng);
  std::vector<double> pos(static_cast<std::size_t>(n * d));
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& v : pos) v = normal(eng);
  for (double& v : w) v = weight(eng);
  return normalize(WeightedAtomMeasure(d, std::move(pos), std::move(w)));
}

std::vector<double> random_direction(int d, std::mt19937_64& eng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(static_cast<std::size_t>(d));
  double n2 = 0.0;
  while (n2 == 0.0) {
    n2 = 0.0;
    for (double& c : v) {
      c = normal(eng);
      n2 += c * c;
    }
  }
  for (double& c : v) c /= std::sqrt(n2);
  return v;
}

Probe draw_probe(int d, std::size_t index, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  Probe p;
  p.t = unit(eng);
  p.obs.t = p.t;
  p.obs.y = normal(eng);
  p.obs.y_integral = 0.5 * normal(eng);
  p.x.resize(static_cast<std::size_t>(d));
  for (double& v : p.x) v = 2.0 * normal(eng);
  p.mu = random_measure(d, eng);
  const int modes = d == 1 ? 3 : 2;
  const int mode = static_cast<int>(index % modes);
  auto scale = [&] { return std::pow(10.0, -3.0 + 3.5 * unit(eng)); };
  auto shifted_x = [&] {
    const auto dir = random_direction(d, eng);
    const double eps = scale();
    std::vector<double> xp = p.x;
    for (int a = 0; a < d; ++a) xp[a] += eps * dir[a];
    return xp;
  };
  if (mode == 0) {
    p.mode = "x_only";
    p.xp = shifted_x();
    p.mup = p.mu;
  } else if (mode == 1) {
    p.mode = "translated_measure";
    const auto dir = random_direction(d, eng);
    const double eps = scale();
    std::vector<double> pos = p.mu.positions();
    for (std::size_t i = 0; i < p.mu.size(); ++i) {
      for (int a = 0; a < d; ++a) pos[i * d + a] += eps * dir[a];
    }
    p.mup = ProbabilityAtomMeasure(d, std::move(pos), p.mu.weights());
    p.w1 = eps;
    p.xp = unit(eng) < 0.5 ? p.x : shifted_x();
  } else {
    p.mode = "independent_measure";
    p.mup = random_measure(d, eng);
    p.w1 = wasserstein1(p.mu, p.mup);
    p.xp = unit(eng) < 0.5 ? p.x : shifted_x();
  }
  return p;
}

double distance(const double* u, const double* v, int n) {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += (u[a] - v[a]) * (u[a] - v[a]);
  return std::sqrt(s);
}

ProbeWitness witness_of(const Probe& p) {
  ProbeWitness w;
  w.t = p.t;
  w.y = p.obs.y;
  w.x = p.x;
  w.x_prime = p.xp;
  w.w1 = p.w1;
  w.mode = p.mode;
  return w;
}

}  // namespace

LipschitzReport check_lipschitz(const CoefficientSet& coeffs,
                                std::size_t n_probes, std::uint64_t seed,
                                double tolerance) {
  if (n_probes < 1) throw ParameterError("check_lipschitz needs n_probes >= 1");
  const int d = coeffs.dim();
  std::mt19937_64 eng(seed);
  LipschitzReport rep;
  rep.declared_c_lip = coeffs.bounds().c_lip;
  rep.tolerance = tolerance;
  rep.probes = n_probes;
  const bool uses_mu = coeffs.mu_dependence() == MuDependence::kState;
  for (std::size_t k = 0; k < n_probes; ++k) {
    const Probe p = draw_probe(d, k, eng);
    const double denom = distance(p.x.data(), p.xp.data(), d) + p.w1;
    if (!(denom > 0.0)) continue;
    const auto f1 = uses_mu ? coeffs.features(p.mu) : std::vector<double>{};
    const auto f2 = uses_mu ? coeffs.features(p.mup) : std::vector<double>{};
    CoeffValues v1, v2;
    coeffs.eval(p.t, p.x.data(), p.obs, f1, v1);
    coeffs.eval(p.t, p.xp.data(), p.obs, f2, v2);
    const double rb = distance(v1.b, v2.b, d) / denom;
    const double rs = distance(v1.sigma, v2.sigma, d * d) / denom;
    const double rr = distance(v1.rho, v2.rho, d) / denom;
    const double rh = std::abs(v1.h - v2.h) / denom;
    rep.ratio_b = std::max(rep.ratio_b, rb);
    rep.ratio_sigma = std::max(rep.ratio_sigma, rs);
    rep.ratio_rho = std::max(rep.ratio_rho, rr);
    rep.ratio_h = std::max(rep.ratio_h, rh);
    const double m = std::max({rb, rs, rr, rh});
    if (m > rep.max_ratio || k == 0) {
      rep.max_ratio = m;
      rep.worst_component = m == rb ? "b" : m == rs ? "sigma" : m == rr ? "rho" : "h";
      rep.witness = witness_of(p);
    }
  }
  rep.pass = rep.max_ratio <= rep.declared_c_lip * (1.0 + tolerance);
  return rep;
}

NondegeneracyReport check_nondegeneracy(const CoefficientSet& coeffs,
                                        std::size_t n_probes,
                                        std::uint64_t seed) {
  if (n_probes < 1) throw ParameterError("check_nondegeneracy needs n_probes >= 1");
  const int d = coeffs.dim();
  std::mt19937_64 eng(seed);
  NondegeneracyReport rep;
  rep.declared_sigma0 = coeffs.bounds().sigma0;
  rep.probes = n_probes;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  const bool uses_mu = coeffs.mu_dependence() == MuDependence::kState;
  for (std::size_t k = 0; k < n_probes; ++k) {
    const Probe p = draw_probe(d, k, eng);
    const auto f = uses_mu ? coeffs.features(p.mu) : std::vector<double>{};
    CoeffValues v;
    coeffs.eval(p.t, p.x.data(), p.obs, f, v);
    const double e = nondegeneracy_eigenvalue(v, d);
    if (e < rep.min_eigenvalue) {
      rep.min_eigenvalue = e;
      rep.witness = witness_of(p);
    }
  }
  rep.pass = rep.declared_sigma0 > 0.0 &&
             rep.min_eigenvalue >= rep.declared_sigma0;
  return rep;
}

FrozenMuPath::FrozenMuPath(std::vector<double> times,
                           std::vector<ProbabilityAtomMeasure> measures)
    : times_(std::move(times)), measures_(std::move(measures)) {
  if (times_.empty() || times_.size() != measures_.size()) {
    throw GridError("frozen path needs one measure per grid time");
  }
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) {
      throw GridError("frozen path time grid must be strictly increasing");
    }
  }
  for (const auto& m : measures_) {
    if (m.dim() != measures_.front().dim()) {
      throw DimensionError("frozen path measures differ in dimension");
    }
  }
}

const ProbabilityAtomMeasure& FrozenMuPath::at(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  if (t < times_.front() - tol) {
    throw GridError("time " + std::to_string(t) + " precedes the frozen path");
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t + tol);
  return measures_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

}  // namespace cmv
