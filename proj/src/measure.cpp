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

#include "cmv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "cmv/errors.hpp"

namespace cmv {

namespace {

void check_same_dim(const WeightedAtomMeasure& a, const WeightedAtomMeasure& b,
                    const char* where) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(where) + ": dimension mismatch (" +
                         std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
  }
}

void check_nonempty(const WeightedAtomMeasure& a, const char* where) {
  if (a.empty()) throw DimensionError(std::string(where) + ": empty measure");
}

}  // namespace

WeightedAtomMeasure::WeightedAtomMeasure(int dim, std::vector<double> positions,
                                         std::vector<double> weights)
    : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)) {
  if (dim_ < 1 || dim_ > kMaxDim) {
    throw DimensionError("measure dimension must be 1.." +
                         std::to_string(kMaxDim));
  }
  if (weights_.empty()) throw DimensionError("measure needs at least one atom");
  if (positions_.size() != weights_.size() * static_cast<std::size_t>(dim_)) {
    throw DimensionError("positions length " +
                         std::to_string(positions_.size()) +
                         " does not match " + std::to_string(weights_.size()) +
                         " atoms of dimension " + std::to_string(dim_));
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ParameterError("atom weights must be finite and nonnegative");
    }
  }
  for (double x : positions_) {
    if (!std::isfinite(x)) throw ParameterError("atom positions must be finite");
  }
}

WeightedAtomMeasure WeightedAtomMeasure::dirac(std::span<const double> x,
                                               double weight) {
  return WeightedAtomMeasure(static_cast<int>(x.size()),
                             std::vector<double>(x.begin(), x.end()), {weight});
}

double WeightedAtomMeasure::total_mass() const {
  CompensatedSum s;
  for (double w : weights_) s.add(w);
  return s.value();
}

WeightedAtomMeasure WeightedAtomMeasure::combine(
    double a, const WeightedAtomMeasure& other, double b) const {
  check_same_dim(*this, other, "combine");
  if (a < 0.0 || b < 0.0) throw ParameterError("combine needs a, b >= 0");
  std::vector<double> pos = positions_;
  pos.insert(pos.end(), other.positions_.begin(), other.positions_.end());
  std::vector<double> w;
  w.reserve(size() + other.size());
  for (double v : weights_) w.push_back(a * v);
  for (double v : other.weights_) w.push_back(b * v);
  return WeightedAtomMeasure(dim_, std::move(pos), std::move(w));
}

ProbabilityAtomMeasure::ProbabilityAtomMeasure(int dim,
                                               std::vector<double> positions,
                                               std::vector<double> weights)
    : WeightedAtomMeasure(dim, std::move(positions), std::move(weights)) {
  const double m = total_mass();
  if (std::abs(m - 1.0) > 1e-12) {
    throw ParameterError("probability measure weights sum to " +
                         std::to_string(m));
  }
}

ProbabilityAtomMeasure ProbabilityAtomMeasure::uniform(
    int dim, std::vector<double> positions) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  const std::size_t n = positions.size() / static_cast<std::size_t>(dim);
  if (n == 0) throw DimensionError("uniform measure needs at least one atom");
  return ProbabilityAtomMeasure(dim, std::move(positions),
                                std::vector<double>(n, 1.0 / n));
}

double pair(const WeightedAtomMeasure& nu, const TestFunction& phi) {
  if (phi.dim() != nu.dim()) {
    throw DimensionError("pair: test function " + phi.name() + " has dim " +
                         std::to_string(phi.dim()) + ", measure has dim " +
                         std::to_string(nu.dim()));
  }
  CompensatedSum s;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double w = nu.weight(i);
    if (w == 0.0) continue;
    s.add(w * phi.value(nu.atom(i)));
  }
  return s.value();
}

ProbabilityAtomMeasure normalize(const WeightedAtomMeasure& nu,
                                 double mass_threshold) {
  check_nonempty(nu, "normalize");
  const double m = nu.total_mass();
  if (!(m > mass_threshold)) {
    throw WeightDegeneracy("total mass " + std::to_string(m) +
                           " at or below threshold " +
                           std::to_string(mass_threshold));
  }
  std::vector<double> w(nu.weights());
  for (double& v : w) v /= m;
  return ProbabilityAtomMeasure(nu.dim(), nu.positions(), std::move(w));
}

double wasserstein1_1d(std::span<const double> x, std::span<const double> wx,
                       std::span<const double> y, std::span<const double> wy) {
  if (x.empty() || y.empty()) throw DimensionError("W1 of empty measure");
  std::vector<std::size_t> ix(x.size()), iy(y.size());
  std::iota(ix.begin(), ix.end(), 0);
  std::iota(iy.begin(), iy.end(), 0);
  std::stable_sort(ix.begin(), ix.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::stable_sort(iy.begin(), iy.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  std::size_t i = 0, j = 0;
  double ra = wx[ix[0]], rb = wy[iy[0]];
  CompensatedSum cost;
  while (i < ix.size() && j < iy.size()) {
    const double dist = std::abs(x[ix[i]] - y[iy[j]]);
    if (ra <= rb) {
      cost.add(ra * dist);
      rb -= ra;
      if (++i < ix.size()) ra = wx[ix[i]];
    } else {
      cost.add(rb * dist);
      ra -= rb;
      if (++j < iy.size()) rb = wy[iy[j]];
    }
  }
  return cost.value();
}

W1Result wasserstein1_detailed(const ProbabilityAtomMeasure& mu1,
                               const ProbabilityAtomMeasure& mu2,
                               const W1Options& options) {
  check_nonempty(mu1, "wasserstein1");
  check_nonempty(mu2, "wasserstein1");
  check_same_dim(mu1, mu2, "wasserstein1");
  const int d = mu1.dim();
  W1Result out;
  if (d == 1) {
    out.value = wasserstein1_1d(mu1.positions(), mu1.weights(),
                                mu2.positions(), mu2.weights());
    return out;
  }
  if (options.projections < 1) {
    throw ParameterError("sliced W1 needs at least one projection");
  }
  std::mt19937_64 eng(options.seed);
  std::normal_distribution<double> normal;
  std::vector<double> p1(mu1.size()), p2(mu2.size());
  std::vector<double> dir(static_cast<std::size_t>(d));
  CompensatedSum acc;
  for (int p = 0; p < options.projections; ++p) {
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& v : dir) {
        v = normal(eng);
        n2 += v * v;
      }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : dir) v *= inv;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += dir[a] * mu1.atom(i)[a];
      p1[i] = s;
    }
    for (std::size_t i = 0; i < mu2.size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += dir[a] * mu2.atom(i)[a];
      p2[i] = s;
    }
    acc.add(wasserstein1_1d(p1, mu1.weights(), p2, mu2.weights()));
  }
  out.value = acc.value() / options.projections;
  out.approximate = true;
  out.projections = options.projections;
  return out;
}

double wasserstein1(const ProbabilityAtomMeasure& mu1,
                    const ProbabilityAtomMeasure& mu2,
                    const W1Options& options) {
  return wasserstein1_detailed(mu1, mu2, options).value;
}

TruncatedMetric metric_d(const WeightedAtomMeasure& nu1,
                         const WeightedAtomMeasure& nu2, std::size_t K,
                         const TestFunctionBasis& basis) {
  if (K == 0 || K > basis.size()) {
    throw ParameterError("metric_d: K must be in 1.." +
                         std::to_string(basis.size()));
  }
  TruncatedMetric out;
  double scale = 0.5;
  for (std::size_t k = 0; k < K; ++k, scale *= 0.5) {
    const double diff = std::abs(pair(nu1, basis[k]) - pair(nu2, basis[k]));
    out.value += std::min(diff, 1.0) * scale;
  }
  out.tail_bound = std::ldexp(1.0, -static_cast<int>(K));
  return out;
}

std::vector<double> project_T(const WeightedAtomMeasure& nu, std::size_t K,
                              const TestFunctionBasis& basis) {
  if (K == 0 || K > basis.size()) {
    throw ParameterError("project_T: K must be in 1.." +
                         std::to_string(basis.size()));
  }
  std::vector<double> z(K);
  for (std::size_t k = 0; k < K; ++k) z[k] = pair(nu, basis[k]);
  return z;
}

double d_infinity(std::span<const double> z1, std::span<const double> z2,
                  std::size_t K) {
  if (z1.size() != z2.size()) {
    throw DimensionError("d_infinity: length mismatch (" +
                         std::to_string(z1.size()) + " vs " +
                         std::to_string(z2.size()) + ")");
  }
  if (K > z1.size()) throw DimensionError("d_infinity: K exceeds length");
  double out = 0.0;
  double scale = 0.5;
  for (std::size_t k = 0; k < K; ++k, scale *= 0.5) {
    out += std::min(std::abs(z1[k] - z2[k]), 1.0) * scale;
  }
  return out;
}

double gaussian_kernel(std::span<const double> x, double delta) {
  if (!(delta > 0.0)) throw ParameterError("kernel bandwidth must be positive");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double d = static_cast<double>(x.size());
  return std::pow(2.0 * std::numbers::pi * delta, -0.5 * d) *
         std::exp(-r2 / (2.0 * delta));
}

double mollified_inner(const WeightedAtomMeasure& nu1,
                       const WeightedAtomMeasure& nu2, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ParameterError("mollified_inner: delta must be positive");
  }
  check_same_dim(nu1, nu2, "mollified_inner");
  const int d = nu1.dim();
  const double two_delta = 2.0 * delta;
  const double norm = std::pow(2.0 * std::numbers::pi * two_delta, -0.5 * d);
  const double inv = 1.0 / (2.0 * two_delta);
  CompensatedSum total;
  if (&nu1 == &nu2) {
    // Symmetric kernel: diagonal once, each off-diagonal pair twice.
    for (std::size_t i = 0; i < nu1.size(); ++i) {
      const double wi = nu1.weight(i);
      if (wi == 0.0) continue;
      const double* xi = nu1.atom(i);
      double row = 0.0;
      for (std::size_t j = i + 1; j < nu1.size(); ++j) {
        const double* yj = nu1.atom(j);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          const double diff = xi[a] - yj[a];
          r2 += diff * diff;
        }
        row += nu1.weight(j) * std::exp(-r2 * inv);
      }
      total.add(wi * (wi + 2.0 * row));
    }
    return norm * total.value();
  }
  for (std::size_t i = 0; i < nu1.size(); ++i) {
    const double wi = nu1.weight(i);
    if (wi == 0.0) continue;
    const double* xi = nu1.atom(i);
    double row = 0.0;
    for (std::size_t j = 0; j < nu2.size(); ++j) {
      const double* yj = nu2.atom(j);
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = xi[a] - yj[a];
        r2 += diff * diff;
      }
      row += nu2.weight(j) * std::exp(-r2 * inv);
    }
    total.add(wi * row);
  }
  return norm * total.value();
}

double mollified_l2_distance(const WeightedAtomMeasure& nu1,
                             const WeightedAtomMeasure& nu2, double delta) {
  const double a = mollified_inner(nu1, nu1, delta);
  const double b = mollified_inner(nu1, nu2, delta);
  const double c = mollified_inner(nu2, nu2, delta);
  double v = a - 2.0 * b + c;
  if (v < 0.0) {
    if (v < -1e-12 * std::max(1.0, a + c)) {
      throw NumericalBlowup("mollified distance squared is negative", 0);
    }
    v = 0.0;
  }
  return std::sqrt(v);
}

}  // namespace cmv
