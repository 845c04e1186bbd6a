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

#include "cmv/oracles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cmv/errors.hpp"

namespace cmv {

double riccati_rhs(const LinearModel& m, double P) {
  const double gain = m.c * P + m.rho;
  return 2.0 * m.a * P + m.sigma * m.sigma + m.rho * m.rho - gain * gain;
}

namespace {

KalmanPath solve(const LinearModel& model, double a_mean, KalmanState init,
                 const ObservationPath& y, int substeps) {
  if (!(init.P >= 0.0)) throw OracleError("initial variance must be >= 0");
  if (substeps < 1) throw OracleError("substeps must be >= 1");
  if (y.y.size() < 2 || !(y.dt > 0.0)) throw OracleError("empty observation path");
  const std::size_t steps = y.steps();
  const double dt = y.dt;
  const double h = dt / substeps;
  KalmanPath out;
  out.t.resize(steps + 1);
  out.m.resize(steps + 1);
  out.P.resize(steps + 1);
  double m = init.m;
  double P = init.P;
  for (std::size_t k = 0;; ++k) {
    out.t[k] = static_cast<double>(k) * dt;
    out.m[k] = m;
    out.P[k] = P;
    if (k == steps) break;
    const double gain = model.c * P + model.rho;
    m += a_mean * m * dt + gain * (y.increment(k) - model.c * m * dt);
    for (int s = 0; s < substeps; ++s) {
      const double k1 = riccati_rhs(model, P);
      const double k2 = riccati_rhs(model, P + 0.5 * h * k1);
      const double k3 = riccati_rhs(model, P + 0.5 * h * k2);
      const double k4 = riccati_rhs(model, P + h * k3);
      P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!std::isfinite(P) || P < 0.0) {
      throw OracleError("Riccati solution left [0, inf) at step " + std::to_string(k + 1));
    }
    if (!std::isfinite(m)) throw OracleError("filter mean is not finite");
  }
  return out;
}

}  // namespace

KalmanPath kalman_bucy_correlated(const LinearModel& model, KalmanState init,
                                  const ObservationPath& y, int substeps) {
  return solve(model, model.a, init, y, substeps);
}

KalmanPath meanfield_linear_mean(const LinearModel& model, double abar,
                                 KalmanState init, const ObservationPath& y,
                                 int substeps) {
  return solve(model, model.a + abar, init, y, substeps);
}

double w1_bruteforce(const ProbabilityAtomMeasure& mu1,
                     const ProbabilityAtomMeasure& mu2) {
  const std::size_t n = mu1.size();
  const std::size_t m = mu2.size();
  if (n > 8 || m > 8) throw OracleError("w1_bruteforce takes at most 8 atoms per side");
  if (n == 0 || m == 0) throw OracleError("w1_bruteforce needs nonempty measures");
  if (mu1.dim() != mu2.dim()) throw DimensionError("measures differ in dimension");
  const int d = mu1.dim();

  // Successive shortest paths with Bellman-Ford on the residual graph.
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
  };
  const std::size_t V = n + m + 2;
  const std::size_t src = n + m;
  const std::size_t snk = n + m + 1;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adj(V);
  auto add = [&](std::size_t u, std::size_t v, double cap, double cost) {
    adj[u].push_back(edges.size());
    edges.push_back({v, cap, cost});
    adj[v].push_back(edges.size());
    edges.push_back({u, 0.0, -cost});
  };
  for (std::size_t i = 0; i < n; ++i) add(src, i, mu1.weight(i), 0.0);
  for (std::size_t j = 0; j < m; ++j) add(n + j, snk, mu2.weight(j), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = mu1.atom(i)[a] - mu2.atom(j)[a];
        r2 += diff * diff;
      }
      add(i, n + j, std::numeric_limits<double>::infinity(), std::sqrt(r2));
    }
  }

  constexpr double kCapEps = 1e-15;
  double total = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> dist(V, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> via(V, edges.size());
    dist[src] = 0.0;
    for (std::size_t round = 0; round + 1 < V; ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < V; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (std::size_t e : adj[u]) {
          const Edge& ed = edges[e];
          if (ed.cap <= kCapEps) continue;
          if (dist[u] + ed.cost < dist[ed.to] - 1e-15) {
            dist[ed.to] = dist[u] + ed.cost;
            via[ed.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (!std::isfinite(dist[snk])) break;
    double push = std::numeric_limits<double>::infinity();
    for (std::size_t v = snk; v != src; v = edges[via[v] ^ 1].to) {
      push = std::min(push, edges[via[v]].cap);
    }
    for (std::size_t v = snk; v != src; v = edges[via[v] ^ 1].to) {
      edges[via[v]].cap -= push;
      edges[via[v] ^ 1].cap += push;
    }
    total += push * dist[snk];
  }
  return total;
}

namespace {

using boost::math::quadrature::gauss_kronrod;

double convolved(const WeightedAtomMeasure& nu, const double* x, double delta) {
  const int d = nu.dim();
  const double norm = std::pow(2.0 * std::numbers::pi * delta, -0.5 * d);
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double diff = x[a] - nu.atom(i)[a];
      r2 += diff * diff;
    }
    s += nu.weight(i) * std::exp(-r2 / (2.0 * delta));
  }
  return norm * s;
}

// Uniform panels covering the atoms along one axis, padded on both sides.
// Panels narrower than the kernel scale let each Gauss-Kronrod rule converge
// without deep bisection; atom-aligned breakpoints can create slivers whose
// relative error estimate never settles.
std::vector<double> breakpoints(const WeightedAtomMeasure& a,
                                const WeightedAtomMeasure& b, int axis,
                                double pad, double width) {
  double lo = a.atom(0)[axis];
  double hi = lo;
  for (const auto* nu : {&a, &b}) {
    for (std::size_t i = 0; i < nu->size(); ++i) {
      lo = std::min(lo, nu->atom(i)[axis]);
      hi = std::max(hi, nu->atom(i)[axis]);
    }
  }
  lo -= pad;
  hi += pad;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  std::vector<double> pts(n + 1);
  for (std::size_t i = 0; i <= n; ++i) pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  return pts;
}

template <class F>
double integrate(F f, const std::vector<double>& pts, double tol, double& err) {
  double sum = 0.0;
  err = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double e = 0.0;
    sum += gauss_kronrod<double, 61>::integrate(f, pts[i], pts[i + 1], 8, tol, &e);
    err += e;
  }
  return sum;
}

}  // namespace

double quadrature_mollified(const WeightedAtomMeasure& nu1,
                            const WeightedAtomMeasure& nu2, double delta,
                            double tolerance) {
  if (!(delta > 0.0)) throw ParameterError("delta must be positive");
  if (nu1.dim() != nu2.dim()) throw DimensionError("measures differ in dimension");
  if (nu1.empty() || nu2.empty()) throw OracleError("quadrature needs nonempty measures");
  const int d = nu1.dim();
  if (d > 2) throw OracleError("quadrature_mollified supports d <= 2");
  const double pad = 12.0 * std::sqrt(delta);
  const double width = std::sqrt(delta);
  double value = 0.0;
  double err = 0.0;
  if (d == 1) {
    auto f = [&](double x) {
      return convolved(nu1, &x, delta) * convolved(nu2, &x, delta);
    };
    value = integrate(f, breakpoints(nu1, nu2, 0, pad, width), tolerance, err);
  } else {
    const auto px = breakpoints(nu1, nu2, 0, pad, width);
    const auto py = breakpoints(nu1, nu2, 1, pad, width);
    double inner_err = 0.0;
    auto outer = [&](double x) {
      auto g = [&](double yv) {
        const double p[2] = {x, yv};
        return convolved(nu1, p, delta) * convolved(nu2, p, delta);
      };
      double e = 0.0;
      const double v = integrate(g, py, tolerance, e);
      inner_err = std::max(inner_err, e);
      return v;
    };
    value = integrate(outer, px, tolerance, err);
    err += inner_err * (px.back() - px.front());
  }
  if (!std::isfinite(value) || err > 1e3 * tolerance * std::max(std::abs(value), 1e-300)) {
    throw OracleError("quadrature did not converge (estimated error " +
                      std::to_string(err) + ")");
  }
  return value;
}

}  // namespace cmv
