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

#include "cmv/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "cmv/errors.hpp"

namespace cmv {

void TestFunction::evaluate(const double* x, double* val, double* grad,
                            double* hess) const {
  if (val) *val = value(x);
  if (grad) gradient(x, grad);
  if (hess) hessian(x, hess);
}

Bump::Bump(std::vector<double> center, double radius)
    : center_(std::move(center)), radius_(radius) {
  if (center_.empty() || center_.size() > 8) {
    throw DimensionError("bump dimension must be 1..8");
  }
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    throw ParameterError("bump radius must be positive and finite");
  }
}

double Bump::value(const double* x) const {
  double v = 0.0;
  evaluate(x, &v, nullptr, nullptr);
  return v;
}

void Bump::gradient(const double* x, double* grad) const {
  evaluate(x, nullptr, grad, nullptr);
}

void Bump::hessian(const double* x, double* hess) const {
  evaluate(x, nullptr, nullptr, hess);
}

void Bump::evaluate(const double* x, double* val, double* grad,
                    double* hess) const {
  const int d = dim();
  double u[16];
  double s = 0.0;
  for (int a = 0; a < d; ++a) {
    u[a] = (x[a] - center_[a]) / radius_;
    s += u[a] * u[a];
  }
  if (s >= 1.0) {
    if (val) *val = 0.0;
    if (grad) std::fill(grad, grad + d, 0.0);
    if (hess) std::fill(hess, hess + d * d, 0.0);
    return;
  }
  const double sm1 = s - 1.0;
  const double g = std::exp(1.0 / sm1);
  if (val) *val = g;
  if (!grad && !hess) return;
  const double sm1_sq = sm1 * sm1;
  const double g1 = -g / sm1_sq;
  if (grad) {
    for (int a = 0; a < d; ++a) grad[a] = g1 * 2.0 * u[a] / radius_;
  }
  if (hess) {
    const double g2 = g * (2.0 * s - 1.0) / (sm1_sq * sm1_sq);
    const double inv_r2 = 1.0 / (radius_ * radius_);
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double h = 4.0 * g2 * u[a] * u[b];
        if (a == b) h += 2.0 * g1;
        hess[a * d + b] = h * inv_r2;
      }
    }
  }
}

std::string Bump::name() const {
  std::ostringstream os;
  os.precision(6);
  os << "bump(c=";
  for (std::size_t a = 0; a < center_.size(); ++a) {
    os << (a ? "," : "") << center_[a];
  }
  os << ";r=" << radius_ << ")";
  return os.str();
}

void ConstantFunction::gradient(const double*, double* grad) const {
  std::fill(grad, grad + dim_, 0.0);
}

void ConstantFunction::hessian(const double*, double* hess) const {
  std::fill(hess, hess + dim_ * dim_, 0.0);
}

std::string ConstantFunction::name() const {
  std::ostringstream os;
  os << "const(" << c_ << ")";
  return os.str();
}

CoordinateFunction::CoordinateFunction(int dim, int k) : dim_(dim), k_(k) {
  if (k < 0 || k >= dim) throw DimensionError("coordinate index out of range");
}

void CoordinateFunction::gradient(const double*, double* grad) const {
  std::fill(grad, grad + dim_, 0.0);
  grad[k_] = 1.0;
}

void CoordinateFunction::hessian(const double*, double* hess) const {
  std::fill(hess, hess + dim_ * dim_, 0.0);
}

std::string CoordinateFunction::name() const {
  return "x" + std::to_string(k_);
}

LambdaFunction::LambdaFunction(int dim, Value value, Vector gradient,
                               Vector hessian, std::string name)
    : dim_(dim),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      name_(std::move(name)) {}

TestFunctionBasis::TestFunctionBasis(int dim,
                                     std::vector<TestFunctionPtr> functions)
    : dim_(dim), functions_(std::move(functions)) {
  for (const auto& f : functions_) {
    if (!f) throw ParameterError("null test function in basis");
    if (f->dim() != dim_) {
      throw DimensionError("test function " + f->name() +
                           " has dimension " + std::to_string(f->dim()) +
                           ", basis has " + std::to_string(dim_));
    }
  }
}

TestFunctionBasis TestFunctionBasis::prefix(std::size_t count) const {
  if (count > functions_.size()) {
    throw ParameterError("requested " + std::to_string(count) +
                         " functions from a basis of " +
                         std::to_string(functions_.size()));
  }
  return TestFunctionBasis(
      dim_, std::vector<TestFunctionPtr>(functions_.begin(),
                                         functions_.begin() + count));
}

TestFunctionBasis make_dyadic_basis(int dim, std::size_t count,
                                    const DyadicBasisOptions& options) {
  if (dim < 1 || dim > 8) throw DimensionError("basis dimension must be 1..8");
  if (!(options.half_width > 0.0) || !(options.base_radius > 0.0)) {
    throw ParameterError("basis half_width and base_radius must be positive");
  }
  std::vector<TestFunctionPtr> out;
  out.reserve(count);
  for (int level = 0; out.size() < count; ++level) {
    if (level > 30) throw ParameterError("dyadic basis level overflow");
    const double r = options.base_radius / std::ldexp(1.0, level);
    const double spacing = 0.5 * r;
    const int m_max =
        static_cast<int>(std::floor(options.half_width / spacing + 1e-9));
    std::vector<double> axis;
    for (int m = -m_max; m <= m_max; ++m) axis.push_back(m * spacing);

    std::vector<std::vector<double>> centers;
    std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
    while (true) {
      std::vector<double> c(static_cast<std::size_t>(dim));
      for (int a = 0; a < dim; ++a) c[a] = axis[idx[a]];
      centers.push_back(std::move(c));
      int a = dim - 1;
      while (a >= 0 && ++idx[a] == axis.size()) idx[a--] = 0;
      if (a < 0) break;
    }
    std::stable_sort(centers.begin(), centers.end(),
                     [](const std::vector<double>& p,
                        const std::vector<double>& q) {
                       double np = 0.0, nq = 0.0;
                       for (double v : p) np += v * v;
                       for (double v : q) nq += v * v;
                       if (np != nq) return np < nq;
                       return p < q;
                     });
    for (auto& c : centers) {
      if (out.size() == count) break;
      out.push_back(std::make_shared<Bump>(std::move(c), r));
    }
  }
  return TestFunctionBasis(dim, std::move(out));
}

}  // namespace cmv
