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

#ifndef CMV_BASIS_HPP
#define CMV_BASIS_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cmv {

/// Smooth scalar function on R^d with analytic first and second derivatives.
/// Hessians are row-major d*d.
class TestFunction {
 public:
  virtual ~TestFunction() = default;

  virtual int dim() const = 0;
  virtual double value(const double* x) const = 0;
  virtual void gradient(const double* x, double* grad) const = 0;
  virtual void hessian(const double* x, double* hess) const = 0;

  /// Value, gradient and Hessian in one pass. Any output pointer may be null.
  virtual void evaluate(const double* x, double* val, double* grad,
                        double* hess) const;

  virtual std::string name() const = 0;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

/// exp(1/(|u|^2 - 1)) for |u| < 1 with u = (x - c)/r, zero outside.
class Bump final : public TestFunction {
 public:
  Bump(std::vector<double> center, double radius);

  int dim() const override { return static_cast<int>(center_.size()); }
  double value(const double* x) const override;
  void gradient(const double* x, double* grad) const override;
  void hessian(const double* x, double* hess) const override;
  void evaluate(const double* x, double* val, double* grad,
                double* hess) const override;
  std::string name() const override;

  const std::vector<double>& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  std::vector<double> center_;
  double radius_;
};

/// Constant extension; only meaningful where derivatives are all that matter.
class ConstantFunction final : public TestFunction {
 public:
  ConstantFunction(int dim, double c) : dim_(dim), c_(c) {}
  int dim() const override { return dim_; }
  double value(const double*) const override { return c_; }
  void gradient(const double* x, double* grad) const override;
  void hessian(const double* x, double* hess) const override;
  std::string name() const override;

 private:
  int dim_;
  double c_;
};

/// x -> x[k].
class CoordinateFunction final : public TestFunction {
 public:
  CoordinateFunction(int dim, int k);
  int dim() const override { return dim_; }
  double value(const double* x) const override { return x[k_]; }
  void gradient(const double* x, double* grad) const override;
  void hessian(const double* x, double* hess) const override;
  std::string name() const override;

 private:
  int dim_;
  int k_;
};

/// Wraps user callables. Used in tests and for quadratic/polynomial probes.
class LambdaFunction final : public TestFunction {
 public:
  using Value = std::function<double(const double*)>;
  using Vector = std::function<void(const double*, double*)>;

  LambdaFunction(int dim, Value value, Vector gradient, Vector hessian,
                 std::string name = "lambda");
  int dim() const override { return dim_; }
  double value(const double* x) const override { return value_(x); }
  void gradient(const double* x, double* grad) const override {
    gradient_(x, grad);
  }
  void hessian(const double* x, double* hess) const override {
    hessian_(x, hess);
  }
  std::string name() const override { return name_; }

 private:
  int dim_;
  Value value_;
  Vector gradient_;
  Vector hessian_;
  std::string name_;
};

/// Ordered family of test functions. The order defines the projection map.
class TestFunctionBasis {
 public:
  TestFunctionBasis() = default;
  TestFunctionBasis(int dim, std::vector<TestFunctionPtr> functions);

  int dim() const { return dim_; }
  std::size_t size() const { return functions_.size(); }
  const TestFunction& operator[](std::size_t k) const { return *functions_[k]; }
  const TestFunctionPtr& ptr(std::size_t k) const { return functions_[k]; }
  const std::vector<TestFunctionPtr>& functions() const { return functions_; }

  /// First `count` functions as a new basis.
  TestFunctionBasis prefix(std::size_t count) const;

 private:
  int dim_ = 0;
  std::vector<TestFunctionPtr> functions_;
};

struct DyadicBasisOptions {
  double half_width = 4.0;
  double base_radius = 4.0;
};

/// Translated and rescaled bumps on a dyadic grid over [-L, L]^d: level j has
/// radius base_radius / 2^j and center spacing radius / 2; within a level
/// centers are ordered by distance to the origin.
TestFunctionBasis make_dyadic_basis(int dim, std::size_t count,
                                    const DyadicBasisOptions& options = {});

}  // namespace cmv

#endif  // CMV_BASIS_HPP
