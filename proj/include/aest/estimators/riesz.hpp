#pragma once

#include <functional>
#include <memory>
#include <string>

#include "aest/core/saddle_loss.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

/// Vector-valued function of the regressors x.
using VecFn = std::function<Eigen::VectorXd(Row x)>;
using ScalarFn = std::function<double(Row x)>;

/// Linear functional g ↦ m(Y, g), applied componentwise to vector-valued g.
class LinearFunctional {
 public:
  virtual ~LinearFunctional() = default;
  virtual std::string name() const = 0;
  /// `row` is the full observation, `x` its regressor block.
  virtual Eigen::VectorXd apply(Row row, Row x, const VecFn& g) const = 0;
  double apply_scalar(Row row, Row x, const ScalarFn& g) const;
};

using FunctionalPtr = std::shared_ptr<const LinearFunctional>;

/// m(Y, g) = g(x).
class MeanFunctional : public LinearFunctional {
 public:
  std::string name() const override { return "mean"; }
  Eigen::VectorXd apply(Row row, Row x, const VecFn& g) const override;
};

/// m(Y, g) = ∂g/∂x_j by a central stencil of half width h.
class DerivativeFunctional : public LinearFunctional {
 public:
  explicit DerivativeFunctional(std::size_t coord = 0, double h = 1e-4);
  std::string name() const override { return "derivative"; }
  Eigen::VectorXd apply(Row row, Row x, const VecFn& g) const override;

 private:
  std::size_t coord_;
  double h_;
};

/// m(Y, g) = g(x with x_j = 1) − g(x with x_j = 0).
class AteFunctional : public LinearFunctional {
 public:
  explicit AteFunctional(std::size_t treatment = 0) : treatment_(treatment) {}
  std::string name() const override { return "ate"; }
  Eigen::VectorXd apply(Row row, Row x, const VecFn& g) const override;

 private:
  std::size_t treatment_;
};

/// User-supplied functional; linearity is verified when a loss is built from it.
class CustomFunctional : public LinearFunctional {
 public:
  using Fn = std::function<Eigen::VectorXd(Row row, Row x, const VecFn& g)>;
  CustomFunctional(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  Eigen::VectorXd apply(Row row, Row x, const VecFn& g) const override { return fn_(row, x, g); }

 private:
  std::string name_;
  Fn fn_;
};

struct RieszProblem {
  FunctionalPtr functional;
  std::string x_role = "x";
  std::string y_role = "y";
  std::string w_role;
  /// First-stage regression ĝₙ.
  ScalarFn first_stage_g;
};

/// Throws InvalidProblem unless m(Y, a·g₁ + g₂) = a·m(Y, g₁) + m(Y, g₂) on
/// random rows and random smooth test functions.
void check_linearity(const LinearFunctional& m, const ColumnLayout& layout,
                     const std::string& x_role, std::uint64_t seed = 0);

/// l = m(Y, λ) − θ(x)λ(x) − ½λ(x)² with θ, λ scalar function sieves on x.
class RieszLoss : public SaddleLoss {
 public:
  RieszLoss(RieszProblem problem, std::shared_ptr<const Sieve> theta,
            std::shared_ptr<const Sieve> lambda, const ColumnLayout& layout);

  std::string family() const override { return "riesz"; }
  std::size_t theta_dim() const override { return theta_->dim(); }
  std::size_t lambda_dim() const override { return lambda_->dim(); }
  std::vector<std::string> required_roles() const override { return {problem_.x_role}; }

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;

  bool concave_in_lambda() const override;
  /// Linear sieve: c = G⁺(𝔼ₙ m(Y, φ) − 𝔼ₙ φθ), G = 𝔼ₙ φφ′.
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                const Eigen::VectorXd& start) const override;

  const RieszProblem& problem() const { return problem_; }
  const Sieve& representer_sieve() const { return *theta_; }
  const Sieve& adversary() const { return *lambda_; }

 private:
  RieszProblem problem_;
  std::shared_ptr<const Sieve> theta_, lambda_;
  ColumnSlice x_;
};

struct FunctionalEstimate {
  double estimate = 0.0;
  double se = 0.0;
  Eigen::VectorXd scores;
};

/// Mean of m(Y, ĝ) + θ̂(x)(y − ĝ(x)) and its standard error sd/√n.
FunctionalEstimate orthogonalized_functional(const RieszProblem& problem, const ScalarFn& theta_hat,
                                             const Dataset& data);

}  // namespace aest
