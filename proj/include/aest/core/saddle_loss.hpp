#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/core/param.hpp"
#include "aest/core/rng.hpp"

namespace aest {

/// A finite-dimensional parameter space Θₙ or Λₙ as seen by the solvers and
/// certificates: a dimension, a feasibility projection and seeded starts.
class ParamSpace {
 public:
  virtual ~ParamSpace() = default;

  virtual const std::string& id() const = 0;
  virtual std::size_t dim() const = 0;
  /// Maps coords onto the feasible set (box bounds, weight clip).
  virtual void project(Eigen::VectorXd& coords) const = 0;
  /// Random feasible point used for multi-start optimization.
  virtual Eigen::VectorXd random_point(Rng& rng) const = 0;
  /// Deterministic default starting point.
  virtual Eigen::VectorXd initial_point(Rng& rng) const = 0;

  ParamPoint point(Eigen::VectorXd coords) const { return {std::move(coords), id()}; }
};

/// Pointwise saddle loss l(θ, λ, Y). Implementations are immutable and bind
/// their column roles against a ColumnLayout at construction.
///
/// Gradients are full coordinate gradients; the pathwise derivative in a
/// direction v is `grad.dot(v)`. The `accumulate_*` methods add into `out`.
class SaddleLoss {
 public:
  virtual ~SaddleLoss() = default;

  virtual std::string family() const = 0;
  virtual std::size_t theta_dim() const = 0;
  virtual std::size_t lambda_dim() const = 0;
  virtual std::vector<std::string> required_roles() const = 0;

  virtual double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                      Row y) const = 0;
  virtual void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                     Row y, Eigen::Ref<Eigen::VectorXd> out) const = 0;
  virtual void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                      Row y, Eigen::Ref<Eigen::VectorXd> out) const = 0;

  Eigen::VectorXd grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                             Row y) const;
  Eigen::VectorXd grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                              Row y) const;

  /// Sample average 𝔼ₙ l(θ, λ, Y). Throws NumericalFailure with the row index
  /// on a non-finite row value. Families with shared per-dataset terms
  /// (e.g. model Monte Carlo draws) override this for speed.
  virtual double mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                      const Dataset& data) const;
  /// Gradients of the sample average; either output may be null.
  virtual void mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                         const Dataset& data, Eigen::VectorXd* g_theta,
                         Eigen::VectorXd* g_lambda) const;

  /// True when λ ↦ 𝔼ₙ l(θ, λ, Y) is concave for every θ, so that the inner
  /// maximization can be solved exactly by Newton steps.
  virtual bool concave_in_lambda() const { return false; }
  virtual bool has_best_response() const { return concave_in_lambda(); }
  /// argmax_λ 𝔼ₙ l(θ, λ, Y) starting from `start`. The default runs damped
  /// Newton on a finite-difference Hessian of the mean gradient, which is exact
  /// in one step when the loss is quadratic in λ.
  virtual Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                        const Eigen::VectorXd& start) const;

  void check_dims(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda) const;
};

using SaddleLossPtr = std::shared_ptr<const SaddleLoss>;

}  // namespace aest
