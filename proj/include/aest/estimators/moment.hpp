#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

/// Moment function m(Y, θ) ∈ ℝ^dim with parametric θ ∈ ℝ^theta_dim.
class MomentFunction {
 public:
  virtual ~MomentFunction() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t theta_dim() const = 0;
  virtual std::vector<std::string> roles() const = 0;
  virtual Eigen::VectorXd eval(const Eigen::VectorXd& theta, Row y) const = 0;
  /// d(Y, θ) = ∇_θ m, dim × theta_dim. Central differences unless overridden.
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, Row y) const;
};

using MomentPtr = std::shared_ptr<const MomentFunction>;

/// n × dim matrix of m(Yᵢ, θ).
Eigen::MatrixXd moment_matrix(const MomentFunction& m, const Eigen::VectorXd& theta,
                              const Dataset& data);

/// m = y − θ.
class MeanMoment : public MomentFunction {
 public:
  MeanMoment(const ColumnLayout& layout, std::string y_role = "y");
  std::size_t dim() const override { return y_.length; }
  std::size_t theta_dim() const override { return y_.length; }
  std::vector<std::string> roles() const override { return {role_}; }
  Eigen::VectorXd eval(const Eigen::VectorXd& theta, Row y) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, Row y) const override;

 private:
  std::string role_;
  ColumnSlice y_;
};

/// Scalar m = y − x′θ, the linear instrumental-variables residual.
class LinearIV : public MomentFunction {
 public:
  LinearIV(const ColumnLayout& layout, std::string y_role = "y", std::string x_role = "x");
  std::size_t dim() const override { return 1; }
  std::size_t theta_dim() const override { return x_.length; }
  std::vector<std::string> roles() const override { return {y_role_, x_role_}; }
  Eigen::VectorXd eval(const Eigen::VectorXd& theta, Row y) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, Row y) const override;

 private:
  std::string y_role_, x_role_;
  ColumnSlice y_, x_;
};

/// m = y − h_θ(x) with h a scalar function sieve on x.
class SieveResidualMoment : public MomentFunction {
 public:
  SieveResidualMoment(const ColumnLayout& layout, std::shared_ptr<const Sieve> h,
                      std::string y_role = "y", std::string x_role = "x");
  std::size_t dim() const override { return 1; }
  std::size_t theta_dim() const override { return h_->dim(); }
  std::vector<std::string> roles() const override { return {y_role_, x_role_}; }
  Eigen::VectorXd eval(const Eigen::VectorXd& theta, Row y) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, Row y) const override;
  const Sieve& sieve() const { return *h_; }

 private:
  std::shared_ptr<const Sieve> h_;
  std::string y_role_, x_role_;
  ColumnSlice y_, x_;
};

/// Moment given by a callable; the Jacobian falls back to central differences.
class LambdaMoment : public MomentFunction {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, Row y)>;
  LambdaMoment(std::size_t dim, std::size_t theta_dim, Fn fn, std::vector<std::string> roles = {})
      : dim_(dim), theta_dim_(theta_dim), fn_(std::move(fn)), roles_(std::move(roles)) {}
  std::size_t dim() const override { return dim_; }
  std::size_t theta_dim() const override { return theta_dim_; }
  std::vector<std::string> roles() const override { return roles_; }
  Eigen::VectorXd eval(const Eigen::VectorXd& theta, Row y) const override { return fn_(theta, y); }

 private:
  std::size_t dim_, theta_dim_;
  Fn fn_;
  std::vector<std::string> roles_;
};

/// Conditioning structure 𝔼[m(X,θ)|Z] = 0 with optional simulation oracles.
struct ConditionalDesign {
  std::string z_role = "z";
  std::string x_role = "x";
  /// 𝔼[m(X,θ)|Z=z]
  std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, Row z)> cond_mean;
  /// 𝔼[m m′|Z=z]
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& theta, Row z)> cond_var;
  /// 𝔼[∇_θ m|Z=z]
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& theta, Row z)> cond_jacobian;
};

}  // namespace aest
