#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/core/param.hpp"
#include "aest/core/rng.hpp"
#include "aest/divergences/fdivergence.hpp"

namespace aest {

/// A distribution ℙ_θ compared against the data distribution ℙ. Draws land in
/// a dataset with the single role "y".
class RatioModel {
 public:
  virtual ~RatioModel() = default;
  virtual std::size_t dim() const = 0;
  virtual Dataset sample(Rng& rng, std::size_t count) const = 0;
  virtual bool has_log_ratio() const { return false; }
  /// log dℙ_θ/dℙ (y); UnsupportedModel when unknown.
  virtual double log_ratio(Row y) const;
};

using RatioModelPtr = std::shared_ptr<const RatioModel>;

/// Parametric family θ ↦ ℙ_θ generated as y = T_θ(ε) from base noise ε.
class ParametricModel {
 public:
  virtual ~ParametricModel() = default;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t noise_dim() const = 0;
  /// count × noise_dim draws of ε.
  virtual Eigen::MatrixXd draw_noise(Rng& rng, std::size_t count) const = 0;
  virtual Eigen::VectorXd push(const Eigen::VectorXd& theta, Row eps) const = 0;
  /// dim × param_dim Jacobian ∂T_θ(ε)/∂θ.
  virtual Eigen::MatrixXd push_jacobian(const Eigen::VectorXd& theta, Row eps) const = 0;
  virtual RatioModelPtr at(const Eigen::VectorXd& theta) const = 0;
};

using ParametricModelPtr = std::shared_ptr<const ParametricModel>;

/// ℙ_θ = N(μ, σ²I) against reference ℙ = N(μ₀, σ₀²I).
class GaussianLocation : public RatioModel {
 public:
  GaussianLocation(Eigen::VectorXd mu, double sigma = 1.0, Eigen::VectorXd ref_mu = {},
                   double ref_sigma = 1.0);
  std::size_t dim() const override { return static_cast<std::size_t>(mu_.size()); }
  Dataset sample(Rng& rng, std::size_t count) const override;
  bool has_log_ratio() const override { return true; }
  double log_ratio(Row y) const override;

  const Eigen::VectorXd& mu() const { return mu_; }

 private:
  Eigen::VectorXd mu_, ref_mu_;
  double sigma_, ref_sigma_;
};

/// θ = μ, y = μ + σε with ε ~ N(0, I); reference N(ref_mu, ref_sigma²I).
class GaussianLocationFamily : public ParametricModel {
 public:
  GaussianLocationFamily(std::size_t dim, double sigma = 1.0, Eigen::VectorXd ref_mu = {},
                         double ref_sigma = 1.0);
  std::size_t param_dim() const override { return dim_; }
  std::size_t dim() const override { return dim_; }
  std::size_t noise_dim() const override { return dim_; }
  Eigen::MatrixXd draw_noise(Rng& rng, std::size_t count) const override;
  Eigen::VectorXd push(const Eigen::VectorXd& theta, Row eps) const override;
  Eigen::MatrixXd push_jacobian(const Eigen::VectorXd& theta, Row eps) const override;
  RatioModelPtr at(const Eigen::VectorXd& theta) const override;

 private:
  std::size_t dim_;
  double sigma_;
  Eigen::VectorXd ref_mu_;
  double ref_sigma_;
};

using Adversary = std::function<double(Row)>;

/// λ*_θ(y) = f′(dℙ_θ/dℙ (y)). UnsupportedModel without a log ratio.
double analytic_adversary(const FDivergence& div, const RatioModel& model, Row y);
Adversary analytic_adversary(const FDivergence& div, RatioModelPtr model);

struct DualEstimateOptions {
  std::size_t model_samples = 0;  // m; 0 means n² in the footnote regime, else n
  bool footnote_regime = false;   // require m ≥ n²
};

/// (1/m)Σⱼ λ(Y_θ,ⱼ) − (1/n)Σᵢ f*(λ(Yᵢ)), model draws from `rng`.
double dual_divergence_estimate(const FDivergence& div, const RatioModel& model,
                                const Dataset& data, const Adversary& lambda, Rng& rng,
                                const DualEstimateOptions& opts = {});

/// D_f(N(μ,σ²)‖N(0,1)) for scalar μ by adaptive Gauss–Kronrod quadrature.
double gaussian_location_divergence(const FDivergence& div, double mu, double sigma = 1.0);

}  // namespace aest
