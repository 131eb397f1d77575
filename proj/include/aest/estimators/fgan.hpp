#pragma once

#include <memory>
#include <mutex>

#include "aest/core/saddle_loss.hpp"
#include "aest/divergences/ratio_model.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

struct FganOptions {
  std::size_t model_samples = 1000;
  std::uint64_t seed = 0;
  std::string y_role = "y";
  /// θ-gradient through the pushforward Jacobian; otherwise central
  /// differences in θ on the same noise draws.
  bool reparameterized = true;
};

/// l(θ, λ, Y) = (1/m)Σⱼ λ(T_θ(εⱼ)) − f*(λ(Y)) with λ = squash ∘ (sieve output)
/// so that adversary values stay inside the conjugate domain. The noise draws
/// εⱼ are fixed at construction.
class FganLoss : public SaddleLoss {
 public:
  FganLoss(FDivergence div, ParametricModelPtr model, std::shared_ptr<const Sieve> adversary,
           const ColumnLayout& layout, FganOptions opts = {});

  std::string family() const override { return "fgan"; }
  std::size_t theta_dim() const override { return model_->param_dim(); }
  std::size_t lambda_dim() const override { return lambda_->dim(); }
  std::vector<std::string> required_roles() const override { return {opts_.y_role}; }

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;
  double mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
              const Dataset& data) const override;
  void mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, const Dataset& data,
                 Eigen::VectorXd* g_theta, Eigen::VectorXd* g_lambda) const override;

  /// Adversary value λ(y) after squashing.
  double adversary_value(const Eigen::VectorXd& lambda, Row y) const;
  /// Model term (1/m)Σⱼ λ(T_θ(εⱼ)).
  double model_term(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda) const;

  const FDivergence& divergence() const { return div_; }
  const Sieve& adversary() const { return *lambda_; }
  const Eigen::MatrixXd& noise() const { return noise_; }

 private:
  struct ModelTerm {
    double value = 0.0;
    Eigen::VectorXd g_theta, g_lambda;
  };
  ModelTerm compute_model_term(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                               bool with_grad) const;
  const ModelTerm& cached(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                          bool with_grad) const;
  Eigen::MatrixXd model_draws(const Eigen::VectorXd& theta) const;
  void data_term(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& Y, double* value,
                 Eigen::VectorXd* g_lambda) const;

  FDivergence div_;
  ParametricModelPtr model_;
  std::shared_ptr<const Sieve> lambda_;
  FganOptions opts_;
  ColumnSlice y_;
  Eigen::MatrixXd noise_;

  mutable std::mutex cache_mutex_;
  mutable Eigen::VectorXd cache_theta_, cache_lambda_;
  mutable bool cache_valid_ = false, cache_has_grad_ = false;
  mutable ModelTerm cache_;
};

}  // namespace aest
