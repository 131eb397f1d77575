#pragma once

#include <memory>

#include "aest/core/saddle_loss.hpp"
#include "aest/divergences/fdivergence.hpp"
#include "aest/estimators/moment.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

using SievePtr = std::shared_ptr<const Sieve>;

/// Shared plumbing for losses whose adversary is a function sieve λ(z) with
/// output dimension dim(m).
class ConditionalLossBase : public SaddleLoss {
 public:
  ConditionalLossBase(MomentPtr m, SievePtr lambda, ConditionalDesign design,
                      const ColumnLayout& layout);

  std::size_t theta_dim() const override { return m_->theta_dim(); }
  std::size_t lambda_dim() const override { return lambda_->dim(); }
  std::vector<std::string> required_roles() const override;
  /// Concave in the coordinates whenever λ is linear in them.
  bool concave_in_lambda() const override;

  const MomentFunction& moment() const { return *m_; }
  const Sieve& adversary() const { return *lambda_; }
  const ConditionalDesign& design() const { return design_; }

 protected:
  Eigen::MatrixXd z_block(const Dataset& data) const { return data.column_block(design_.z_role); }

  MomentPtr m_;
  SievePtr lambda_;
  ConditionalDesign design_;
  ColumnSlice z_;
};

/// l = m(X,θ)′λ(Z) − ¼‖λ(Z)‖².
class CmrLoss : public ConditionalLossBase {
 public:
  using ConditionalLossBase::ConditionalLossBase;
  std::string family() const override { return "cmr"; }

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;
  double mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
              const Dataset& data) const override;
  void mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, const Dataset& data,
                 Eigen::VectorXd* g_theta, Eigen::VectorXd* g_lambda) const override;
  /// Linear sieve: C = 2(ΦᵀΦ)⁺ΦᵀM.
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                const Eigen::VectorXd& start) const override;
};

/// l = −f*(m(X,θ)′λ(Z)).
class ConditionalGelLoss : public ConditionalLossBase {
 public:
  ConditionalGelLoss(FDivergence div, MomentPtr m, SievePtr lambda, ConditionalDesign design,
                     const ColumnLayout& layout);
  std::string family() const override { return "cgel"; }

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;
  double mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
              const Dataset& data) const override;
  void mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, const Dataset& data,
                 Eigen::VectorXd* g_theta, Eigen::VectorXd* g_lambda) const override;
  /// Linear sieve: GEL on ψᵢ = m_i ⊗ φ(zᵢ).
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                const Eigen::VectorXd& start) const override;

  const FDivergence& divergence() const { return div_; }

 private:
  FDivergence div_;
};

}  // namespace aest
