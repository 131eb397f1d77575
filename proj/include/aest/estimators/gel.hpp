#pragma once

#include "aest/core/saddle_loss.hpp"
#include "aest/divergences/fdivergence.hpp"
#include "aest/estimators/moment.hpp"

namespace aest {

/// l(θ, λ, Y) = −f*(λ′m(Y, θ)) with Euclidean λ ∈ ℝ^dim(m).
class GelLoss : public SaddleLoss {
 public:
  GelLoss(FDivergence div, MomentPtr m, std::string family = "gel");

  std::string family() const override { return family_; }
  std::size_t theta_dim() const override { return m_->theta_dim(); }
  std::size_t lambda_dim() const override { return m_->dim(); }
  std::vector<std::string> required_roles() const override { return m_->roles(); }

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;

  bool concave_in_lambda() const override { return true; }
  /// Damped Newton with the exact Hessian; one step when f* is quadratic.
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                const Eigen::VectorXd& start) const override;

  const FDivergence& divergence() const { return div_; }
  const MomentFunction& moment() const { return *m_; }

 private:
  FDivergence div_;
  MomentPtr m_;
  std::string family_;
};

/// CUE-GMM as the χ² member of GEL: raw f*(t) = t + t²/4.
inline GelLoss cue_loss(MomentPtr m) {
  return GelLoss(FDivergence::named(DivergenceName::ChiSquared), std::move(m), "cue");
}

/// argmax_c −𝔼ₙ f*(Ψc) by damped Newton from `start`; steps leaving the
/// conjugate domain are rejected in the line search.
Eigen::VectorXd concave_newton(const FDivergence& div, const Eigen::MatrixXd& psi,
                               Eigen::VectorXd start, int max_iters = 100);

/// 1e−10 · trace 𝔼ₙ[mm′].
double auto_ridge(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data);

/// 𝔼ₙ[m]′(𝔼ₙ[mm′] + ridge·I)⁻¹𝔼ₙ[m]. SingularMatrix(Weighting) when the
/// weighting matrix cannot be inverted.
double cue_objective(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data,
                     double ridge = 0.0);

/// −2(𝔼ₙ[mm′] + ridge·I)⁻¹𝔼ₙ[m], the χ² adversary.
Eigen::VectorXd gmm_lambda_star(const MomentFunction& m, const Eigen::VectorXd& theta,
                                const Dataset& data, double ridge = 0.0);

}  // namespace aest
