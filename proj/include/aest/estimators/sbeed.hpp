#pragma once

#include <functional>
#include <memory>

#include "aest/core/saddle_loss.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

/// Transitions (s, a, s⁺) with reward R(s, a) and discount β.
struct MDPBatch {
  std::string s_role = "s";
  std::string a_role = "a";
  std::string s_plus_role = "s_plus";
  std::function<double(Row s, Row a)> reward;
  double beta = 0.9;
  /// Discrete actions coded 0..num_actions−1 in a single column; 0 selects
  /// the Gaussian policy head for continuous actions.
  std::size_t num_actions = 0;

  void validate() const;
};

/// l = (R + βV(s⁺) − V(s) − log P(a|s))·λ(s,a) − ½λ(s,a)², θ = (V coords, policy coords).
/// Discrete policies are log-softmax over a logits sieve on s; continuous
/// ones are Gaussian with the policy sieve emitting (mean, log sd) per action
/// dimension.
class SbeedLoss : public SaddleLoss {
 public:
  SbeedLoss(MDPBatch batch, std::shared_ptr<const Sieve> value,
            std::shared_ptr<const Sieve> policy, std::shared_ptr<const Sieve> adversary,
            const ColumnLayout& layout);

  std::string family() const override { return "sbeed"; }
  std::size_t theta_dim() const override { return value_->dim() + policy_->dim(); }
  std::size_t lambda_dim() const override { return lambda_->dim(); }
  std::vector<std::string> required_roles() const override;

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y,
                              Eigen::Ref<Eigen::VectorXd> out) const override;

  bool concave_in_lambda() const override;
  /// Linear sieve: C = (ΦᵀΦ)⁺Φᵀδ.
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                const Eigen::VectorXd& start) const override;

  /// Bellman residual R + βV(s⁺) − V(s) − log P(a|s).
  double residual(const Eigen::VectorXd& theta, Row y) const;
  double log_policy(const Eigen::VectorXd& theta, Row s, Row a) const;
  double value(const Eigen::VectorXd& theta, Row s) const;

  const MDPBatch& batch() const { return batch_; }
  const Sieve& value_sieve() const { return *value_; }
  const Sieve& policy_sieve() const { return *policy_; }
  const Sieve& adversary() const { return *lambda_; }

 private:
  Eigen::VectorXd sa_input(Row y) const;
  /// d log P(a|s) / d(policy output).
  Eigen::VectorXd log_policy_grad(const Eigen::VectorXd& out, Row a) const;
  double log_policy_from_output(const Eigen::VectorXd& out, Row a) const;

  MDPBatch batch_;
  std::shared_ptr<const Sieve> value_, policy_, lambda_;
  ColumnSlice s_, a_, s_plus_;
};

}  // namespace aest
