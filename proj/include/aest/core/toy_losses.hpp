#pragma once

#include "aest/core/saddle_loss.hpp"

namespace aest {

/// l(θ,λ) = θ′λ, data-independent. The textbook non-orthogonal game.
class BilinearLoss : public SaddleLoss {
 public:
  explicit BilinearLoss(std::size_t dim = 1) : dim_(dim) {}
  std::string family() const override { return "bilinear"; }
  std::size_t theta_dim() const override { return dim_; }
  std::size_t lambda_dim() const override { return dim_; }
  std::vector<std::string> required_roles() const override { return {}; }
  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row,
                              Eigen::Ref<Eigen::VectorXd> out) const override;
  double mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
              const Dataset&) const override {
    return theta.dot(lambda);
  }
  void mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, const Dataset&,
                 Eigen::VectorXd* g_theta, Eigen::VectorXd* g_lambda) const override;

 private:
  std::size_t dim_;
};

/// Scalar quadratic game l = a(θ−c)² + bθλ − dλ², data-independent. With
/// a, d > 0 it is strongly convex-concave with saddle from the 2x2 FOC system.
class QuadraticSaddleLoss : public SaddleLoss {
 public:
  QuadraticSaddleLoss(double a = 1.0, double c = 1.0, double b = 1.0, double d = 1.0)
      : a_(a), c_(c), b_(b), d_(d) {}
  std::string family() const override { return "quadratic"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t lambda_dim() const override { return 1; }
  std::vector<std::string> required_roles() const override { return {}; }
  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row) const override;
  void accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row,
                             Eigen::Ref<Eigen::VectorXd> out) const override;
  void accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row,
                              Eigen::Ref<Eigen::VectorXd> out) const override;
  bool concave_in_lambda() const override { return d_ > 0; }
  Eigen::VectorXd best_response(const Eigen::VectorXd& theta, const Dataset&,
                                const Eigen::VectorXd&) const override;

  /// (θ*, λ*) solving 2a(θ−c)+bλ=0, bθ−2dλ=0.
  std::pair<double, double> saddle() const;

 private:
  double a_, c_, b_, d_;
};

}  // namespace aest
