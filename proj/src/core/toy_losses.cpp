#include "aest/core/toy_losses.hpp"

namespace aest {

double BilinearLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row) const {
  return theta.dot(lambda);
}

void BilinearLoss::accumulate_grad_theta(const Eigen::VectorXd&, const Eigen::VectorXd& lambda,
                                         Row, Eigen::Ref<Eigen::VectorXd> out) const {
  out += lambda;
}

void BilinearLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd&,
                                          Row, Eigen::Ref<Eigen::VectorXd> out) const {
  out += theta;
}

void BilinearLoss::mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                             const Dataset&, Eigen::VectorXd* g_theta,
                             Eigen::VectorXd* g_lambda) const {
  if (g_theta) *g_theta = lambda;
  if (g_lambda) *g_lambda = theta;
}

double QuadraticSaddleLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                 Row) const {
  const double t = theta[0], l = lambda[0];
  return a_ * (t - c_) * (t - c_) + b_ * t * l - d_ * l * l;
}

void QuadraticSaddleLoss::accumulate_grad_theta(const Eigen::VectorXd& theta,
                                                const Eigen::VectorXd& lambda, Row,
                                                Eigen::Ref<Eigen::VectorXd> out) const {
  out[0] += 2.0 * a_ * (theta[0] - c_) + b_ * lambda[0];
}

void QuadraticSaddleLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& lambda, Row,
                                                 Eigen::Ref<Eigen::VectorXd> out) const {
  out[0] += b_ * theta[0] - 2.0 * d_ * lambda[0];
}

Eigen::VectorXd QuadraticSaddleLoss::best_response(const Eigen::VectorXd& theta, const Dataset&,
                                                   const Eigen::VectorXd&) const {
  return Eigen::VectorXd::Constant(1, b_ * theta[0] / (2.0 * d_));
}

std::pair<double, double> QuadraticSaddleLoss::saddle() const {
  // θ(2a + b²/(2d)) = 2ac
  const double t = 2.0 * a_ * c_ / (2.0 * a_ + b_ * b_ / (2.0 * d_));
  return {t, b_ * t / (2.0 * d_)};
}

}  // namespace aest
