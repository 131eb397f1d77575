#include "aest/core/saddle_loss.hpp"

#include <cmath>
#include <string>

#include "aest/core/errors.hpp"

namespace aest {

Eigen::VectorXd SaddleLoss::grad_theta(const Eigen::VectorXd& theta,
                                       const Eigen::VectorXd& lambda, Row y) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta_dim()));
  accumulate_grad_theta(theta, lambda, y, g);
  return g;
}

Eigen::VectorXd SaddleLoss::grad_lambda(const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& lambda, Row y) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lambda_dim()));
  accumulate_grad_lambda(theta, lambda, y, g);
  return g;
}

void SaddleLoss::check_dims(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda) const {
  if (static_cast<std::size_t>(theta.size()) != theta_dim() ||
      static_cast<std::size_t>(lambda.size()) != lambda_dim()) {
    throw InvalidArgument(family() + " loss expects theta/lambda of size " +
                          std::to_string(theta_dim()) + "/" + std::to_string(lambda_dim()) +
                          ", got " + std::to_string(theta.size()) + "/" +
                          std::to_string(lambda.size()));
  }
}

double SaddleLoss::mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                        const Dataset& data) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    double v = eval(theta, lambda, data.row(i));
    if (!std::isfinite(v)) {
      throw NumericalFailure(family() + " loss is non-finite at row " + std::to_string(i), i);
    }
    sum += v;
  }
  return sum / static_cast<double>(data.n());
}

void SaddleLoss::mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                           const Dataset& data, Eigen::VectorXd* g_theta,
                           Eigen::VectorXd* g_lambda) const {
  if (g_theta) g_theta->setZero(static_cast<Eigen::Index>(theta_dim()));
  if (g_lambda) g_lambda->setZero(static_cast<Eigen::Index>(lambda_dim()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    Row y = data.row(i);
    if (g_theta) accumulate_grad_theta(theta, lambda, y, *g_theta);
    if (g_lambda) accumulate_grad_lambda(theta, lambda, y, *g_lambda);
  }
  const double inv_n = 1.0 / static_cast<double>(data.n());
  if (g_theta) *g_theta *= inv_n;
  if (g_lambda) *g_lambda *= inv_n;
}

Eigen::VectorXd SaddleLoss::best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                          const Eigen::VectorXd& start) const {
  if (!concave_in_lambda()) {
    throw UnsupportedModel(family() + " loss has no registered analytic adversary");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(lambda_dim());
  Eigen::VectorXd x = start.size() == k ? start : Eigen::VectorXd::Zero(k);
  double fx = mean(theta, x, data);
  Eigen::VectorXd g, gp, gm;

  for (int iter = 0; iter < 60; ++iter) {
    mean_grad(theta, x, data, nullptr, &g);
    if (!g.allFinite()) throw NumericalFailure(family() + " adversary gradient is non-finite");
    if (g.lpNorm<Eigen::Infinity>() == 0.0) break;

    const double h = 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>());
    Eigen::MatrixXd hess(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      mean_grad(theta, xp, data, nullptr, &gp);
      mean_grad(theta, xm, data, nullptr, &gm);
      hess.col(j) = (gp - gm) / (2.0 * h);
    }
    Eigen::MatrixXd neg = -0.5 * (hess + hess.transpose());
    const double scale = std::max(1e-300, neg.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg + 1e-13 * scale * Eigen::MatrixXd::Identity(k, k));
    Eigen::VectorXd d = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !d.allFinite() || g.dot(d) <= 0.0) d = g / scale;

    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      Eigen::VectorXd trial = x + step * d;
      double ft;
      try {
        ft = mean(theta, trial, data);
      } catch (const DomainViolation&) {
        continue;  // reject steps leaving the conjugate domain
      } catch (const NumericalFailure&) {
        continue;
      }
      if (ft >= fx + 1e-10 * step * g.dot(d) || (step == 1.0 && ft >= fx - 1e-15 * std::abs(fx))) {
        x = trial;
        const double gain = ft - fx;
        fx = ft;
        accepted = true;
        if (step * d.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>()) ||
            gain <= 1e-16 * (1.0 + std::abs(fx))) {
          return x;
        }
        break;
      }
    }
    if (!accepted) break;
  }
  return x;
}

}  // namespace aest
