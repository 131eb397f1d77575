#include "aest/estimators/fgan.hpp"

#include <cmath>

#include "aest/core/errors.hpp"

namespace aest {

FganLoss::FganLoss(FDivergence div, ParametricModelPtr model,
                   std::shared_ptr<const Sieve> adversary, const ColumnLayout& layout,
                   FganOptions opts)
    : div_(div), model_(std::move(model)), lambda_(std::move(adversary)), opts_(std::move(opts)) {
  if (!model_ || !lambda_) throw InvalidArgument("fgan loss needs a model and an adversary");
  y_ = layout.role(opts_.y_role);
  if (y_.length != model_->dim()) throw InvalidArgument("model dimension does not match data");
  if (lambda_->input_dim() != model_->dim() || lambda_->output_dim() != 1) {
    throw InvalidArgument("fgan adversary must map observations to a scalar");
  }
  if (opts_.model_samples == 0) throw InvalidArgument("fgan needs at least one model sample");
  Rng rng(derive_seed(opts_.seed, {0xf6a9}));
  noise_ = model_->draw_noise(rng, opts_.model_samples);
}

namespace {

Row row_of(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

double FganLoss::adversary_value(const Eigen::VectorXd& lambda, Row y) const {
  return div_.squash(lambda_->eval_scalar(lambda, y));
}

Eigen::MatrixXd FganLoss::model_draws(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd Y(noise_.rows(), static_cast<Eigen::Index>(model_->dim()));
  Eigen::VectorXd e(noise_.cols());
  for (Eigen::Index j = 0; j < noise_.rows(); ++j) {
    e = noise_.row(j).transpose();
    Y.row(j) = model_->push(theta, row_of(e)).transpose();
  }
  return Y;
}

FganLoss::ModelTerm FganLoss::compute_model_term(const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& lambda,
                                                 bool with_grad) const {
  ModelTerm mt;
  Eigen::MatrixXd Y = model_draws(theta);
  Eigen::VectorXd u = lambda_->eval_batch(lambda, Y).col(0);
  const double inv_m = 1.0 / static_cast<double>(Y.rows());
  Eigen::VectorXd sp(u.size());
  double s = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    s += div_.squash(u[j]);
    sp[j] = div_.squash_prime(u[j]);
  }
  mt.value = s * inv_m;
  if (!with_grad) return mt;
  mt.g_lambda = lambda_->grad_coords_batch(lambda, Y, sp) * inv_m;
  mt.g_theta = Eigen::VectorXd::Zero(theta.size());
  if (opts_.reparameterized) {
    Eigen::MatrixXd G = lambda_->input_grad_batch(lambda, Y, sp);
    Eigen::VectorXd e(noise_.cols());
    for (Eigen::Index j = 0; j < noise_.rows(); ++j) {
      e = noise_.row(j).transpose();
      mt.g_theta += model_->push_jacobian(theta, row_of(e)).transpose() * G.row(j).transpose();
    }
    mt.g_theta *= inv_m;
  } else {
    Eigen::VectorXd tp = theta, tm = theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double h = 1e-5 * (1.0 + std::abs(theta[k]));
      tp[k] = theta[k] + h;
      tm[k] = theta[k] - h;
      mt.g_theta[k] = (compute_model_term(tp, lambda, false).value -
                       compute_model_term(tm, lambda, false).value) / (2.0 * h);
      tp[k] = tm[k] = theta[k];
    }
  }
  return mt;
}

const FganLoss::ModelTerm& FganLoss::cached(const Eigen::VectorXd& theta,
                                            const Eigen::VectorXd& lambda, bool with_grad) const {
  // Caller holds cache_mutex_.
  const bool hit = cache_valid_ && cache_theta_.size() == theta.size() && cache_theta_ == theta &&
                   cache_lambda_.size() == lambda.size() && cache_lambda_ == lambda &&
                   (cache_has_grad_ || !with_grad);
  if (!hit) {
    cache_ = compute_model_term(theta, lambda, with_grad);
    cache_theta_ = theta;
    cache_lambda_ = lambda;
    cache_valid_ = true;
    cache_has_grad_ = with_grad;
  }
  return cache_;
}

double FganLoss::model_term(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda) const {
  check_dims(theta, lambda);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return cached(theta, lambda, false).value;
}

double FganLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const {
  const double mt = model_term(theta, lambda);
  return mt - div_.f_star(adversary_value(lambda, y_.of(y)));
}

void FganLoss::accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                     Row, Eigen::Ref<Eigen::VectorXd> out) const {
  check_dims(theta, lambda);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  out += cached(theta, lambda, true).g_theta;
}

void FganLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                      Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  check_dims(theta, lambda);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    out += cached(theta, lambda, true).g_lambda;
  }
  Row yy = y_.of(y);
  const double u = lambda_->eval_scalar(lambda, yy);
  const double up = -div_.f_star_prime(div_.squash(u)) * div_.squash_prime(u);
  out += lambda_->grad_coords(lambda, yy, Eigen::VectorXd::Constant(1, up));
}

void FganLoss::data_term(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& Y, double* value,
                         Eigen::VectorXd* g_lambda) const {
  Eigen::VectorXd u = lambda_->eval_batch(lambda, Y).col(0);
  Eigen::VectorXd up(u.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double t = div_.squash(u[i]);
    const double v = div_.f_star(t);
    if (!std::isfinite(v)) {
      throw NumericalFailure("fgan loss is non-finite at row " + std::to_string(i),
                             static_cast<std::size_t>(i));
    }
    s += v;
    if (g_lambda) up[i] = -div_.f_star_prime(t) * div_.squash_prime(u[i]);
  }
  const double inv_n = 1.0 / static_cast<double>(Y.rows());
  if (value) *value = -s * inv_n;
  if (g_lambda) *g_lambda = lambda_->grad_coords_batch(lambda, Y, up) * inv_n;
}

double FganLoss::mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                      const Dataset& data) const {
  double d = 0.0;
  data_term(lambda, data.column_block(opts_.y_role), &d, nullptr);
  return model_term(theta, lambda) + d;
}

void FganLoss::mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                         const Dataset& data, Eigen::VectorXd* g_theta,
                         Eigen::VectorXd* g_lambda) const {
  check_dims(theta, lambda);
  ModelTerm mt;
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    mt = cached(theta, lambda, true);
  }
  if (g_theta) *g_theta = mt.g_theta;
  if (g_lambda) {
    data_term(lambda, data.column_block(opts_.y_role), nullptr, g_lambda);
    *g_lambda += mt.g_lambda;
  }
}

}  // namespace aest
