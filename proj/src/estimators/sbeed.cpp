#include "aest/estimators/sbeed.hpp"

#include <cmath>

#include "aest/core/errors.hpp"

namespace aest {

void MDPBatch::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("discount beta must lie in (0,1)");
  if (!reward) throw InvalidArgument("MDP batch needs a reward function");
}

SbeedLoss::SbeedLoss(MDPBatch batch, std::shared_ptr<const Sieve> value,
                     std::shared_ptr<const Sieve> policy, std::shared_ptr<const Sieve> adversary,
                     const ColumnLayout& layout)
    : batch_(std::move(batch)),
      value_(std::move(value)),
      policy_(std::move(policy)),
      lambda_(std::move(adversary)) {
  batch_.validate();
  s_ = layout.role(batch_.s_role);
  a_ = layout.role(batch_.a_role);
  s_plus_ = layout.role(batch_.s_plus_role);
  if (s_plus_.length != s_.length) throw InvalidArgument("s and s_plus must have equal width");
  if (value_->input_dim() != s_.length || value_->output_dim() != 1) {
    throw InvalidArgument("value sieve must map s to a scalar");
  }
  if (policy_->input_dim() != s_.length) throw InvalidArgument("policy sieve must take s");
  if (batch_.num_actions > 0) {
    if (a_.length != 1) throw InvalidArgument("discrete actions use a single column");
    if (policy_->output_dim() != batch_.num_actions) {
      throw InvalidArgument("policy sieve must emit one logit per action");
    }
  } else if (policy_->output_dim() != 2 * a_.length) {
    throw InvalidArgument("Gaussian policy sieve must emit mean and log sd per action dimension");
  }
  if (lambda_->input_dim() != s_.length + a_.length || lambda_->output_dim() != 1) {
    throw InvalidArgument("adversary must map (s, a) to a scalar");
  }
}

std::vector<std::string> SbeedLoss::required_roles() const {
  return {batch_.s_role, batch_.a_role, batch_.s_plus_role};
}

bool SbeedLoss::concave_in_lambda() const {
  return lambda_->spec().kind == SieveKind::LinearBasis;
}

Eigen::VectorXd SbeedLoss::sa_input(Row y) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s_.length + a_.length));
  Row s = s_.of(y), a = a_.of(y);
  for (std::size_t j = 0; j < s.size(); ++j) v[static_cast<Eigen::Index>(j)] = s[j];
  for (std::size_t j = 0; j < a.size(); ++j) v[static_cast<Eigen::Index>(s.size() + j)] = a[j];
  return v;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

Row row_of(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::size_t action_index(Row a, std::size_t count) {
  const double v = a[0];
  const auto k = static_cast<long long>(std::llround(v));
  if (std::abs(v - static_cast<double>(k)) > 1e-9 || k < 0 || static_cast<std::size_t>(k) >= count) {
    throw InvalidArgument("action " + std::to_string(v) + " is not a valid discrete action");
  }
  return static_cast<std::size_t>(k);
}

}  // namespace

double SbeedLoss::log_policy_from_output(const Eigen::VectorXd& out, Row a) const {
  if (batch_.num_actions > 0) {
    const double mx = out.maxCoeff();
    const double lse = mx + std::log((out.array() - mx).exp().sum());
    return out[static_cast<Eigen::Index>(action_index(a, batch_.num_actions))] - lse;
  }
  const auto k = static_cast<Eigen::Index>(a_.length);
  double lp = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double z = (a[static_cast<std::size_t>(j)] - out[j]) * std::exp(-out[k + j]);
    lp += -0.5 * z * z - out[k + j] - kHalfLog2Pi;
  }
  return lp;
}

Eigen::VectorXd SbeedLoss::log_policy_grad(const Eigen::VectorXd& out, Row a) const {
  Eigen::VectorXd g(out.size());
  if (batch_.num_actions > 0) {
    const double mx = out.maxCoeff();
    Eigen::ArrayXd p = (out.array() - mx).exp();
    g = -(p / p.sum()).matrix();
    g[static_cast<Eigen::Index>(action_index(a, batch_.num_actions))] += 1.0;
    return g;
  }
  const auto k = static_cast<Eigen::Index>(a_.length);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double inv_sd = std::exp(-out[k + j]);
    const double z = (a[static_cast<std::size_t>(j)] - out[j]) * inv_sd;
    g[j] = z * inv_sd;
    g[k + j] = z * z - 1.0;
  }
  return g;
}

double SbeedLoss::value(const Eigen::VectorXd& theta, Row s) const {
  return value_->eval_scalar(theta.head(static_cast<Eigen::Index>(value_->dim())), s);
}

double SbeedLoss::log_policy(const Eigen::VectorXd& theta, Row s, Row a) const {
  Eigen::VectorXd pc = theta.tail(static_cast<Eigen::Index>(policy_->dim()));
  return log_policy_from_output(policy_->eval(pc, s), a);
}

double SbeedLoss::residual(const Eigen::VectorXd& theta, Row y) const {
  Row s = s_.of(y), a = a_.of(y);
  return batch_.reward(s, a) + batch_.beta * value(theta, s_plus_.of(y)) - value(theta, s) -
         log_policy(theta, s, a);
}

double SbeedLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const {
  check_dims(theta, lambda);
  const double l = lambda_->eval_scalar(lambda, row_of(sa_input(y)));
  return residual(theta, y) * l - 0.5 * l * l;
}

void SbeedLoss::accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                      Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  const double l = lambda_->eval_scalar(lambda, row_of(sa_input(y)));
  const auto nv = static_cast<Eigen::Index>(value_->dim());
  const auto np = static_cast<Eigen::Index>(policy_->dim());
  Eigen::VectorXd vc = theta.head(nv), pc = theta.tail(np);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  Row s = s_.of(y), a = a_.of(y);
  out.head(nv) += l * (batch_.beta * value_->grad_coords(vc, s_plus_.of(y), one) -
                       value_->grad_coords(vc, s, one));
  Eigen::VectorXd up = -l * log_policy_grad(policy_->eval(pc, s), a);
  out.tail(np) += policy_->grad_coords(pc, s, up);
}

void SbeedLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                       Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd sa = sa_input(y);
  const double l = lambda_->eval_scalar(lambda, row_of(sa));
  Eigen::VectorXd up(1);
  up[0] = residual(theta, y) - l;
  out += lambda_->grad_coords(lambda, row_of(sa), up);
}

Eigen::VectorXd SbeedLoss::best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                         const Eigen::VectorXd& start) const {
  if (!concave_in_lambda()) return SaddleLoss::best_response(theta, data, start);
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::MatrixXd SA(n, static_cast<Eigen::Index>(s_.length + a_.length));
  Eigen::VectorXd delta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Row y = data.row(static_cast<std::size_t>(i));
    SA.row(i) = sa_input(y).transpose();
    delta[i] = residual(theta, y);
  }
  Eigen::MatrixXd Phi = lambda_->features_batch(SA);
  Eigen::VectorXd c =
      (Phi.transpose() * Phi).completeOrthogonalDecomposition().solve(Phi.transpose() * delta);
  lambda_->project(c);
  return c;
}

}  // namespace aest
