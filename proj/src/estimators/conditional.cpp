#include "aest/estimators/conditional.hpp"

#include <cmath>

#include "aest/core/errors.hpp"
#include "aest/estimators/gel.hpp"

namespace aest {

ConditionalLossBase::ConditionalLossBase(MomentPtr m, SievePtr lambda, ConditionalDesign design,
                                         const ColumnLayout& layout)
    : m_(std::move(m)), lambda_(std::move(lambda)), design_(std::move(design)) {
  if (!m_ || !lambda_) throw InvalidArgument("conditional loss needs a moment and an adversary");
  z_ = layout.role(design_.z_role);
  if (lambda_->spec().kind == SieveKind::Euclidean) {
    throw InvalidArgument("conditional adversary must be a function sieve on " + design_.z_role);
  }
  if (lambda_->input_dim() != z_.length) {
    throw InvalidArgument("adversary input dimension " + std::to_string(lambda_->input_dim()) +
                          " does not match role " + design_.z_role);
  }
  if (lambda_->output_dim() != m_->dim()) {
    throw InvalidArgument("adversary output dimension " + std::to_string(lambda_->output_dim()) +
                          " does not match moment dimension " + std::to_string(m_->dim()));
  }
}

std::vector<std::string> ConditionalLossBase::required_roles() const {
  std::vector<std::string> r = m_->roles();
  r.push_back(design_.z_role);
  return r;
}

bool ConditionalLossBase::concave_in_lambda() const {
  return lambda_->spec().kind == SieveKind::LinearBasis;
}

namespace {

// Row-major moment/Jacobian blocks evaluated once per dataset pass.
struct Pass {
  Eigen::MatrixXd Z, M, L;
};

Pass make_pass(const MomentFunction& m, const Sieve& lambda, const Eigen::VectorXd& theta,
               const Eigen::VectorXd& coords, const Eigen::MatrixXd& Z, const Dataset& data) {
  Pass p;
  p.Z = Z;
  p.M = moment_matrix(m, theta, data);
  p.L = lambda.eval_batch(coords, Z);
  return p;
}

void add_theta_grad(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data,
                    const Eigen::MatrixXd& W, Eigen::VectorXd& g) {
  for (std::size_t i = 0; i < data.n(); ++i) {
    g += m.jacobian(theta, data.row(i)).transpose() * W.row(static_cast<Eigen::Index>(i)).transpose();
  }
}

}  // namespace

// ---- cmr -------------------------------------------------------------------

double CmrLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const {
  check_dims(theta, lambda);
  Eigen::VectorXd l = lambda_->eval(lambda, z_.of(y));
  return m_->eval(theta, y).dot(l) - 0.25 * l.squaredNorm();
}

void CmrLoss::accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                    Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  out += m_->jacobian(theta, y).transpose() * lambda_->eval(lambda, z_.of(y));
}

void CmrLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                     Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd l = lambda_->eval(lambda, z_.of(y));
  out += lambda_->grad_coords(lambda, z_.of(y), m_->eval(theta, y) - 0.5 * l);
}

double CmrLoss::mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                     const Dataset& data) const {
  check_dims(theta, lambda);
  Pass p = make_pass(*m_, *lambda_, theta, lambda, z_block(data), data);
  Eigen::VectorXd rows = (p.M.cwiseProduct(p.L)).rowwise().sum() - 0.25 * p.L.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows[i])) {
      throw NumericalFailure("cmr loss is non-finite at row " + std::to_string(i),
                             static_cast<std::size_t>(i));
    }
  }
  return rows.mean();
}

void CmrLoss::mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                        const Dataset& data, Eigen::VectorXd* g_theta,
                        Eigen::VectorXd* g_lambda) const {
  check_dims(theta, lambda);
  Pass p = make_pass(*m_, *lambda_, theta, lambda, z_block(data), data);
  const double inv_n = 1.0 / static_cast<double>(data.n());
  if (g_theta) {
    g_theta->setZero(theta.size());
    add_theta_grad(*m_, theta, data, p.L, *g_theta);
    *g_theta *= inv_n;
  }
  if (g_lambda) *g_lambda = lambda_->grad_coords_batch(lambda, p.Z, p.M - 0.5 * p.L) * inv_n;
}

Eigen::VectorXd CmrLoss::best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                       const Eigen::VectorXd& start) const {
  if (!concave_in_lambda()) return SaddleLoss::best_response(theta, data, start);
  Eigen::MatrixXd Phi = lambda_->features_batch(z_block(data));
  Eigen::MatrixXd M = moment_matrix(*m_, theta, data);
  Eigen::MatrixXd C = 2.0 * (Phi.transpose() * Phi).completeOrthogonalDecomposition().solve(
                                Phi.transpose() * M);
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(C.data(), C.size());
  lambda_->project(c);
  return c;
}

// ---- conditional GEL -------------------------------------------------------

ConditionalGelLoss::ConditionalGelLoss(FDivergence div, MomentPtr m, SievePtr lambda,
                                       ConditionalDesign design, const ColumnLayout& layout)
    : ConditionalLossBase(std::move(m), std::move(lambda), std::move(design), layout), div_(div) {}

double ConditionalGelLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                Row y) const {
  check_dims(theta, lambda);
  return -div_.f_star(m_->eval(theta, y).dot(lambda_->eval(lambda, z_.of(y))));
}

void ConditionalGelLoss::accumulate_grad_theta(const Eigen::VectorXd& theta,
                                               const Eigen::VectorXd& lambda, Row y,
                                               Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd l = lambda_->eval(lambda, z_.of(y));
  const double t = m_->eval(theta, y).dot(l);
  out -= div_.f_star_prime(t) * (m_->jacobian(theta, y).transpose() * l);
}

void ConditionalGelLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta,
                                                const Eigen::VectorXd& lambda, Row y,
                                                Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd m = m_->eval(theta, y);
  const double t = m.dot(lambda_->eval(lambda, z_.of(y)));
  out += lambda_->grad_coords(lambda, z_.of(y), -div_.f_star_prime(t) * m);
}

double ConditionalGelLoss::mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                const Dataset& data) const {
  check_dims(theta, lambda);
  Pass p = make_pass(*m_, *lambda_, theta, lambda, z_block(data), data);
  Eigen::VectorXd t = (p.M.cwiseProduct(p.L)).rowwise().sum();
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    double v = -div_.f_star(t[i]);
    if (!std::isfinite(v)) {
      throw NumericalFailure("cgel loss is non-finite at row " + std::to_string(i),
                             static_cast<std::size_t>(i));
    }
    s += v;
  }
  return s / static_cast<double>(data.n());
}

void ConditionalGelLoss::mean_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                   const Dataset& data, Eigen::VectorXd* g_theta,
                                   Eigen::VectorXd* g_lambda) const {
  check_dims(theta, lambda);
  Pass p = make_pass(*m_, *lambda_, theta, lambda, z_block(data), data);
  Eigen::VectorXd t = (p.M.cwiseProduct(p.L)).rowwise().sum();
  Eigen::VectorXd w(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = -div_.f_star_prime(t[i]);
  const double inv_n = 1.0 / static_cast<double>(data.n());
  if (g_theta) {
    g_theta->setZero(theta.size());
    add_theta_grad(*m_, theta, data, w.asDiagonal() * p.L, *g_theta);
    *g_theta *= inv_n;
  }
  if (g_lambda) {
    *g_lambda = lambda_->grad_coords_batch(lambda, p.Z, w.asDiagonal() * p.M) * inv_n;
  }
}

Eigen::VectorXd ConditionalGelLoss::best_response(const Eigen::VectorXd& theta,
                                                  const Dataset& data,
                                                  const Eigen::VectorXd& start) const {
  if (!concave_in_lambda()) return SaddleLoss::best_response(theta, data, start);
  Eigen::MatrixXd Phi = lambda_->features_batch(z_block(data));
  Eigen::MatrixXd M = moment_matrix(*m_, theta, data);
  const Eigen::Index K = Phi.cols(), O = M.cols();
  Eigen::MatrixXd Psi(Phi.rows(), K * O);
  for (Eigen::Index o = 0; o < O; ++o) {
    Psi.middleCols(o * K, K) = M.col(o).asDiagonal() * Phi;
  }
  const auto k = static_cast<Eigen::Index>(lambda_dim());
  Eigen::VectorXd c = concave_newton(div_, Psi, start.size() == k ? start : Eigen::VectorXd::Zero(k));
  lambda_->project(c);
  return c;
}

}  // namespace aest
