#include "aest/estimators/moment.hpp"

#include <cmath>

#include "aest/core/errors.hpp"

namespace aest {

Eigen::MatrixXd MomentFunction::jacobian(const Eigen::VectorXd& theta, Row y) const {
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd J(d, theta.size());
  Eigen::VectorXd tp = theta, tm = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(theta[j]));
    tp[j] = theta[j] + h;
    tm[j] = theta[j] - h;
    J.col(j) = (eval(tp, y) - eval(tm, y)) / (2.0 * h);
    tp[j] = tm[j] = theta[j];
  }
  return J;
}

Eigen::MatrixXd moment_matrix(const MomentFunction& m, const Eigen::VectorXd& theta,
                              const Dataset& data) {
  if (static_cast<std::size_t>(theta.size()) != m.theta_dim()) {
    throw InvalidArgument("moment function expects theta of size " +
                          std::to_string(m.theta_dim()));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(m.dim()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    M.row(static_cast<Eigen::Index>(i)) = m.eval(theta, data.row(i)).transpose();
  }
  return M;
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(Row r) {
  return {r.data(), static_cast<Eigen::Index>(r.size())};
}

}  // namespace

MeanMoment::MeanMoment(const ColumnLayout& layout, std::string y_role)
    : role_(std::move(y_role)), y_(layout.role(role_)) {}

Eigen::VectorXd MeanMoment::eval(const Eigen::VectorXd& theta, Row y) const {
  return as_vector(y_.of(y)) - theta;
}

Eigen::MatrixXd MeanMoment::jacobian(const Eigen::VectorXd& theta, Row) const {
  return -Eigen::MatrixXd::Identity(theta.size(), theta.size());
}

LinearIV::LinearIV(const ColumnLayout& layout, std::string y_role, std::string x_role)
    : y_role_(std::move(y_role)),
      x_role_(std::move(x_role)),
      y_(layout.role(y_role_)),
      x_(layout.role(x_role_)) {
  if (y_.length != 1) throw InvalidArgument("linear IV moment needs a scalar outcome");
}

Eigen::VectorXd LinearIV::eval(const Eigen::VectorXd& theta, Row y) const {
  Eigen::VectorXd m(1);
  m[0] = y_.of(y)[0] - as_vector(x_.of(y)).dot(theta);
  return m;
}

Eigen::MatrixXd LinearIV::jacobian(const Eigen::VectorXd&, Row y) const {
  return -as_vector(x_.of(y)).transpose();
}

SieveResidualMoment::SieveResidualMoment(const ColumnLayout& layout, std::shared_ptr<const Sieve> h,
                                         std::string y_role, std::string x_role)
    : h_(std::move(h)),
      y_role_(std::move(y_role)),
      x_role_(std::move(x_role)),
      y_(layout.role(y_role_)),
      x_(layout.role(x_role_)) {
  if (y_.length != 1 || h_->output_dim() != 1) {
    throw InvalidArgument("sieve residual moment needs scalar outcome and sieve");
  }
  if (h_->input_dim() != x_.length) {
    throw InvalidArgument("sieve input dimension does not match role " + x_role_);
  }
}

Eigen::VectorXd SieveResidualMoment::eval(const Eigen::VectorXd& theta, Row y) const {
  Eigen::VectorXd m(1);
  m[0] = y_.of(y)[0] - h_->eval_scalar(theta, x_.of(y));
  return m;
}

Eigen::MatrixXd SieveResidualMoment::jacobian(const Eigen::VectorXd& theta, Row y) const {
  return -h_->grad_coords(theta, x_.of(y), Eigen::VectorXd::Ones(1)).transpose();
}

}  // namespace aest
