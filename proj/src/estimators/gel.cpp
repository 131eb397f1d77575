#include "aest/estimators/gel.hpp"

#include <cmath>
#include <limits>

#include "aest/core/errors.hpp"

namespace aest {

GelLoss::GelLoss(FDivergence div, MomentPtr m, std::string family)
    : div_(div), m_(std::move(m)), family_(std::move(family)) {
  if (!m_) throw InvalidArgument("gel loss needs a moment function");
}

double GelLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const {
  check_dims(theta, lambda);
  return -div_.f_star(lambda.dot(m_->eval(theta, y)));
}

void GelLoss::accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                    Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  const double t = lambda.dot(m_->eval(theta, y));
  out -= div_.f_star_prime(t) * (m_->jacobian(theta, y).transpose() * lambda);
}

void GelLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                     Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd m = m_->eval(theta, y);
  out -= div_.f_star_prime(lambda.dot(m)) * m;
}

Eigen::VectorXd GelLoss::best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                       const Eigen::VectorXd& start) const {
  const auto k = static_cast<Eigen::Index>(lambda_dim());
  return concave_newton(div_, moment_matrix(*m_, theta, data),
                        start.size() == k ? start : Eigen::VectorXd::Zero(k));
}

namespace {

// −𝔼ₙ f*(Ψc), or −inf when some ψᵢ′c leaves the conjugate domain.
double dual_value(const FDivergence& div, const Eigen::VectorXd& t) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!div.conjugate_domain().contains(t[i])) return -std::numeric_limits<double>::infinity();
    s += div.f_star(t[i]);
  }
  const double v = -s / static_cast<double>(t.size());
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd concave_newton(const FDivergence& div, const Eigen::MatrixXd& psi,
                               Eigen::VectorXd c, int max_iters) {
  const double n = static_cast<double>(psi.rows());
  const Eigen::Index k = psi.cols();
  if (c.size() != k) throw InvalidArgument("newton start has the wrong dimension");
  Eigen::VectorXd t = psi * c;
  double fx = dual_value(div, t);
  if (!std::isfinite(fx)) {
    c.setZero();
    t.setZero();
    fx = dual_value(div, t);
    if (!std::isfinite(fx)) throw DomainViolation(div.label(), 0.0, div.conjugate_domain().str());
  }
  Eigen::VectorXd w1(psi.rows()), w2(psi.rows());
  for (int iter = 0; iter < max_iters; ++iter) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      w1[i] = div.f_star_prime(t[i]);
      w2[i] = div.f_star_second(t[i]);
    }
    Eigen::VectorXd g = -(psi.transpose() * w1) / n;
    Eigen::MatrixXd negH = (psi.transpose() * w2.asDiagonal() * psi) / n;
    if (!g.allFinite() || !negH.allFinite()) {
      throw NumericalFailure("dual Newton produced a non-finite derivative", iter);
    }
    if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + std::abs(fx))) break;
    Eigen::VectorXd d = negH.completeOrthogonalDecomposition().solve(g);
    if (!d.allFinite() || g.dot(d) <= 0.0) d = g;
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      Eigen::VectorXd trial = c + step * d;
      Eigen::VectorXd tt = psi * trial;
      double ft = dual_value(div, tt);
      if (ft >= fx + 1e-4 * step * g.dot(d) || (step == 1.0 && ft >= fx)) {
        const double gain = ft - fx;
        c = trial;
        t = tt;
        fx = ft;
        moved = true;
        if (gain <= 1e-16 * (1.0 + std::abs(fx)) ||
            step * d.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + c.lpNorm<Eigen::Infinity>())) {
          return c;
        }
        break;
      }
    }
    if (!moved) break;
  }
  return c;
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd second;
};

Moments sample_moments(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data) {
  if (data.n() == 0) throw InvalidArgument("empty dataset");
  Eigen::MatrixXd M = moment_matrix(m, theta, data);
  const double n = static_cast<double>(data.n());
  return {M.colwise().sum().transpose() / n, M.transpose() * M / n};
}

Eigen::VectorXd weighted_solve(const Moments& mo, double ridge) {
  const Eigen::Index k = mo.mean.size();
  Eigen::MatrixXd B = mo.second + ridge * Eigen::MatrixXd::Identity(k, k);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
  const Eigen::VectorXd piv = ldlt.vectorD().cwiseAbs();
  const double big = piv.maxCoeff();
  if (ldlt.info() != Eigen::Success || !(big > 0.0) || piv.minCoeff() <= 1e-13 * big ||
      !ldlt.isPositive()) {
    throw SingularMatrix(SingularMatrix::Kind::Weighting,
                         "E_n[mm'] is singular; pass a positive ridge (e.g. auto_ridge)");
  }
  return ldlt.solve(mo.mean);
}

}  // namespace

double auto_ridge(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data) {
  return 1e-10 * sample_moments(m, theta, data).second.trace();
}

double cue_objective(const MomentFunction& m, const Eigen::VectorXd& theta, const Dataset& data,
                     double ridge) {
  if (ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
  Moments mo = sample_moments(m, theta, data);
  return mo.mean.dot(weighted_solve(mo, ridge));
}

Eigen::VectorXd gmm_lambda_star(const MomentFunction& m, const Eigen::VectorXd& theta,
                                const Dataset& data, double ridge) {
  if (ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
  return -2.0 * weighted_solve(sample_moments(m, theta, data), ridge);
}

}  // namespace aest
