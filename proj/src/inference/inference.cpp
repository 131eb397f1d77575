#include "aest/inference/inference.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "aest/core/errors.hpp"

namespace aest {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalFailure(std::string("non-finite probe in ") + what);
  return v;
}

// Wraps domain violations of a probe as numerical failures.
template <class F>
double probe(F&& f, const char* what) {
  try {
    return checked(f(), what);
  } catch (const DomainViolation& e) {
    throw NumericalFailure(std::string(what) + ": " + e.what());
  }
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& A, SingularMatrix::Kind kind,
                                const std::string& what) {
  Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (!ev.allFinite() || ev.cwiseAbs().minCoeff() <= 1e-12 * scale) {
    throw SingularMatrix(kind, what + " is singular");
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd start_for(const SaddleLoss& loss, const Eigen::VectorXd& warm) {
  return warm.size() > 0 ? warm
                         : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(loss.lambda_dim()));
}

}  // namespace

double default_step(const Eigen::VectorXd& at) {
  return 1e-4 * (1.0 + (at.size() > 0 ? at.lpNorm<Eigen::Infinity>() : 0.0));
}

double pathwise_derivative(const ScalarFunctional& f, const Eigen::VectorXd& at,
                           const Eigen::VectorXd& dir, double h, bool richardson) {
  if (dir.size() != at.size()) throw InvalidArgument("direction and point differ in dimension");
  if (h <= 0.0) h = default_step(at);
  auto central = [&](double s) {
    const double fp = probe([&] { return f(at + s * dir); }, "pathwise derivative");
    const double fm = probe([&] { return f(at - s * dir); }, "pathwise derivative");
    return (fp - fm) / (2.0 * s);
  };
  const double d = central(h);
  if (!richardson) return d;
  return (4.0 * central(0.5 * h) - d) / 3.0;
}

double concentrated_objective(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                              const Dataset& data, const Eigen::VectorXd& warm) {
  Eigen::VectorXd la = loss.best_response(theta, data, start_for(loss, warm));
  return loss.mean(theta, la, data);
}

InnerProduct inner_product_matrix(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                  const Dataset& data, const Eigen::MatrixXd& dirs,
                                  const Eigen::VectorXd& warm, double h, double tol) {
  if (dirs.rows() != theta_hat.size()) throw InvalidArgument("directions do not match θ");
  if (h <= 0.0) h = default_step(theta_hat);
  const Eigen::VectorXd w0 = loss.best_response(theta_hat, data, start_for(loss, warm));
  auto F = [&](const Eigen::VectorXd& th) {
    return probe([&] { return concentrated_objective(loss, th, data, w0); },
                 "concentrated objective");
  };
  const Eigen::Index k = dirs.cols();
  InnerProduct out;
  out.M.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      const Eigen::VectorXd u = h * dirs.col(a), v = h * dirs.col(b);
      const double val = (F(theta_hat + u + v) - F(theta_hat + u - v) - F(theta_hat - u + v) +
                          F(theta_hat - u - v)) /
                         (4.0 * h * h);
      out.M(a, b) = out.M(b, a) = val;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.M, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.indefinite = out.min_eigenvalue < -tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return out;
}

double normal_two_sided_quantile(double level) {
  if (!(level > 0.0 && level <= 1.0)) throw InvalidArgument("level must lie in (0,1]");
  if (level == 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

VarianceReport variance_estimate(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                 const Eigen::VectorXd& lambda_hat, const Dataset& data,
                                 const Eigen::VectorXd& zeta, double level) {
  const Eigen::Index p = theta_hat.size();
  if (zeta.size() != p) throw InvalidArgument("functional gradient does not match θ");
  if (data.n() < 2) throw InvalidArgument("variance needs at least two rows");
  VarianceReport rep;
  rep.level = level;
  rep.estimate = zeta.dot(theta_hat);
  const double z = normal_two_sided_quantile(level);
  const std::size_t n = data.n();
  rep.scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (zeta.isZero(0.0)) {
    rep.M = Eigen::MatrixXd::Zero(p, p);
    rep.v_star = Eigen::VectorXd::Zero(p);
    rep.lo = rep.hi = rep.estimate;
    if (std::isinf(z)) {
      rep.lo = -std::numeric_limits<double>::infinity();
      rep.hi = std::numeric_limits<double>::infinity();
    }
    return rep;
  }
  rep.M = inner_product_matrix(loss, theta_hat, data, Eigen::MatrixXd::Identity(p, p), lambda_hat).M;
  rep.v_star = checked_inverse(rep.M, SingularMatrix::Kind::Information, "information matrix") * zeta;

  Eigen::VectorXd dlambda = Eigen::VectorXd::Zero(lambda_hat.size());
  if (loss.has_best_response()) {
    const double h = default_step(theta_hat) / std::max(1.0, rep.v_star.lpNorm<Eigen::Infinity>());
    Eigen::VectorXd lp = loss.best_response(theta_hat + h * rep.v_star, data, lambda_hat);
    Eigen::VectorXd lm = loss.best_response(theta_hat - h * rep.v_star, data, lambda_hat);
    dlambda = (lp - lm) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Row r = data.row(i);
    const double s = loss.grad_theta(theta_hat, lambda_hat, r).dot(rep.v_star) +
                     loss.grad_lambda(theta_hat, lambda_hat, r).dot(dlambda);
    rep.scores[static_cast<Eigen::Index>(i)] = checked(s, "score");
  }
  const double mean = rep.scores.mean();
  rep.V_hat = (rep.scores.array() - mean).square().sum() / static_cast<double>(n - 1);
  rep.se = std::sqrt(rep.V_hat / static_cast<double>(n));
  rep.lo = rep.estimate - z * rep.se;
  rep.hi = rep.estimate + z * rep.se;
  if (std::isinf(z)) {
    rep.lo = -std::numeric_limits<double>::infinity();
    rep.hi = std::numeric_limits<double>::infinity();
  }
  return rep;
}

double neyman_orthogonality_check(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                  const Eigen::VectorXd& lambda_hat, const Dataset& data,
                                  const std::vector<AffinePerturbation>& perturbations,
                                  const AdversaryMap& map, double h) {
  if (perturbations.empty()) throw InvalidArgument("no perturbations given");
  const Eigen::VectorXd map0 = map ? map(theta_hat) : Eigen::VectorXd();
  auto nu = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
    return map ? Eigen::VectorXd(lambda_hat + map(th) - map0) : lambda_hat;
  };
  const double ht = h * (1.0 + theta_hat.lpNorm<Eigen::Infinity>());
  const double he = h * (1.0 + lambda_hat.lpNorm<Eigen::Infinity>());
  double worst = 0.0;
  for (const AffinePerturbation& d : perturbations) {
    if (d.offset.size() != lambda_hat.size()) throw InvalidArgument("perturbation dimension mismatch");
    auto delta = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
      if (d.slope.size() == 0) return d.offset;
      return d.offset + d.slope * (th - theta_hat);
    };
    auto F = [&](const Eigen::VectorXd& th, double eps) {
      return probe([&] { return loss.mean(th, nu(th) + eps * delta(th), data); },
                   "orthogonality check");
    };
    for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
      Eigen::VectorXd tp = theta_hat, tm = theta_hat;
      tp[j] += ht;
      tm[j] -= ht;
      const double v = (F(tp, he) - F(tp, -he) - F(tm, he) + F(tm, -he)) / (4.0 * ht * he);
      worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

CmrVariances cmr_variance_formulas(const ConditionalDesign& design, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& z_nodes,
                                   const Eigen::VectorXd& z_weights) {
  if (!design.cond_var || !design.cond_jacobian) {
    throw InvalidArgument("design needs conditional variance and jacobian oracles");
  }
  if (z_nodes.rows() != z_weights.size() || z_nodes.rows() == 0) {
    throw InvalidArgument("quadrature nodes and weights must align");
  }
  const Eigen::Index p = theta.size();
  Eigen::MatrixXd Mt = Eigen::MatrixXd::Zero(p, p), S = Mt, Istar = Mt;
  Eigen::VectorXd z(z_nodes.cols());
  for (Eigen::Index i = 0; i < z_nodes.rows(); ++i) {
    z = z_nodes.row(i).transpose();
    Row zr(z.data(), static_cast<std::size_t>(z.size()));
    Eigen::MatrixXd D = design.cond_jacobian(theta, zr);
    Eigen::MatrixXd Om = design.cond_var(theta, zr);
    const double w = z_weights[i];
    Mt += w * D.transpose() * D;
    S += w * D.transpose() * Om * D;
    Istar += w * D.transpose() * checked_inverse(Om, SingularMatrix::Kind::Design,
                                                 "conditional variance") * D;
  }
  CmrVariances out;
  out.M_tilde = Mt;
  out.S = S;
  Eigen::MatrixXd Mi = checked_inverse(Mt, SingularMatrix::Kind::Design, "𝔼[D′D]");
  out.V_sandwich = Mi * S * Mi;
  out.V_literal = checked_inverse(S, SingularMatrix::Kind::Design, "𝔼[D′ΩD]");
  out.V_star = checked_inverse(Istar, SingularMatrix::Kind::Design, "𝔼[D′Ω⁻¹D]");
  return out;
}

}  // namespace aest
