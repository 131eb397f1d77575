#include "aest/divergences/ratio_model.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "aest/core/errors.hpp"

namespace aest {

double RatioModel::log_ratio(Row) const {
  throw UnsupportedModel("model has no closed-form density ratio");
}

GaussianLocation::GaussianLocation(Eigen::VectorXd mu, double sigma, Eigen::VectorXd ref_mu,
                                   double ref_sigma)
    : mu_(std::move(mu)),
      ref_mu_(ref_mu.size() ? std::move(ref_mu) : Eigen::VectorXd::Zero(mu_.size())),
      sigma_(sigma),
      ref_sigma_(ref_sigma) {
  if (mu_.size() == 0 || ref_mu_.size() != mu_.size()) {
    throw InvalidArgument("gaussian location needs matching nonempty means");
  }
  if (!(sigma_ > 0) || !(ref_sigma_ > 0)) throw InvalidArgument("scales must be positive");
}

Dataset GaussianLocation::sample(Rng& rng, std::size_t count) const {
  const std::size_t d = dim();
  std::vector<double> v(count * d);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] = mu_[j] + sigma_ * rng.normal();
  }
  ColumnLayout layout;
  layout.add("y", d);
  return Dataset(layout, std::move(v));
}

double GaussianLocation::log_ratio(Row y) const {
  double s = 0.0;
  const double d = static_cast<double>(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    double a = (y[j] - mu_[j]) / sigma_, b = (y[j] - ref_mu_[j]) / ref_sigma_;
    s += -0.5 * a * a + 0.5 * b * b;
  }
  return s - d * std::log(sigma_ / ref_sigma_);
}

GaussianLocationFamily::GaussianLocationFamily(std::size_t dim, double sigma,
                                               Eigen::VectorXd ref_mu, double ref_sigma)
    : dim_(dim),
      sigma_(sigma),
      ref_mu_(ref_mu.size() ? std::move(ref_mu)
                            : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      ref_sigma_(ref_sigma) {
  if (dim_ == 0) throw InvalidArgument("gaussian location family needs dim >= 1");
}

Eigen::MatrixXd GaussianLocationFamily::draw_noise(Rng& rng, std::size_t count) const {
  Eigen::MatrixXd eps(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < eps.rows(); ++i) {
    for (Eigen::Index j = 0; j < eps.cols(); ++j) eps(i, j) = rng.normal();
  }
  return eps;
}

Eigen::VectorXd GaussianLocationFamily::push(const Eigen::VectorXd& theta, Row eps) const {
  Eigen::VectorXd y(theta.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) y[j] = theta[j] + sigma_ * eps[j];
  return y;
}

Eigen::MatrixXd GaussianLocationFamily::push_jacobian(const Eigen::VectorXd&, Row) const {
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim_),
                                   static_cast<Eigen::Index>(dim_));
}

RatioModelPtr GaussianLocationFamily::at(const Eigen::VectorXd& theta) const {
  return std::make_shared<GaussianLocation>(theta, sigma_, ref_mu_, ref_sigma_);
}

double analytic_adversary(const FDivergence& div, const RatioModel& model, Row y) {
  if (!model.has_log_ratio()) throw UnsupportedModel("analytic adversary needs a density ratio");
  return div.f_prime(std::exp(model.log_ratio(y)));
}

Adversary analytic_adversary(const FDivergence& div, RatioModelPtr model) {
  if (!model->has_log_ratio()) throw UnsupportedModel("analytic adversary needs a density ratio");
  return [div, model](Row y) { return analytic_adversary(div, *model, y); };
}

double dual_divergence_estimate(const FDivergence& div, const RatioModel& model,
                                const Dataset& data, const Adversary& lambda, Rng& rng,
                                const DualEstimateOptions& opts) {
  const std::size_t n = data.n();
  std::size_t m = opts.model_samples;
  if (m == 0) m = opts.footnote_regime ? n * n : n;
  if (opts.footnote_regime && m < n * n) {
    throw InvalidArgument("footnote regime needs at least n^2 model samples");
  }
  if (m < n) throw InvalidArgument("need at least n model samples");
  const ColumnSlice ys = data.layout().role("y");

  double model_term = 0.0;
  const std::size_t chunk = 1 << 16;
  for (std::size_t done = 0; done < m; done += chunk) {
    Dataset draws = model.sample(rng, std::min(chunk, m - done));
    for (std::size_t j = 0; j < draws.n(); ++j) model_term += lambda(draws.row(j));
  }
  model_term /= static_cast<double>(m);

  double data_term = 0.0;
  for (std::size_t i = 0; i < n; ++i) data_term += div.f_star(lambda(data.slice(i, ys)));
  data_term /= static_cast<double>(n);
  return model_term - data_term;
}

double gaussian_location_divergence(const FDivergence& div, double mu, double sigma) {
  const double width = 14.0 * std::max(1.0, sigma);
  const double lo = std::min(0.0, mu) - width, hi = std::max(0.0, mu) + width;
  auto integrand = [&](double y) {
    const double a = (y - mu) / sigma;
    const double log_ratio = -0.5 * a * a + 0.5 * y * y - std::log(sigma);
    const double phi = std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI);
    if (phi == 0.0) return 0.0;
    return div.f(std::exp(log_ratio)) * phi;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15,
                                                                        1e-12);
}

}  // namespace aest
