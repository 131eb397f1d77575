#include "aest/harness/dgp.hpp"

#include <cmath>

#include "aest/core/errors.hpp"
#include "aest/core/rng.hpp"
#include "aest/harness/config.hpp"

namespace aest {

double DGPSpec::get(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

DGPSpec DGPSpec::from_config(const Config& cfg) {
  DGPSpec s;
  s.name = cfg.str("dgp.name");
  for (const auto& k : cfg.keys("dgp")) {
    if (k != "name") s.params[k] = cfg.real("dgp." + k);
  }
  return s;
}

Quadrature normal_quadrature(int k) {
  if (k < 1) throw InvalidArgument("quadrature needs at least one node");
  // Golub–Welsch for the probabilists' Hermite weight.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k, k);
  for (int i = 1; i < k; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Quadrature q;
  q.nodes = es.eigenvalues();
  q.weights = es.eigenvectors().row(0).transpose().array().square();
  q.weights /= q.weights.sum();
  return q;
}

std::unique_ptr<Dgp> make_dgp(const DGPSpec& s) {
  if (s.name == "gaussian_location") {
    return std::make_unique<GaussianLocationDgp>(s.get("mu", 0.0), s.get("sigma", 1.0),
                                                 static_cast<std::size_t>(s.get("dim", 1)));
  }
  if (s.name == "unconditional_moment") {
    return std::make_unique<UnconditionalMomentDgp>(
        s.get("theta", 0.5), static_cast<std::size_t>(s.get("dim", 3)), s.get("rho", 0.3));
  }
  if (s.name == "linear_iv_heteroskedastic") {
    return std::make_unique<LinearIvDgp>(s.get("theta", 1.0), s.get("hetero", 1.0) != 0.0,
                                         s.get("endog", 0.5), s.get("pi", 1.0));
  }
  if (s.name == "nonparam_iv") {
    return std::make_unique<NonparamIvDgp>(
        s.get("rho", 0.8), s.get("endog", 0.5),
        Eigen::Vector3d(s.get("a0", 0.5), s.get("a1", 1.0), s.get("a2", -0.5)));
  }
  if (s.name == "tabular_mdp") {
    return std::make_unique<TabularMdpDgp>(static_cast<int>(s.get("states", 5)),
                                           static_cast<int>(s.get("actions", 3)),
                                           s.get("beta", 0.6),
                                           static_cast<std::uint64_t>(s.get("mdp_seed", 7)));
  }
  if (s.name == "riesz_mean" || s.name == "riesz_derivative") {
    return std::make_unique<RieszDgp>(s.name == "riesz_derivative", s.get("noise", 1.0));
  }
  throw InvalidArgument("unknown design '" + s.name + "'");
}

namespace {

Dataset from_matrix(const ColumnLayout& layout, const Eigen::MatrixXd& X) {
  std::vector<double> v(static_cast<std::size_t>(X.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) v[static_cast<std::size_t>(i * X.cols() + j)] = X(i, j);
  }
  return Dataset(layout, std::move(v));
}

void require_rows(std::size_t n) {
  if (n < 1) throw InvalidArgument("need at least one observation");
}

}  // namespace

GaussianLocationDgp::GaussianLocationDgp(double mu, double sigma, std::size_t dim)
    : mu_(mu), sigma_(sigma), dim_(dim) {
  if (!(sigma > 0.0) || dim < 1) throw InvalidArgument("gaussian_location needs sigma > 0, dim ≥ 1");
}

ColumnLayout GaussianLocationDgp::layout() const { return ColumnLayout().add("y", dim_); }

Dataset GaussianLocationDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal(mu_, sigma_);
  }
  return from_matrix(layout(), X);
}

UnconditionalMomentDgp::UnconditionalMomentDgp(double theta, std::size_t dim, double rho)
    : theta_(theta), dim_(dim) {
  if (dim < 1 || !(rho > -1.0 / static_cast<double>(std::max<std::size_t>(dim, 2) - 1) && rho < 1.0)) {
    throw InvalidArgument("unconditional_moment needs dim ≥ 1 and a valid correlation");
  }
  const auto k = static_cast<Eigen::Index>(dim);
  cov_.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      cov_(i, j) = (1.0 + 0.5 * i) * (1.0 + 0.5 * j) * (i == j ? 1.0 : rho);
    }
  }
  chol_ = cov_.llt().matrixL();
}

ColumnLayout UnconditionalMomentDgp::layout() const { return ColumnLayout().add("y", dim_); }

Dataset UnconditionalMomentDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  const auto k = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), k);
  Eigen::VectorXd e(k);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) e[j] = rng.normal();
    X.row(i) = (Eigen::VectorXd::Constant(k, theta_) + chol_ * e).transpose();
  }
  return from_matrix(layout(), X);
}

LinearIvDgp::LinearIvDgp(double theta, bool hetero, double endog, double pi)
    : theta_(theta), hetero_(hetero), endog_(endog), pi_(pi) {
  if (std::abs(endog) >= 1.0) throw InvalidArgument("linear_iv endogeneity must lie in (−1, 1)");
}

ColumnLayout LinearIvDgp::layout() const { return ColumnLayout().add("y", 1).add("x", 1).add("z", 1); }

Dataset LinearIvDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  const double c = std::sqrt(1.0 - endog_ * endog_);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double z = rng.normal(), v = rng.normal(), eta = rng.normal();
    const double x = pi_ * z + v;
    const double e = cond_sd(z) * (endog_ * v + c * eta);
    X.row(i) << theta_ * x + e, x, z;
  }
  return from_matrix(layout(), X);
}

ConditionalDesign LinearIvDgp::design() const {
  ConditionalDesign d;
  const double th0 = theta_, pi = pi_, k = endog_;
  const bool het = hetero_;
  auto sd = [het](double z) { return het ? std::sqrt(1.0 + z * z) : 1.0; };
  d.cond_mean = [th0, pi](const Eigen::VectorXd& th, Row z) {
    return Eigen::VectorXd::Constant(1, (th0 - th[0]) * pi * z[0]);
  };
  d.cond_jacobian = [pi](const Eigen::VectorXd&, Row z) {
    return Eigen::MatrixXd::Constant(1, 1, -pi * z[0]);
  };
  d.cond_var = [th0, pi, k, sd](const Eigen::VectorXd& th, Row z) {
    const double dd = th0 - th[0], s = sd(z[0]);
    return Eigen::MatrixXd::Constant(
        1, 1, dd * dd * (pi * pi * z[0] * z[0] + 1.0) + 2.0 * dd * s * k + s * s);
  };
  return d;
}

NonparamIvDgp::NonparamIvDgp(double rho, double endog, Eigen::Vector3d coeffs)
    : rho_(rho), endog_(endog), coeffs_(coeffs), q_(normal_quadrature(24)) {
  if (!(std::abs(rho) > 0.0 && std::abs(rho) < 1.0) || std::abs(endog) >= 1.0) {
    throw InvalidArgument("nonparam_iv needs 0 < |rho| < 1 and |endog| < 1");
  }
}

ColumnLayout NonparamIvDgp::layout() const { return ColumnLayout().add("y", 1).add("x", 1).add("z", 1); }

Dataset NonparamIvDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  const double s = std::sqrt(1.0 - rho_ * rho_), c = std::sqrt(1.0 - endog_ * endog_);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double z = rng.normal(), u = rng.normal(), eta = rng.normal();
    const double x = rho_ * z + s * u;
    X.row(i) << g_star(x) + endog_ * u + c * eta, x, z;
  }
  return from_matrix(layout(), X);
}

double NonparamIvDgp::cond_mean(const std::function<double(double)>& h, double z) const {
  const double s = std::sqrt(1.0 - rho_ * rho_);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q_.nodes.size(); ++i) acc += q_.weights[i] * h(rho_ * z + s * q_.nodes[i]);
  return acc;
}

double NonparamIvDgp::criterion(const std::function<double(double)>& h) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q_.nodes.size(); ++i) {
    const double r = cond_mean([&](double x) { return g_star(x) - h(x); }, q_.nodes[i]);
    acc += q_.weights[i] * r * r;
  }
  return acc;
}

TabularMdpDgp::TabularMdpDgp(int states, int actions, double beta, std::uint64_t mdp_seed)
    : S_(states), A_(actions), beta_(beta) {
  if (states < 1 || actions < 1 || !(beta >= 0.0 && beta < 1.0)) {
    throw InvalidArgument("tabular_mdp needs states, actions ≥ 1 and beta ∈ [0,1)");
  }
  Rng rng(mdp_seed);
  R_.resize(S_, A_);
  for (int s = 0; s < S_; ++s) {
    for (int a = 0; a < A_; ++a) R_(s, a) = rng.uniform();
  }
  P_.resize(static_cast<std::size_t>(S_ * A_));
  for (auto& p : P_) {
    p.resize(S_);
    for (int sp = 0; sp < S_; ++sp) {
      const double u = rng.uniform();
      p[sp] = u * u + 0.05;
    }
    p /= p.sum();
  }
  v_star_ = soft_value_iteration(R_, P_, beta_, 1e-14);
}

Eigen::VectorXd TabularMdpDgp::soft_value_iteration(const Eigen::MatrixXd& R,
                                                    const std::vector<Eigen::VectorXd>& P,
                                                    double beta, double tol, double* residual) {
  const Eigen::Index S = R.rows(), A = R.cols();
  Eigen::VectorXd V = Eigen::VectorXd::Zero(S), next(S);
  double change = 0.0;
  for (int it = 0; it < 100000; ++it) {
    for (Eigen::Index s = 0; s < S; ++s) {
      Eigen::VectorXd q(A);
      for (Eigen::Index a = 0; a < A; ++a) q[a] = R(s, a) + beta * P[static_cast<std::size_t>(s * A + a)].dot(V);
      const double m = q.maxCoeff();
      next[s] = m + std::log((q.array() - m).exp().sum());
    }
    change = (next - V).lpNorm<Eigen::Infinity>();
    V = next;
    if (change <= tol) break;
  }
  if (residual) *residual = change;
  return V;
}

double TabularMdpDgp::bellman_residual(const Eigen::VectorXd& V) const {
  double worst = 0.0;
  for (int s = 0; s < S_; ++s) {
    Eigen::VectorXd q(A_);
    for (int a = 0; a < A_; ++a) q[a] = R_(s, a) + beta_ * P_[static_cast<std::size_t>(s * A_ + a)].dot(V);
    const double m = q.maxCoeff();
    worst = std::max(worst, std::abs(m + std::log((q.array() - m).exp().sum()) - V[s]));
  }
  return worst;
}

double TabularMdpDgp::log_policy_star(int s, int a) const {
  return R_(s, a) + beta_ * P_[static_cast<std::size_t>(s * A_ + a)].dot(v_star_) - v_star_[s];
}

ColumnLayout TabularMdpDgp::layout() const {
  return ColumnLayout().add("s", 1).add("a", 1).add("s_plus", 1);
}

Dataset TabularMdpDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int s = static_cast<int>(rng.index(static_cast<std::size_t>(S_)));
    const int a = static_cast<int>(rng.index(static_cast<std::size_t>(A_)));
    const Eigen::VectorXd& p = P_[static_cast<std::size_t>(s * A_ + a)];
    double u = rng.uniform(), acc = 0.0;
    int sp = S_ - 1;
    for (int k = 0; k < S_; ++k) {
      acc += p[k];
      if (u < acc) {
        sp = k;
        break;
      }
    }
    X.row(i) << s, a, sp;
  }
  return from_matrix(layout(), X);
}

RieszDgp::RieszDgp(bool derivative, double noise) : derivative_(derivative), noise_(noise) {
  if (!(noise >= 0.0)) throw InvalidArgument("riesz noise must be nonnegative");
}

ColumnLayout RieszDgp::layout() const { return ColumnLayout().add("x", 1).add("y", 1); }

Dataset RieszDgp::generate(std::size_t n, std::uint64_t seed) const {
  require_rows(n);
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double x = rng.normal();
    X.row(i) << x, g(x) + noise_ * rng.normal();
  }
  return from_matrix(layout(), X);
}

Eigen::VectorXd RieszDgp::theta_star() const {
  // 𝔼 sin x = 0, 𝔼 cos x = e^{−1/2} for x ~ N(0,1).
  return Eigen::VectorXd::Constant(1, derivative_ ? 1.0 + std::exp(-0.5) : 1.0);
}

}  // namespace aest
