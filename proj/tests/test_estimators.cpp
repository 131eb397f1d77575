#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "aest/core/errors.hpp"
#include "aest/core/optimize.hpp"
#include "aest/core/rng.hpp"
#include "aest/estimators/estimators.hpp"

using namespace aest;

namespace {

Dataset make_data(const ColumnLayout& layout, const Eigen::MatrixXd& X) {
  std::vector<double> v(static_cast<std::size_t>(X.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      v[static_cast<std::size_t>(i * X.cols() + j)] = X(i, j);
    }
  }
  return Dataset(layout, std::move(v));
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Eigen::VectorXd random_vec(Rng& rng, Eigen::Index k, double sd = 1.0) {
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = sd * rng.normal();
  return v;
}

// Central-difference check of mean_grad, plus agreement of the per-row
// accumulators with mean_grad and of eval with mean.
void check_gradients(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& lambda, const Dataset& data, double tol = 1e-5) {
  Eigen::VectorXd gt, gl;
  loss.mean_grad(theta, lambda, data, &gt, &gl);
  auto fd = [&](const Eigen::VectorXd& x, bool wrt_theta) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h = 1e-5 * (1.0 + std::abs(x[j]));
      Eigen::VectorXd p = x, m = x;
      p[j] += h;
      m[j] -= h;
      const double fp = wrt_theta ? loss.mean(p, lambda, data) : loss.mean(theta, p, data);
      const double fm = wrt_theta ? loss.mean(m, lambda, data) : loss.mean(theta, m, data);
      g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
  };
  Eigen::VectorXd ft = fd(theta, true), fl = fd(lambda, false);
  CHECK((gt - ft).cwiseAbs().maxCoeff() <= tol * (1.0 + ft.cwiseAbs().maxCoeff()));
  CHECK((gl - fl).cwiseAbs().maxCoeff() <= tol * (1.0 + fl.cwiseAbs().maxCoeff()));

  Eigen::VectorXd rt = Eigen::VectorXd::Zero(theta.size()), rl = Eigen::VectorXd::Zero(lambda.size());
  double rv = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    loss.accumulate_grad_theta(theta, lambda, data.row(i), rt);
    loss.accumulate_grad_lambda(theta, lambda, data.row(i), rl);
    rv += loss.eval(theta, lambda, data.row(i));
  }
  const double n = static_cast<double>(data.n());
  CHECK((rt / n - gt).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + gt.cwiseAbs().maxCoeff()));
  CHECK((rl / n - gl).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + gl.cwiseAbs().maxCoeff()));
  CHECK(rv / n == doctest::Approx(loss.mean(theta, lambda, data)).epsilon(1e-12));
}

ColumnLayout y_layout(std::size_t k) {
  ColumnLayout l;
  l.add("y", k);
  return l;
}

Dataset gaussian_rows(const ColumnLayout& layout, std::size_t n, Rng& rng, double shift = 0.0) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layout.width()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = shift + rng.normal();
  }
  return make_data(layout, X);
}

const FDivergence kChi2 = FDivergence::named(DivergenceName::ChiSquared);
const FDivergence kKL = FDivergence::named(DivergenceName::KL);

}  // namespace

TEST_CASE("moment jacobians match central differences") {
  Rng rng(1);
  ColumnLayout layout;
  layout.add("y", 1).add("x", 2);
  Dataset data = gaussian_rows(layout, 5, rng);
  auto h = std::make_shared<Sieve>(SieveSpec::network("h", 2, 2, 4));
  std::vector<MomentPtr> ms = {std::make_shared<LinearIV>(layout),
                               std::make_shared<SieveResidualMoment>(layout, h)};
  for (const MomentPtr& m : ms) {
    Eigen::VectorXd th = random_vec(rng, static_cast<Eigen::Index>(m->theta_dim()), 0.5);
    for (std::size_t i = 0; i < data.n(); ++i) {
      Eigen::MatrixXd J = m->jacobian(th, data.row(i));
      Eigen::MatrixXd F = m->MomentFunction::jacobian(th, data.row(i));
      CHECK((J - F).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  MeanMoment mm(y_layout(3));
  Eigen::VectorXd y = vec({1, 2, 3});
  CHECK(mm.eval(vec({0.5, 0.5, 0.5}), Row(y.data(), 3)).isApprox(vec({0.5, 1.5, 2.5})));
}

TEST_CASE("gel loss examples") {
  ColumnLayout layout = y_layout(1);
  auto m = std::make_shared<MeanMoment>(layout);
  GelLoss chi(kChi2, m);
  Eigen::VectorXd y = vec({0.5});
  Row r(y.data(), 1);
  CHECK(chi.eval(vec({0.0}), vec({1.0}), r) == doctest::Approx(-0.5625));
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::ChiSquared,
                           DivergenceName::SquaredHellinger, DivergenceName::RescaledJS}) {
    GelLoss g(normalize(FDivergence::named(n)), m);
    CHECK(std::abs(g.eval(vec({0.3}), vec({0.0}), r)) < 1e-14);
  }
  // λ′m = 0 with f*(t) = e^{t−1}
  GelLoss kl(kKL, m);
  CHECK(kl.eval(vec({0.5}), vec({2.0}), r) == doctest::Approx(-std::exp(-1.0)));
  GelLoss tv(FDivergence::named(DivergenceName::TotalVariation), m);
  CHECK_THROWS_AS(tv.eval(vec({0.0}), vec({2.0}), r), DomainViolation);
}

TEST_CASE("cue objective examples and singular weighting") {
  ColumnLayout layout = y_layout(1);
  MeanMoment m(layout);
  const double s = std::sqrt(0.75);
  Dataset d1 = make_data(layout, vec({0.5 + s, 0.5 - s}));
  CHECK(cue_objective(m, vec({0.0}), d1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(gmm_lambda_star(m, vec({0.0}), d1)[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(cue_objective(m, vec({0.5}), d1)) < 1e-15);
  CHECK(gmm_lambda_star(m, vec({0.5}), d1).norm() < 1e-15);

  // dim 2 with 𝔼ₙ[m] = (0.3, 0.4) and 𝔼ₙ[mm′] = I
  ColumnLayout l2 = y_layout(2);
  MeanMoment m2(l2);
  Eigen::Vector2d a(0.3, 0.4);
  Eigen::Matrix2d S = (Eigen::Matrix2d::Identity() - a * a.transpose()).llt().matrixL();
  Eigen::MatrixXd rows(4, 2);
  rows.row(0) = (a + std::sqrt(2.0) * S.col(0)).transpose();
  rows.row(1) = (a - std::sqrt(2.0) * S.col(0)).transpose();
  rows.row(2) = (a + std::sqrt(2.0) * S.col(1)).transpose();
  rows.row(3) = (a - std::sqrt(2.0) * S.col(1)).transpose();
  Dataset d2 = make_data(l2, rows);
  CHECK(cue_objective(m2, Eigen::VectorXd::Zero(2), d2) == doctest::Approx(0.25).epsilon(1e-12));

  Dataset zeros = make_data(layout, vec({1.0, 1.0, 1.0}));
  CHECK_THROWS_AS(cue_objective(m, vec({1.0}), zeros), SingularMatrix);
  try {
    cue_objective(m, vec({1.0}), zeros);
  } catch (const SingularMatrix& e) {
    CHECK(e.kind() == SingularMatrix::Kind::Weighting);
  }
  CHECK(cue_objective(m, vec({1.0}), zeros, 1e-8) == 0.0);
  CHECK(auto_ridge(m, vec({0.0}), zeros) == doctest::Approx(1e-10));
}

TEST_CASE("gel at the gmm adversary reproduces the cue objective") {
  Rng rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t k = 1 + static_cast<std::size_t>(rep % 3);
    ColumnLayout layout = y_layout(k);
    auto m = std::make_shared<MeanMoment>(layout);
    Dataset data = gaussian_rows(layout, 200, rng, 0.2);
    Eigen::VectorXd th = random_vec(rng, static_cast<Eigen::Index>(k), 0.3);
    Eigen::VectorXd ls = gmm_lambda_star(*m, th, data);
    GelLoss cue = cue_loss(m);
    const double q = cue_objective(*m, th, data);
    CHECK(std::abs(cue.mean(th, ls, data) - q) <= 1e-12 * (1.0 + q));
    // Gradient ascent from zero lands on the same value.
    Objective neg = [&](const Eigen::VectorXd& l, Eigen::VectorXd* g) {
      if (g) {
        cue.mean_grad(th, l, data, nullptr, g);
        *g = -*g;
      }
      return -cue.mean(th, l, data);
    };
    MinimizeResult r = minimize(neg, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k)), {});
    CHECK(std::abs(-r.value - q) <= 1e-9);
    // Newton best response is the closed form.
    CHECK((cue.best_response(th, data, Eigen::VectorXd()) - ls).norm() <= 1e-9 * (1.0 + ls.norm()));
  }
}

TEST_CASE("gel gradients and exponential-tilting best response") {
  Rng rng(3);
  ColumnLayout layout;
  layout.add("y", 1).add("x", 2);
  Dataset data = gaussian_rows(layout, 40, rng);
  auto m = std::make_shared<LinearIV>(layout);
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::ChiSquared,
                           DivergenceName::SquaredHellinger}) {
    GelLoss g(normalize(FDivergence::named(n)), m);
    Eigen::VectorXd th = random_vec(rng, 2, 0.3);
    check_gradients(g, th, vec({0.1}), data);
    Eigen::VectorXd br = g.best_response(th, data, Eigen::VectorXd());
    Eigen::VectorXd gl;
    g.mean_grad(th, br, data, nullptr, &gl);
    CHECK(gl.norm() < 1e-9);
  }
}

TEST_CASE("cmr loss examples, gradients and adversary") {
  ColumnLayout layout;
  layout.add("y", 1).add("x", 1).add("z", 1);
  auto h = std::make_shared<Sieve>(SieveSpec::linear("h", 1, BasisKind::Polynomial, 0));
  auto lam = std::make_shared<Sieve>(SieveSpec::linear("l", 1, BasisKind::Polynomial, 0));
  auto m = std::make_shared<SieveResidualMoment>(layout, h);
  ConditionalDesign design;
  CmrLoss cmr(m, lam, design, layout);
  Eigen::VectorXd row = vec({1.0, 0.0, 0.0});
  Row r(row.data(), 3);
  CHECK(cmr.eval(vec({0.5}), vec({2.0}), r) == doctest::Approx(0.0));
  CHECK(cmr.eval(vec({0.5}), vec({0.0}), r) == 0.0);

  // Network adversary on z, linear IV moment.
  Rng rng(4);
  Dataset data = gaussian_rows(layout, 30, rng);
  auto iv = std::make_shared<LinearIV>(layout);
  auto net = std::make_shared<Sieve>(SieveSpec::network("l", 1, 2, 5));
  CmrLoss cn(iv, net, design, layout);
  check_gradients(cn, vec({0.4}), net->random_point(rng), data);
  CHECK_FALSE(cn.concave_in_lambda());
  auto wide = std::make_shared<Sieve>(SieveSpec::network("l", 1, 2, 5, Activation::Tanh, 2));
  CHECK_THROWS_AS(CmrLoss(iv, wide, design, layout), InvalidArgument);
}

TEST_CASE("cmr tabular adversary attains the conditional-mean objective") {
  // z ∈ {0,1,2}, y = z/2 + noise, m = y − θ.
  ColumnLayout layout;
  layout.add("y", 1).add("z", 1);
  Rng rng(5);
  const std::size_t n = 100000;
  Eigen::MatrixXd X(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(rng.index(3));
    X(static_cast<Eigen::Index>(i), 0) = 0.5 * z + rng.normal();
    X(static_cast<Eigen::Index>(i), 1) = z;
  }
  Dataset data = make_data(layout, X);
  auto m = std::make_shared<MeanMoment>(layout);
  SieveSpec ind = SieveSpec::linear("l", 1, BasisKind::Indicator, 0);
  ind.levels = {3};
  auto lam = std::make_shared<Sieve>(ind);
  ConditionalDesign design;
  design.cond_mean = [](const Eigen::VectorXd& th, Row z) { return vec({0.5 * z[0] - th[0]}); };
  CmrLoss cmr(m, lam, design, layout);
  const Eigen::VectorXd th = vec({0.3});
  Eigen::VectorXd c = cmr.best_response(th, data, Eigen::VectorXd());
  // per-bin identity: value = Σ p_b m̄_b², adversary = 2 m̄_b
  std::map<int, std::pair<double, double>> bins;
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = bins[static_cast<int>(X(static_cast<Eigen::Index>(i), 1))];
    b.first += X(static_cast<Eigen::Index>(i), 0) - 0.3;
    b.second += 1.0;
  }
  double ident = 0.0;
  for (auto& [z, b] : bins) {
    const double mean = b.first / b.second;
    CHECK(c[z] == doctest::Approx(2.0 * mean).epsilon(1e-10));
    ident += b.second / n * mean * mean;
  }
  const double v = cmr.mean(th, c, data);
  CHECK(v == doctest::Approx(ident).epsilon(1e-10));
  // population oracle 𝔼[𝔼[m|Z]²]
  double pop = 0.0;
  for (int z = 0; z < 3; ++z) {
    double zz = z;
    pop += std::pow(design.cond_mean(th, Row(&zz, 1))[0], 2) / 3.0;
  }
  CHECK(v == doctest::Approx(pop).epsilon(0.03));
}

TEST_CASE("conditional gel examples and nesting of unconditional gel") {
  ColumnLayout layout;
  layout.add("y", 1).add("z", 1);
  auto m = std::make_shared<MeanMoment>(layout);
  auto lam = std::make_shared<Sieve>(SieveSpec::linear("l", 1, BasisKind::Polynomial, 0));
  ConditionalGelLoss cg(kChi2, m, lam, {}, layout);
  Eigen::VectorXd row = vec({0.5, 3.0});
  Row r(row.data(), 2);
  CHECK(cg.eval(vec({0.0}), vec({1.0}), r) == doctest::Approx(-0.5625));
  CHECK(cg.eval(vec({0.0}), vec({0.0}), r) == 0.0);

  Rng rng(6);
  Dataset data = gaussian_rows(layout, 50, rng, 0.3);
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::ChiSquared}) {
    FDivergence div = normalize(FDivergence::named(n));
    ConditionalGelLoss c(div, m, lam, {}, layout);
    GelLoss g(div, m);
    Eigen::VectorXd th = vec({0.1}), la = vec({-0.4});
    CHECK(c.mean(th, la, data) == g.mean(th, la, data));
    Eigen::VectorXd ct, cl, gt, gl;
    c.mean_grad(th, la, data, &ct, &cl);
    g.mean_grad(th, la, data, &gt, &gl);
    CHECK((ct - gt).norm() < 1e-14);
    CHECK((cl - gl).norm() < 1e-14);
    CHECK((c.best_response(th, data, Eigen::VectorXd()) - g.best_response(th, data, Eigen::VectorXd()))
              .norm() < 1e-10);
  }

  // gradients with a polynomial adversary and a network adversary
  auto poly = std::make_shared<Sieve>(SieveSpec::linear("l", 1, BasisKind::Polynomial, 2));
  ConditionalGelLoss cp(normalize(kKL), m, poly, {}, layout);
  check_gradients(cp, vec({0.2}), vec({0.1, -0.2, 0.05}), data);
  Eigen::VectorXd br = cp.best_response(vec({0.2}), data, Eigen::VectorXd());
  Eigen::VectorXd gl;
  cp.mean_grad(vec({0.2}), br, data, nullptr, &gl);
  CHECK(gl.norm() < 1e-9);
  auto net = std::make_shared<Sieve>(SieveSpec::network("l", 1, 2, 4));
  ConditionalGelLoss cn(normalize(kChi2), m, net, {}, layout);
  check_gradients(cn, vec({0.2}), net->random_point(rng), data);
}

namespace {

struct Tabular {
  ColumnLayout layout;
  std::shared_ptr<Sieve> value, policy, adversary;
};

Tabular tabular(std::size_t S, std::size_t A) {
  Tabular t;
  t.layout.add("s", 1).add("a", 1).add("s_plus", 1);
  SieveSpec v = SieveSpec::linear("V", 1, BasisKind::Indicator, 0);
  v.levels = {static_cast<int>(S)};
  SieveSpec p = SieveSpec::linear("P", 1, BasisKind::Indicator, 0, A);
  p.levels = {static_cast<int>(S)};
  SieveSpec l = SieveSpec::linear("L", 2, BasisKind::Indicator, 0);
  l.levels = {static_cast<int>(S), static_cast<int>(A)};
  t.value = std::make_shared<Sieve>(v);
  t.policy = std::make_shared<Sieve>(p);
  t.adversary = std::make_shared<Sieve>(l);
  return t;
}

}  // namespace

TEST_CASE("sbeed loss examples") {
  Tabular t = tabular(2, 2);
  MDPBatch batch;
  batch.beta = 0.9;
  batch.num_actions = 2;
  batch.reward = [](Row, Row) { return 1.0; };
  SbeedLoss loss(batch, t.value, t.policy, t.adversary, t.layout);
  // V(0)=1, V(1)=2; logits at s=0 give log P(0|0) = −0.5.
  const double l0 = -0.5 - std::log(1.0 - std::exp(-0.5));
  Eigen::VectorXd theta(2 + 4);
  theta << 1.0, 2.0, l0, 0.0, 0.0, 0.0;  // policy coords: feature-major, (s, action)
  Eigen::VectorXd row = vec({0.0, 0.0, 1.0});
  Row r(row.data(), 3);
  CHECK(loss.log_policy(theta, r.subspan(0, 1), r.subspan(1, 1)) == doctest::Approx(-0.5));
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(4);
  CHECK(loss.eval(theta, lam, r) == doctest::Approx(1.8));
  CHECK(loss.residual(theta, r) == doctest::Approx(2.3));

  MDPBatch bad = batch;
  bad.beta = 1.0;
  CHECK_THROWS_AS(SbeedLoss(bad, t.value, t.policy, t.adversary, t.layout), InvalidArgument);
}

TEST_CASE("sbeed zero residual, tabular best response and cmr correspondence") {
  const std::size_t S = 3, A = 2;
  Tabular t = tabular(S, A);
  MDPBatch batch;
  batch.beta = 0.7;
  batch.num_actions = A;
  batch.reward = [](Row s, Row a) { return 0.3 * s[0] - 0.2 * a[0]; };
  SbeedLoss loss(batch, t.value, t.policy, t.adversary, t.layout);
  Rng rng(7);
  const std::size_t n = 400;
  Eigen::MatrixXd X(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    X.row(static_cast<Eigen::Index>(i)) << static_cast<double>(rng.index(S)),
        static_cast<double>(rng.index(A)), static_cast<double>(rng.index(S));
  }
  Dataset data = make_data(t.layout, X);
  Eigen::VectorXd theta = random_vec(rng, static_cast<Eigen::Index>(loss.theta_dim()), 0.5);
  check_gradients(loss, theta, random_vec(rng, static_cast<Eigen::Index>(loss.lambda_dim())), data);

  // Tabular inner max equals ½ Σ_c p_c r̄_c².
  Eigen::VectorXd c = loss.best_response(theta, data, Eigen::VectorXd());
  std::map<std::pair<int, int>, std::pair<double, double>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    auto& cell = cells[{static_cast<int>(X(static_cast<Eigen::Index>(i), 0)),
                        static_cast<int>(X(static_cast<Eigen::Index>(i), 1))}];
    cell.first += loss.residual(theta, data.row(i));
    cell.second += 1.0;
  }
  double half = 0.0;
  for (auto& [k, v] : cells) half += 0.5 * v.second / n * std::pow(v.first / v.second, 2);
  CHECK(loss.mean(theta, c, data) == doctest::Approx(half).epsilon(1e-10));

  // cmr with m = residual and adversary 2λ gives twice the sbeed loss.
  auto resid = std::make_shared<LambdaMoment>(
      1, loss.theta_dim(),
      [&loss](const Eigen::VectorXd& th, Row y) { return vec({loss.residual(th, y)}); });
  ColumnLayout cl = t.layout;
  cl.alias("sa", ColumnSlice{0, 2});
  ConditionalDesign d;
  d.z_role = "sa";
  CmrLoss cmr(resid, t.adversary, d, cl);
  Eigen::VectorXd lam = random_vec(rng, static_cast<Eigen::Index>(loss.lambda_dim()));
  Dataset aliased = make_data(cl, X);
  CHECK(cmr.mean(theta, 2.0 * lam, aliased) ==
        doctest::Approx(2.0 * loss.mean(theta, lam, data)).epsilon(1e-12));

  // Zero residuals: the adversary's best response is 0 and the value is 0.
  Eigen::VectorXd th0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(loss.theta_dim()));
  MDPBatch zb = batch;
  zb.reward = [](Row, Row) { return std::log(0.5); };  // uniform policy, V ≡ 0
  SbeedLoss zero(zb, t.value, t.policy, t.adversary, t.layout);
  Eigen::VectorXd cz = zero.best_response(th0, data, Eigen::VectorXd());
  CHECK(cz.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(zero.mean(th0, cz, data)) < 1e-15);
  CHECK(zero.mean(th0, lam, data) <= 0.0);
}

TEST_CASE("sbeed gaussian policy head gradients") {
  ColumnLayout layout;
  layout.add("s", 2).add("a", 1).add("s_plus", 2);
  auto value = std::make_shared<Sieve>(SieveSpec::network("V", 2, 2, 4));
  auto policy = std::make_shared<Sieve>(SieveSpec::linear("P", 2, BasisKind::Polynomial, 1, 2));
  auto adv = std::make_shared<Sieve>(SieveSpec::network("L", 3, 2, 4));
  MDPBatch batch;
  batch.beta = 0.9;
  batch.reward = [](Row s, Row a) { return s[0] - 0.1 * a[0] * a[0]; };
  SbeedLoss loss(batch, value, policy, adv, layout);
  Rng rng(8);
  Dataset data = gaussian_rows(layout, 25, rng);
  Eigen::VectorXd th = random_vec(rng, static_cast<Eigen::Index>(loss.theta_dim()), 0.3);
  check_gradients(loss, th, adv->random_point(rng), data);
}

namespace {

struct RieszSetup {
  ColumnLayout layout;
  Dataset data;
  std::shared_ptr<Sieve> theta, lambda;
};

RieszSetup riesz_setup(std::size_t n, int degree, std::uint64_t seed) {
  ColumnLayout layout;
  layout.add("y", 1).add("x", 1);
  Rng rng(seed);
  Eigen::MatrixXd X(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    X.row(static_cast<Eigen::Index>(i)) << std::sin(x) + x + 0.5 * rng.normal(), x;
  }
  RieszSetup s{layout, make_data(layout, X), nullptr, nullptr};
  s.theta = std::make_shared<Sieve>(SieveSpec::linear("th", 1, BasisKind::Polynomial, degree));
  s.lambda = std::make_shared<Sieve>(SieveSpec::linear("la", 1, BasisKind::Polynomial, degree));
  return s;
}

}  // namespace

TEST_CASE("riesz loss examples and linearity check") {
  RieszSetup s = riesz_setup(2000, 3, 9);
  RieszProblem mean{std::make_shared<MeanFunctional>(), "x", "y", "", nullptr};
  RieszLoss loss(mean, s.theta, s.lambda, s.layout);
  Eigen::VectorXd one = vec({1.0, 0.0, 0.0, 0.0});
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  for (std::size_t i = 0; i < 5; ++i) CHECK(loss.eval(one, zero, s.data.row(i)) == 0.0);
  // The representer of the mean is 1: the inner sup at θ ≡ 1 is 0.
  Eigen::VectorXd br = loss.best_response(one, s.data, Eigen::VectorXd());
  CHECK(br.norm() < 1e-10);
  CHECK(std::abs(loss.mean(one, br, s.data)) < 1e-12);

  RieszProblem deriv{std::make_shared<DerivativeFunctional>(), "x", "y", "", nullptr};
  RieszLoss dl(deriv, s.theta, s.lambda, s.layout);
  Rng rng(10);
  check_gradients(dl, random_vec(rng, 4, 0.3), random_vec(rng, 4, 0.3), s.data.head(50));
  auto net = std::make_shared<Sieve>(SieveSpec::network("la", 1, 2, 4));
  RieszLoss dn(deriv, s.theta, net, s.layout);
  check_gradients(dn, random_vec(rng, 4, 0.3), net->random_point(rng), s.data.head(50), 1e-4);

  auto squared = std::make_shared<CustomFunctional>(
      "squared", [](Row, Row x, const VecFn& g) { return Eigen::VectorXd(g(x).array().square()); });
  RieszProblem bad{squared, "x", "y", "", nullptr};
  CHECK_THROWS_AS(RieszLoss(bad, s.theta, s.lambda, s.layout), InvalidProblem);
  auto shifted = std::make_shared<CustomFunctional>(
      "shifted", [](Row, Row x, const VecFn& g) { return Eigen::VectorXd(g(x).array() + 1.0); });
  CHECK_THROWS_AS(RieszLoss(RieszProblem{shifted, "x", "y", "", nullptr}, s.theta, s.lambda, s.layout),
                  InvalidProblem);
  ColumnLayout two;
  two.add("y", 1).add("x", 2);
  CHECK_NOTHROW(check_linearity(AteFunctional(0), two, "x"));
}

TEST_CASE("riesz derivative representer matches the grid-integration oracle") {
  // x ~ N(0,1): oracle coefficients solve 𝔼[φφ′]c = 𝔼[φ′] on a fine grid.
  const int degree = 3;
  RieszSetup s = riesz_setup(40000, degree, 11);
  RieszProblem deriv{std::make_shared<DerivativeFunctional>(), "x", "y", "", nullptr};
  RieszLoss loss(deriv, s.theta, s.lambda, s.layout);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(degree + 1);
  const double dx = 1e-3;
  for (double x = -9.0; x <= 9.0; x += dx) {
    const double w = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) * dx;
    Eigen::VectorXd phi(degree + 1), dphi(degree + 1);
    for (int k = 0; k <= degree; ++k) {
      phi[k] = std::pow(x, k);
      dphi[k] = k == 0 ? 0.0 : k * std::pow(x, k - 1);
    }
    G += w * phi * phi.transpose();
    b += w * dphi;
  }
  Eigen::VectorXd oracle = G.ldlt().solve(b);
  CHECK(std::abs(oracle[1] - 1.0) < 1e-6);  // θ*(x) = x
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(degree + 1);
  Eigen::VectorXd est = loss.best_response(zero, s.data, Eigen::VectorXd());
  CHECK((est - oracle).cwiseAbs().maxCoeff() < 0.08);
  // inner sup at θ ≡ 0.3: ½𝔼[(x − 0.3)²] = 0.545
  Eigen::VectorXd th = zero;
  th[0] = 0.3;
  Eigen::VectorXd br = loss.best_response(th, s.data, Eigen::VectorXd());
  CHECK(loss.mean(th, br, s.data) == doctest::Approx(0.545).epsilon(0.05));
}

TEST_CASE("orthogonalized functional identities") {
  RieszSetup s = riesz_setup(500, 2, 12);
  RieszProblem mean{std::make_shared<MeanFunctional>(), "x", "y", "",
                    [](Row x) { return 0.8 * x[0] + 0.1; }};
  FunctionalEstimate e = orthogonalized_functional(mean, [](Row) { return 1.0; }, s.data);
  const double ybar = s.data.column_block("y").mean();
  CHECK(std::abs(e.estimate - ybar) < 1e-12);
  CHECK(e.se > 0.0);

  // noiseless outcome with a perfect first stage: correction vanishes
  ColumnLayout layout = s.layout;
  Eigen::MatrixXd X(300, 2);
  Rng rng(13);
  for (Eigen::Index i = 0; i < 300; ++i) {
    const double x = rng.normal();
    X.row(i) << x * x, x;
  }
  Dataset clean = make_data(layout, X);
  RieszProblem deriv{std::make_shared<DerivativeFunctional>(), "x", "y", "",
                     [](Row x) { return x[0] * x[0]; }};
  FunctionalEstimate d = orthogonalized_functional(deriv, [](Row x) { return 3.0 * x[0]; }, clean);
  CHECK(d.estimate == doctest::Approx(2.0 * clean.column_block("x").mean()).epsilon(1e-7));
}

TEST_CASE("fgan loss examples") {
  ColumnLayout layout = y_layout(1);
  auto family = std::make_shared<GaussianLocationFamily>(1);
  auto lin = std::make_shared<Sieve>(SieveSpec::linear("l", 1, BasisKind::Polynomial, 1));
  Rng rng(14);
  Dataset data = gaussian_rows(layout, 2000, rng);
  FganOptions o;
  o.model_samples = 500;
  FganLoss chi(kChi2, family, lin, layout, o);
  for (std::size_t i = 0; i < 5; ++i) CHECK(chi.eval(vec({0.7}), vec({0.0, 0.0}), data.row(i)) == 0.0);

  // KL with the analytic adversary λ*(y) = 1 − μ²/2 + μy.
  Dataset big = gaussian_rows(layout, 100000, rng);
  o.model_samples = 100000;
  FganLoss kl(kKL, family, lin, layout, o);
  CHECK(std::abs(kl.mean(vec({0.0}), vec({1.0, 0.0}), big)) < 1e-14);
  CHECK(kl.mean(vec({1.0}), vec({0.5, 1.0}), big) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("fgan gradients through the pushforward") {
  ColumnLayout layout = y_layout(2);
  auto family = std::make_shared<GaussianLocationFamily>(2);
  auto net = std::make_shared<Sieve>(SieveSpec::network("l", 2, 2, 5));
  Rng rng(15);
  Dataset data = gaussian_rows(layout, 60, rng);
  FganOptions o;
  o.model_samples = 80;
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::SquaredHellinger,
                           DivergenceName::TotalVariation, DivergenceName::RescaledJS}) {
    FganLoss loss(FDivergence::named(n), family, net, layout, o);
    Eigen::VectorXd th = vec({0.3, -0.2}), la = net->random_point(rng);
    check_gradients(loss, th, la, data);
    FganOptions fd = o;
    fd.reparameterized = false;
    FganLoss plain(FDivergence::named(n), family, net, layout, fd);
    Eigen::VectorXd g1, g2;
    loss.mean_grad(th, la, data, &g1, nullptr);
    plain.mean_grad(th, la, data, &g2, nullptr);
    CHECK((g1 - g2).norm() < 1e-6);
  }
}
