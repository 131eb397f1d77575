#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include "aest/core/box_space.hpp"
#include "aest/core/errors.hpp"
#include "aest/core/toy_losses.hpp"
#include "aest/estimators/estimators.hpp"
#include "aest/inference/inference.hpp"
#include "aest/solvers/solver.hpp"
#include "support.hpp"

using namespace aest;
using namespace aest::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

double normal_expectation(const std::function<double(double)>& g) {
  boost::math::quadrature::sinh_sinh<double> q;
  return q.integrate([&](double z) {
    if (std::abs(z) > 40.0) return 0.0;
    return g(z) * std::exp(-0.5 * z * z) / std::sqrt(2 * kPi); });
}

// Trapezoid nodes for Z ~ N(0,1).
void normal_nodes(Eigen::MatrixXd& nodes, Eigen::VectorXd& w) {
  const int k = 4001;
  nodes.resize(k, 1);
  w.resize(k);
  for (int i = 0; i < k; ++i) {
    const double z = -12.0 + 24.0 * i / (k - 1);
    nodes(i, 0) = z;
    w[i] = std::exp(-0.5 * z * z);
  }
  w /= w.sum();
}

Dataset mean_data(std::size_t n, double mu, double sd, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, 0) = rng.normal(mu, sd);
  return make_data(ColumnLayout().add("y", 1), X);
}

// y = θ* x + e, x = z + v, Var(e|z) = σ²(z).
Dataset iv_data(std::size_t n, double theta, bool hetero, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double z = rng.normal();
    const double x = z + rng.normal();
    const double s = hetero ? std::sqrt(1.0 + z * z) : 1.0;
    X.row(i) << theta * x + s * rng.normal(), x, z;
  }
  return make_data(ColumnLayout().add("y", 1).add("x", 1).add("z", 1), X);
}

ConditionalDesign iv_design(bool hetero) {
  ConditionalDesign d;
  d.cond_jacobian = [](const Eigen::VectorXd&, Row z) {
    Eigen::MatrixXd D(1, 1);
    D(0, 0) = -z[0];
    return D;
  };
  d.cond_var = [hetero](const Eigen::VectorXd&, Row z) {
    Eigen::MatrixXd O(1, 1);
    O(0, 0) = hetero ? 1.0 + z[0] * z[0] : 1.0;
    return O;
  };
  return d;
}

}  // namespace

TEST_CASE("pathwise derivative examples") {
  Eigen::Matrix2d A;
  A << 2.0, 0.5, 0.5, 1.0;
  ScalarFunctional q = [&](const Eigen::VectorXd& t) { return t.dot(A * t); };
  Eigen::VectorXd th = vec({0.3, -1.2});
  const double exact = 2.0 * (A * th)[0];
  CHECK(std::abs(pathwise_derivative(q, th, vec({1.0, 0.0})) - exact) <= 1e-7);
  CHECK(std::abs(pathwise_derivative(q, th, vec({1.0, 0.0}), 0.1, true) - exact) <= 1e-12);
  CHECK(pathwise_derivative(q, th, vec({0.0, 0.0})) == 0.0);
  ScalarFunctional lin = [](const Eigen::VectorXd& t) { return 3.0 * t[0] - 2.0 * t[1] + 1.0; };
  for (double h : {1e-3, 0.5, 7.0}) {
    CHECK(pathwise_derivative(lin, th, vec({1.0, 1.0}), h) == doctest::Approx(1.0).epsilon(1e-12));
  }
  ScalarFunctional bad = [](const Eigen::VectorXd& t) { return std::log(t[0]); };
  CHECK_THROWS_AS(pathwise_derivative(bad, vec({0.0}), vec({1.0})), NumericalFailure);
  // Richardson removes the h² term of a cubic.
  ScalarFunctional cub = [](const Eigen::VectorXd& t) { return std::pow(t[0], 3); };
  const double plain = pathwise_derivative(cub, vec({1.0}), vec({1.0}), 0.1);
  const double rich = pathwise_derivative(cub, vec({1.0}), vec({1.0}), 0.1, true);
  CHECK(std::abs(rich - 3.0) < 1e-12);
  CHECK(std::abs(plain - 3.0) > 1e-3);
}

TEST_CASE("inner product of the cue mean model is 2/s²") {
  Dataset data = mean_data(300, 1.0, 2.0, 3);
  Eigen::VectorXd y = data.column_block("y").col(0);
  const double ybar = y.mean();
  const double s2 = (y.array() - ybar).square().mean();
  GelLoss loss = cue_loss(std::make_shared<MeanMoment>(data.layout()));
  InnerProduct ip = inner_product_matrix(loss, vec({ybar}), data, Eigen::MatrixXd::Identity(1, 1));
  CHECK(ip.M(0, 0) == doctest::Approx(2.0 / s2).epsilon(1e-6));
  CHECK_FALSE(ip.indefinite);
  // Far from the optimum the concentrated objective is concave.
  InnerProduct far =
      inner_product_matrix(loss, vec({ybar + 3.0 * std::sqrt(s2)}), data, Eigen::MatrixXd::Identity(1, 1));
  CHECK(far.indefinite);
}

TEST_CASE("inner product of the quadratic toy is its exact Hessian") {
  QuadraticSaddleLoss loss(1.5, 0.2, 0.8, 2.0);
  InnerProduct ip = inner_product_matrix(loss, vec({0.4}), dummy_data(), Eigen::MatrixXd::Identity(1, 1));
  CHECK(ip.M(0, 0) == doctest::Approx(2 * 1.5 + 0.8 * 0.8 / (2 * 2.0)).epsilon(1e-7));
}

TEST_CASE("cmr tabular inner product equals twice the binned squared conditional jacobian") {
  Rng rng(21);
  const Eigen::Index n = 60000;
  Eigen::MatrixXd X(n, 3);
  const double px[3] = {-1.0, 0.5, 2.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int z = static_cast<int>(rng.index(3));
    const double x = px[z] + rng.normal();
    X.row(i) << 0.7 * x + rng.normal(), x, static_cast<double>(z);
  }
  ColumnLayout layout = ColumnLayout().add("y", 1).add("x", 1).add("z", 1);
  Dataset data = make_data(layout, X);
  SieveSpec ind = SieveSpec::linear("l", 1, BasisKind::Indicator, 0);
  ind.levels = {3};
  CmrLoss loss(std::make_shared<LinearIV>(layout), std::make_shared<Sieve>(ind), {}, layout);
  InnerProduct ip = inner_product_matrix(loss, vec({0.7}), data, Eigen::MatrixXd::Identity(1, 1));
  double sample = 0.0, pop = 0.0;
  for (int z = 0; z < 3; ++z) {
    double s = 0.0, c = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (X(i, 2) == z) {
        s += X(i, 1);
        c += 1.0;
      }
    }
    sample += 2.0 * (c / n) * (s / c) * (s / c);
    pop += 2.0 / 3.0 * px[z] * px[z];
  }
  CHECK(ip.M(0, 0) == doctest::Approx(sample).epsilon(1e-6));
  CHECK(ip.M(0, 0) == doctest::Approx(pop).epsilon(0.03));
}

TEST_CASE("variance of the cue mean model tends to σ²") {
  const double sigma = 1.7;
  Dataset data = mean_data(20000, -0.5, sigma, 8);
  Eigen::VectorXd y = data.column_block("y").col(0);
  GelLoss loss = cue_loss(std::make_shared<MeanMoment>(data.layout()));
  Eigen::VectorXd th = vec({y.mean()});
  Eigen::VectorXd la = loss.best_response(th, data, vec({0.0}));
  VarianceReport rep = variance_estimate(loss, th, la, data, vec({1.0}));
  const double s2 = (y.array() - y.mean()).square().sum() / (y.size() - 1);
  CHECK(rep.V_hat == doctest::Approx(s2).epsilon(1e-4));
  CHECK(rep.V_hat == doctest::Approx(sigma * sigma).epsilon(0.05));
  CHECK(rep.lo < rep.estimate);
  CHECK(rep.hi > rep.estimate);
  CHECK(rep.hi - rep.lo == doctest::Approx(2 * 1.959963985 * std::sqrt(rep.V_hat / 20000)).epsilon(1e-8));

  VarianceReport zero = variance_estimate(loss, th, la, data, vec({0.0}));
  CHECK(zero.V_hat == 0.0);
  CHECK(zero.lo == zero.estimate);

  VarianceReport wide = variance_estimate(loss, th, la, data, vec({1.0}), 1.0);
  CHECK(std::isinf(wide.hi));
}

TEST_CASE("variance is invariant to row order and to duplication") {
  Dataset data = mean_data(400, 0.3, 1.0, 10);
  GelLoss loss = cue_loss(std::make_shared<MeanMoment>(data.layout()));
  Eigen::VectorXd th = vec({data.column_block("y").mean()});
  Eigen::VectorXd la = loss.best_response(th, data, vec({0.0}));
  const double v = variance_estimate(loss, th, la, data, vec({1.0})).V_hat;
  std::vector<std::size_t> order(400);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = (i * 37) % 400;
  Dataset perm = data.permuted(order);
  CHECK(variance_estimate(loss, th, la, perm, vec({1.0})).V_hat == doctest::Approx(v).epsilon(1e-8));
  Dataset twice = data.repeated(2);
  VarianceReport d = variance_estimate(loss, th, la, twice, vec({1.0}));
  // n−1 convention: V(2n rows) = V·2(n−1)/(2n−1)
  CHECK(d.V_hat == doctest::Approx(v * 2.0 * 399.0 / 799.0).epsilon(1e-6));
}

TEST_CASE("singular information is reported") {
  BilinearLoss loss;  // concentrated objective has no curvature at the default best response
  Dataset data = dummy_data();
  Dataset two(ColumnLayout().add("y", 1), {0.0, 1.0});
  CHECK_THROWS_AS(variance_estimate(loss, vec({0.0}), vec({0.0}), two, vec({1.0})), std::exception);
  try {
    // Flat in θ with an exact best response: M = 0.
    QuadraticSaddleLoss flat(0.0, 0.0, 0.0, 1.0);
    variance_estimate(flat, vec({0.0}), vec({0.0}), two, vec({1.0}));
    FAIL("expected singular information");
  } catch (const SingularMatrix& e) {
    CHECK(e.kind() == SingularMatrix::Kind::Information);
  }
}

TEST_CASE("cmr variance matches the sandwich on the heteroskedastic IV design") {
  ColumnLayout layout = ColumnLayout().add("y", 1).add("x", 1).add("z", 1);
  Dataset data = iv_data(40000, 1.0, true, 4);
  auto lam = std::make_shared<Sieve>(SieveSpec::linear("l", 1, BasisKind::Polynomial, 1));
  CmrLoss loss(std::make_shared<LinearIV>(layout), lam, iv_design(true), layout);
  BoxSpace ts = BoxSpace::cube("theta", 1, 5.0), ls = BoxSpace::cube("lambda", 2, 50.0);
  SolverConfig cfg;
  cfg.certify = false;
  NashSolution s = solve(loss, ts, ls, data, cfg);
  VarianceReport rep =
      variance_estimate(loss, s.theta_hat.coords, s.lambda_hat.coords, data, vec({1.0}));
  Eigen::MatrixXd nodes;
  Eigen::VectorXd w;
  normal_nodes(nodes, w);
  CmrVariances v = cmr_variance_formulas(iv_design(true), vec({1.0}), nodes, w);
  // D = −z, Ω = 1+z²: M̃ = 𝔼z² = 1, S = 𝔼[z²(1+z²)] = 4
  CHECK(v.V_sandwich(0, 0) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(rep.V_hat == doctest::Approx(v.V_sandwich(0, 0)).epsilon(0.08));
}

TEST_CASE("conditional-moment variance formulas against quadrature oracles") {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd w;
  normal_nodes(nodes, w);
  CmrVariances het = cmr_variance_formulas(iv_design(true), vec({1.0}), nodes, w);
  const double ez2 = normal_expectation([](double z) { return z * z; });
  const double s = normal_expectation([](double z) { return z * z * (1 + z * z); });
  const double star = 1.0 / normal_expectation([](double z) { return z * z / (1 + z * z); });
  CHECK(het.V_sandwich(0, 0) == doctest::Approx(s / (ez2 * ez2)).epsilon(1e-9));
  CHECK(het.V_star(0, 0) == doctest::Approx(star).epsilon(1e-9));
  CHECK(het.V_literal(0, 0) == doctest::Approx(1.0 / s).epsilon(1e-9));
  CHECK(het.V_sandwich(0, 0) >= het.V_star(0, 0));

  CmrVariances hom = cmr_variance_formulas(iv_design(false), vec({1.0}), nodes, w);
  CHECK(hom.V_sandwich(0, 0) == doctest::Approx(1.0 / ez2).epsilon(1e-9));
  CHECK(hom.V_star(0, 0) == doctest::Approx(1.0 / ez2).epsilon(1e-9));
  CHECK(hom.V_literal(0, 0) == doctest::Approx(1.0 / ez2).epsilon(1e-9));

  // Constant Z: D = −c, Ω = s². Sandwich and efficient variance equal the
  // unconditional GMM variance s²/c²; the literal formula gives 1/(c²s²).
  ConditionalDesign flat;
  const double c = 1.5, s2 = 2.5;
  flat.cond_jacobian = [c](const Eigen::VectorXd&, Row) { return Eigen::MatrixXd::Constant(1, 1, -c); };
  flat.cond_var = [s2](const Eigen::VectorXd&, Row) { return Eigen::MatrixXd::Constant(1, 1, s2); };
  Eigen::MatrixXd one = Eigen::MatrixXd::Zero(1, 1);
  CmrVariances f = cmr_variance_formulas(flat, vec({0.0}), one, vec({1.0}));
  CHECK(f.V_sandwich(0, 0) == doctest::Approx(s2 / (c * c)));
  CHECK(f.V_star(0, 0) == doctest::Approx(s2 / (c * c)));
  CHECK(f.V_literal(0, 0) == doctest::Approx(1.0 / (c * c * s2)));

  flat.cond_var = [](const Eigen::VectorXd&, Row) { return Eigen::MatrixXd::Zero(1, 1); };
  try {
    cmr_variance_formulas(flat, vec({0.0}), one, vec({1.0}));
    FAIL("expected singular design");
  } catch (const SingularMatrix& e) {
    CHECK(e.kind() == SingularMatrix::Kind::Design);
  }
}

TEST_CASE("orthogonality check: bilinear control, cue at the saddle, perturbed adversary") {
  BilinearLoss bil;
  const double b = neyman_orthogonality_check(bil, vec({0.0}), vec({0.0}), dummy_data(),
                                               {{vec({1.0}), {}}});
  CHECK(b == doctest::Approx(1.0).epsilon(1e-8));

  // CUE location model with the population adversary map.
  const double mu = 0.5, sigma = 1.0;
  AdversaryMap pop = [&](const Eigen::VectorXd& th) {
    const double d = mu - th[0];
    return vec({-2.0 * d / (sigma * sigma + d * d)});
  };
  std::vector<AffinePerturbation> dirs = {{vec({1.0}), {}}, {vec({0.0}), Eigen::MatrixXd::Ones(1, 1)}};
  auto at = [&](std::size_t n, std::uint64_t seed, double shift) {
    Dataset data = mean_data(n, mu, sigma, seed);
    GelLoss loss = cue_loss(std::make_shared<MeanMoment>(data.layout()));
    Eigen::VectorXd th = vec({data.column_block("y").mean()});
    Eigen::VectorXd la = loss.best_response(th, data, vec({0.0}));
    la[0] += shift;
    return neyman_orthogonality_check(loss, th, la, data, dirs, pop);
  };
  std::vector<double> small, large;
  for (std::uint64_t s = 0; s < 20; ++s) {
    small.push_back(at(500, s, 0.0));
    large.push_back(at(8000, 100 + s, 0.0));
  }
  std::nth_element(small.begin(), small.begin() + 10, small.end());
  std::nth_element(large.begin(), large.begin() + 10, large.end());
  CHECK(small[10] < 0.2);
  CHECK(large[10] < small[10] / 2.0);
  CHECK(at(8000, 7, 1.0) > 0.3);
  CHECK_THROWS_AS(neyman_orthogonality_check(bil, vec({0.0}), vec({0.0}), dummy_data(), {}),
                  InvalidArgument);
}
