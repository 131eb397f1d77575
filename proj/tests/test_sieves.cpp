#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "aest/core/errors.hpp"
#include "aest/sieves/sieve.hpp"

using namespace aest;

namespace {

Row as_row(const Eigen::VectorXd& v) { return Row(v.data(), static_cast<std::size_t>(v.size())); }

double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

Eigen::VectorXd fd_grad(const Sieve& s, const Eigen::VectorXd& c, Row x, const Eigen::VectorXd& up) {
  Eigen::VectorXd g(c.size());
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    Eigen::VectorXd p = c, m = c;
    p[k] += h;
    m[k] -= h;
    g[k] = (up.dot(s.eval(p, x)) - up.dot(s.eval(m, x))) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("width schedule examples") {
  GrowthSchedule s{2.0, 1.0, 1.0, 1.0};
  CHECK(width_for_n(s, 64) == 8);
  CHECK(width_for_n(s, 1) == 1);
  GrowthSchedule t{1.0, 1.0, 1.0, 2.0};
  CHECK(width_for_n(t, 1000) == 20);
  std::size_t prev = 0;
  for (std::size_t n = 1; n < 20000; n += 37) {
    CHECK(width_for_n(t, n) >= prev);
    prev = width_for_n(t, n);
  }
  CHECK_THROWS_AS((GrowthSchedule{0.5, 2.0, 1.0, 1.0}.validate()), InvalidArgument);
}

TEST_CASE("network forward examples") {
  SieveSpec spec = SieveSpec::network("net", 1, 2, 1, Activation::Relu);
  Sieve net(spec);
  REQUIRE(net.dim() == 4);
  Eigen::VectorXd c(4);
  c << 1.0, -1.0, 1.0, 0.0;  // A1=[[1]], b1=[-1], A2=[[1]], b2=[0]
  double x2 = 2.0, x0 = 0.0;
  CHECK(net.eval_scalar(c, Row(&x2, 1)) == doctest::Approx(1.0));
  CHECK(net.eval_scalar(Eigen::VectorXd::Zero(4), Row(&x2, 1)) == 0.0);

  SieveSpec ts = SieveSpec::network("tnet", 1, 2, 1, Activation::Tanh);
  ts.output_clip = 3.0;
  Sieve tnet(ts);
  Eigen::VectorXd tc(4);
  tc << 1.0, 0.0, 1.0, 0.0;
  CHECK(tnet.eval_scalar(tc, Row(&x0, 1)) == 0.0);
  CHECK(tnet.eval_scalar(Eigen::VectorXd::Zero(4), Row(&x2, 1)) == 0.0);
  CHECK_THROWS_AS(tnet.eval(tc, Row()), InvalidArgument);
}

TEST_CASE("network architecture respects W and D") {
  SieveSpec spec = SieveSpec::network("net", 3, 3, 16);
  spec.max_nonzero = 200;
  Sieve net(spec);
  CHECK(net.dim() <= 200);
  CHECK(net.effective_width() >= 3);
  CHECK(net.dim() == network_param_count(3, net.effective_width(), 3, 1));
  SieveSpec tight = SieveSpec::network("net", 3, 3, 16);
  tight.max_nonzero = 20;
  CHECK_THROWS_AS(Sieve{tight}, InvalidArgument);
  CHECK_THROWS_AS(Sieve{SieveSpec::network("net", 4, 2, 2)}, InvalidArgument);
}

TEST_CASE("output clip bounds every output") {
  SieveSpec spec = SieveSpec::network("net", 2, 3, 6, Activation::Relu);
  spec.output_clip = 0.7;
  Sieve net(spec);
  Rng rng(1);
  for (int draw = 0; draw < 20; ++draw) {
    Eigen::VectorXd c = 5.0 * net.random_point(rng);
    Eigen::MatrixXd X(500, 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) X.row(i) << 20 * rng.normal(), 20 * rng.normal();
    CHECK(net.eval_batch(c, X).cwiseAbs().maxCoeff() <= 0.7);
  }
}

TEST_CASE("coordinate gradients match central differences") {
  Rng rng(2);
  for (Activation act : {Activation::Tanh, Activation::Relu}) {
    for (int depth : {1, 2, 3}) {
      SieveSpec spec = SieveSpec::network("net", 2, depth, 4, act, 2);
      spec.output_clip = 2.0;
      Sieve net(spec);
      for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd c = net.random_point(rng);
        Eigen::VectorXd x(2), up(2);
        x << rng.normal(), rng.normal();
        up << rng.normal(), rng.normal();
        CHECK(max_rel_err(net.grad_coords(c, as_row(x), up), fd_grad(net, c, as_row(x), up)) <
              1e-4);
      }
    }
  }
  SieveSpec lin = SieveSpec::linear("lin", 2, BasisKind::Polynomial, 2, 2);
  Sieve s(lin);
  CHECK(s.dim() == 12);
  Eigen::VectorXd c = s.random_point(rng), x(2), up(2);
  x << 0.3, -1.2;
  up << 1.0, -2.0;
  CHECK(max_rel_err(s.grad_coords(c, as_row(x), up), fd_grad(s, c, as_row(x), up)) < 1e-6);
  CHECK(s.grad_coords(c, as_row(x), Eigen::VectorXd::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch gradient equals the sum of row gradients") {
  Rng rng(3);
  SieveSpec spec = SieveSpec::network("net", 2, 3, 5, Activation::Tanh, 1);
  Sieve net(spec);
  Eigen::VectorXd c = net.random_point(rng);
  Eigen::MatrixXd X(7, 2), U(7, 1);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(c.size());
  for (int i = 0; i < 7; ++i) {
    X.row(i) << rng.normal(), rng.normal();
    U(i, 0) = rng.normal();
    Eigen::VectorXd x = X.row(i).transpose();
    sum += net.grad_coords(c, as_row(x), Eigen::VectorXd::Constant(1, U(i, 0)));
  }
  CHECK(max_rel_err(net.grad_coords_batch(c, X, U), sum) < 1e-12);
}

TEST_CASE("linear basis gradient is the feature vector") {
  Sieve s(SieveSpec::linear("lin", 1, BasisKind::Polynomial, 1));
  double x = 0.4;
  Eigen::VectorXd g = s.grad_coords(Eigen::VectorXd::Zero(2), Row(&x, 1), Eigen::VectorXd::Ones(1));
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.4);
}

TEST_CASE("indicator and piecewise bases") {
  SieveSpec ind = SieveSpec::linear("ind", 2, BasisKind::Indicator, 0);
  ind.levels = {5, 3};
  Sieve s(ind);
  CHECK(s.num_features() == 15);
  double x[2] = {2, 1};
  Eigen::VectorXd phi = s.features(Row(x, 2));
  CHECK(phi.sum() == 1.0);
  CHECK(phi[2 * 3 + 1] == 1.0);

  SieveSpec pw = SieveSpec::linear("pw", 1, BasisKind::PiecewisePolynomial, 1);
  pw.knots = {-1.0, 0.0, 1.0};
  Sieve p(pw);
  CHECK(p.num_features() == 8);
  double z = 0.5;
  Eigen::VectorXd f = p.features(Row(&z, 1));
  CHECK(f[4] == 1.0);
  CHECK(f[5] == 0.5);
  CHECK(f.sum() == 1.5);

  Sieve trig(SieveSpec::linear("trig", 1, BasisKind::Trig, 2));
  CHECK(trig.num_features() == 5);
}

TEST_CASE("euclidean sieve is a box") {
  Sieve box(SieveSpec::euclidean("b", Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 2)));
  Eigen::VectorXd c(2);
  c << 3.0, -1.0;
  box.project(c);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 0.0);
  CHECK(box.eval(c, Row()) == c);
}

TEST_CASE("tanh network is Lipschitz with constant (kappa w)^L") {
  const double kappa = 0.8;
  SieveSpec spec = SieveSpec::network("net", 2, 3, 4, Activation::Tanh);
  spec.weight_clip = kappa;
  Sieve net(spec);
  Rng rng(6);
  const double bound = std::pow(kappa * 4.0, 3);
  for (int draw = 0; draw < 20; ++draw) {
    Eigen::VectorXd c = 3.0 * net.random_point(rng);
    net.project(c);
    CHECK(c.cwiseAbs().maxCoeff() <= kappa);
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd a(2), b(2);
      a << rng.normal(), rng.normal();
      b = a + 0.1 * Eigen::Vector2d(rng.normal(), rng.normal());
      double d = std::abs(net.eval_scalar(c, as_row(a)) - net.eval_scalar(c, as_row(b)));
      CHECK(d <= bound * (a - b).norm() + 1e-12);
    }
  }
}

TEST_CASE("project_toward") {
  SieveSpec spec = SieveSpec::network("net", 1, 2, 8, Activation::Tanh);
  Sieve net(spec);
  Rng rng(7);
  Eigen::VectorXd c = net.random_point(rng);
  // A bump: large output weights on a narrow tanh pair.
  c.setZero();
  c[0] = 4.0;
  c[8] = 1.0;  // bias of unit 0
  c[1] = 4.0;
  c[9] = -1.0;
  c[16] = 1.0;
  c[17] = -1.0;
  Eigen::MatrixXd grid(101, 1);
  for (int i = 0; i <= 100; ++i) grid(i, 0) = -2.0 + 4.0 * i / 100.0;

  TargetClass tc;
  tc.kind = TargetClass::Kind::SupBall;
  tc.reference = [](Row) { return Eigen::VectorXd::Constant(1, 0.0); };
  tc.grid = grid;
  double before = target_distance(net, c, tc);
  REQUIRE(before > 0.5);

  tc.radius = std::numeric_limits<double>::infinity();
  CHECK(project_toward(net, c, tc).coords == c);
  tc.radius = before + 0.1;
  CHECK_FALSE(project_toward(net, c, tc).changed);

  tc.radius = 0.1;
  ProjectionResult r = project_toward(net, c, tc);
  CHECK(r.changed);
  CHECK(r.achieved <= 0.1);
  CHECK(target_distance(net, r.coords, tc) <= 0.1);

  TargetClass lip;
  lip.kind = TargetClass::Kind::LipschitzCap;
  lip.grid = grid;
  lip.radius = 0.5;
  ProjectionResult l = project_toward(net, c, lip);
  CHECK(l.achieved <= 0.5);

  // Infeasible: weights clipped at a tiny kappa cannot reach a far constant.
  SieveSpec small = SieveSpec::network("net", 1, 2, 2, Activation::Tanh);
  small.weight_clip = 0.01;
  Sieve tiny(small);
  TargetClass far;
  far.reference = [](Row) { return Eigen::VectorXd::Constant(1, 5.0); };
  far.grid = grid;
  far.radius = 0.1;
  CHECK_THROWS_AS(project_toward(tiny, Eigen::VectorXd::Zero(tiny.dim()), far),
                  RegularizationFailure);
}

TEST_CASE("input gradients match central differences") {
  Rng rng(8);
  std::vector<SieveSpec> specs = {SieveSpec::network("n", 2, 3, 5, Activation::Tanh, 2),
                                  SieveSpec::linear("p", 2, BasisKind::Polynomial, 3, 2),
                                  SieveSpec::linear("t", 2, BasisKind::Trig, 2, 2)};
  SieveSpec pw = SieveSpec::linear("pw", 1, BasisKind::PiecewisePolynomial, 2, 2);
  pw.knots = {-0.5, 0.5};
  specs.push_back(pw);
  for (const SieveSpec& sp : specs) {
    Sieve s(sp);
    Eigen::VectorXd c = s.random_point(rng);
    const auto D = static_cast<Eigen::Index>(sp.input_dim);
    Eigen::MatrixXd X(5, D), U(5, 2);
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < D; ++j) X(i, j) = 0.8 * rng.normal() + 0.01;
      U.row(i) << rng.normal(), rng.normal();
    }
    Eigen::MatrixXd G = s.input_grad_batch(c, X, U);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < D; ++j) {
        Eigen::MatrixXd P = X.row(i), M = X.row(i);
        P(0, j) += h;
        M(0, j) -= h;
        double fd = (U.row(i).dot(s.eval_batch(c, P).row(0)) - U.row(i).dot(s.eval_batch(c, M).row(0))) / (2 * h);
        CHECK(G(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}
