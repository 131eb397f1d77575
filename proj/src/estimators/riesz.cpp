#include "aest/estimators/riesz.hpp"

#include <cmath>
#include <vector>

#include "aest/core/errors.hpp"
#include "aest/core/rng.hpp"

namespace aest {

namespace {

Row row_of(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Eigen::VectorXd copy_of(Row x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) v[static_cast<Eigen::Index>(j)] = x[j];
  return v;
}

}  // namespace

double LinearFunctional::apply_scalar(Row row, Row x, const ScalarFn& g) const {
  return apply(row, x, [&g](Row u) { return Eigen::VectorXd::Constant(1, g(u)); })[0];
}

Eigen::VectorXd MeanFunctional::apply(Row, Row x, const VecFn& g) const { return g(x); }

DerivativeFunctional::DerivativeFunctional(std::size_t coord, double h) : coord_(coord), h_(h) {
  if (!(h > 0.0)) throw InvalidArgument("derivative stencil width must be positive");
}

Eigen::VectorXd DerivativeFunctional::apply(Row, Row x, const VecFn& g) const {
  if (coord_ >= x.size()) throw InvalidArgument("derivative coordinate out of range");
  Eigen::VectorXd p = copy_of(x), m = p;
  p[static_cast<Eigen::Index>(coord_)] += h_;
  m[static_cast<Eigen::Index>(coord_)] -= h_;
  return (g(row_of(p)) - g(row_of(m))) / (2.0 * h_);
}

Eigen::VectorXd AteFunctional::apply(Row, Row x, const VecFn& g) const {
  if (treatment_ >= x.size()) throw InvalidArgument("treatment coordinate out of range");
  Eigen::VectorXd one = copy_of(x), zero = one;
  one[static_cast<Eigen::Index>(treatment_)] = 1.0;
  zero[static_cast<Eigen::Index>(treatment_)] = 0.0;
  return g(row_of(one)) - g(row_of(zero));
}

void check_linearity(const LinearFunctional& m, const ColumnLayout& layout,
                     const std::string& x_role, std::uint64_t seed) {
  const ColumnSlice xs = layout.role(x_role);
  Rng rng(derive_seed(seed, {0x11e4}));
  // g(x) = (a₀ + Σ aⱼ sin(bⱼxⱼ + cⱼ), a₀′ + Σ aⱼ′ xⱼ²)
  auto random_fn = [&]() {
    Eigen::VectorXd a(static_cast<Eigen::Index>(2 * xs.length + 2)),
        b(static_cast<Eigen::Index>(xs.length)), c(static_cast<Eigen::Index>(xs.length));
    for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = rng.normal();
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      b[j] = rng.uniform(0.5, 2.0);
      c[j] = rng.uniform(-1.0, 1.0);
    }
    return VecFn([a, b, c](Row x) {
      Eigen::VectorXd out(2);
      out[0] = a[0];
      out[1] = a[1];
      for (std::size_t j = 0; j < x.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        out[0] += a[2 + k] * std::sin(b[k] * x[j] + c[k]);
        out[1] += a[2 + b.size() + k] * x[j] * x[j];
      }
      return out;
    });
  };
  for (int trial = 0; trial < 16; ++trial) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(layout.width()));
    for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = rng.normal();
    Row r = row_of(row);
    Row x = xs.of(r);
    VecFn g1 = random_fn(), g2 = random_fn();
    const double s = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd lhs = m.apply(r, x, [&](Row u) { Eigen::VectorXd v = s * g1(u) + g2(u); return v; });
    Eigen::VectorXd rhs = s * m.apply(r, x, g1) + m.apply(r, x, g2);
    if (lhs.size() != 2 || rhs.size() != 2) {
      throw InvalidProblem("functional " + m.name() + " must preserve the output dimension");
    }
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    if (!lhs.allFinite() || (lhs - rhs).cwiseAbs().maxCoeff() > 1e-7 * scale) {
      throw InvalidProblem("functional " + m.name() + " is not linear in its function argument");
    }
  }
}

RieszLoss::RieszLoss(RieszProblem problem, std::shared_ptr<const Sieve> theta,
                     std::shared_ptr<const Sieve> lambda, const ColumnLayout& layout)
    : problem_(std::move(problem)), theta_(std::move(theta)), lambda_(std::move(lambda)) {
  if (!problem_.functional) throw InvalidArgument("riesz problem needs a functional");
  x_ = layout.role(problem_.x_role);
  for (const Sieve* s : {theta_.get(), lambda_.get()}) {
    if (s->input_dim() != x_.length || s->output_dim() != 1) {
      throw InvalidArgument("riesz sieves must map " + problem_.x_role + " to a scalar");
    }
  }
  check_linearity(*problem_.functional, layout, problem_.x_role);
}

bool RieszLoss::concave_in_lambda() const {
  return lambda_->spec().kind == SieveKind::LinearBasis;
}

double RieszLoss::eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda, Row y) const {
  check_dims(theta, lambda);
  Row x = x_.of(y);
  const double mv = problem_.functional->apply_scalar(
      y, x, [&](Row u) { return lambda_->eval_scalar(lambda, u); });
  const double l = lambda_->eval_scalar(lambda, x);
  return mv - theta_->eval_scalar(theta, x) * l - 0.5 * l * l;
}

void RieszLoss::accumulate_grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                      Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  Row x = x_.of(y);
  out -= lambda_->eval_scalar(lambda, x) * theta_->grad_coords(theta, x, Eigen::VectorXd::Ones(1));
}

void RieszLoss::accumulate_grad_lambda(const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
                                       Row y, Eigen::Ref<Eigen::VectorXd> out) const {
  Row x = x_.of(y);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  out += problem_.functional->apply(y, x, [&](Row u) { return lambda_->grad_coords(lambda, u, one); });
  const double w = theta_->eval_scalar(theta, x) + lambda_->eval_scalar(lambda, x);
  out -= w * lambda_->grad_coords(lambda, x, one);
}

Eigen::VectorXd RieszLoss::best_response(const Eigen::VectorXd& theta, const Dataset& data,
                                         const Eigen::VectorXd& start) const {
  if (!concave_in_lambda()) return SaddleLoss::best_response(theta, data, start);
  const auto K = static_cast<Eigen::Index>(lambda_->num_features());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  for (std::size_t i = 0; i < data.n(); ++i) {
    Row y = data.row(i);
    Row x = x_.of(y);
    Eigen::VectorXd phi = lambda_->features(x);
    G.noalias() += phi * phi.transpose();
    b += problem_.functional->apply(y, x, [&](Row u) { return lambda_->features(u); });
    b -= theta_->eval_scalar(theta, x) * phi;
  }
  Eigen::VectorXd c = G.completeOrthogonalDecomposition().solve(b);
  lambda_->project(c);
  return c;
}

FunctionalEstimate orthogonalized_functional(const RieszProblem& problem, const ScalarFn& theta_hat,
                                             const Dataset& data) {
  if (!problem.functional || !problem.first_stage_g || !theta_hat) {
    throw InvalidArgument("orthogonalized functional needs m, a first stage and a representer");
  }
  if (data.n() < 2) throw InvalidArgument("orthogonalized functional needs at least two rows");
  const ColumnSlice xs = data.layout().role(problem.x_role);
  const ColumnSlice ys = data.layout().role(problem.y_role);
  FunctionalEstimate out;
  out.scores.resize(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    Row row = data.row(i);
    Row x = xs.of(row);
    const double g = problem.first_stage_g(x);
    out.scores[static_cast<Eigen::Index>(i)] =
        problem.functional->apply_scalar(row, x, problem.first_stage_g) +
        theta_hat(x) * (ys.of(row)[0] - g);
  }
  const double n = static_cast<double>(data.n());
  out.estimate = out.scores.mean();
  const double var = (out.scores.array() - out.estimate).square().sum() / (n - 1.0);
  out.se = std::sqrt(var / n);
  return out;
}

}  // namespace aest
