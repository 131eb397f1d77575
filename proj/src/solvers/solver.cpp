#include "aest/solvers/solver.hpp"

#include <cmath>
#include <limits>
#include <algorithm>

#include "aest/core/errors.hpp"
#include "aest/core/optimize.hpp"

namespace aest {

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::Sgda: return "sgda";
    case SolverMethod::Extragradient: return "extragradient";
    case SolverMethod::AltBestResponse: return "alt_best_response";
  }
  return "?";
}

SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "sgda") return SolverMethod::Sgda;
  if (s == "extragradient") return SolverMethod::Extragradient;
  if (s == "alt_best_response") return SolverMethod::AltBestResponse;
  throw InvalidArgument("unknown solver method '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(step_theta > 0.0) || !(step_lambda > 0.0)) throw InvalidArgument("steps must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("decay must lie in (0,1]");
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (stop_tol < 0.0) throw InvalidArgument("stop_tol must be nonnegative");
  if (max_halvings < 0) throw InvalidArgument("max_halvings must be nonnegative");
  budget.validate();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ToleranceBudget effective_budget(const SolverConfig& cfg) {
  ToleranceBudget b = cfg.budget;
  if (b.seed == 0) b.seed = derive_seed(cfg.seed, {0xce47});
  return b;
}

struct Grads {
  Eigen::VectorXd theta, lambda;
};

// Simultaneous gradients on the full data or on a seeded minibatch.
class GradientOracle {
 public:
  GradientOracle(const SaddleLoss& loss, const Dataset& data, const SolverConfig& cfg)
      : loss_(loss), data_(data), batch_(cfg.batch), rng_(derive_seed(cfg.seed, {0xba7c})) {}

  Grads operator()(const Eigen::VectorXd& th, const Eigen::VectorXd& la) {
    Grads g;
    if (batch_ == 0 || batch_ >= data_.n()) {
      loss_.mean_grad(th, la, data_, &g.theta, &g.lambda);
    } else {
      const std::size_t w = data_.width();
      std::vector<double> rows(batch_ * w);
      for (std::size_t b = 0; b < batch_; ++b) {
        Row r = data_.row(rng_.index(data_.n()));
        std::copy(r.begin(), r.end(), rows.begin() + static_cast<std::ptrdiff_t>(b * w));
      }
      Dataset mb(data_.layout(), std::move(rows));
      loss_.mean_grad(th, la, mb, &g.theta, &g.lambda);
    }
    return g;
  }

 private:
  const SaddleLoss& loss_;
  const Dataset& data_;
  std::size_t batch_;
  Rng rng_;
};

bool finite(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.allFinite() && b.allFinite();
}

// Gradient play with step halving on divergence. `extra` selects the
// extragradient lookahead.
void gradient_play(const SaddleLoss& loss, const ParamSpace& ts, const ParamSpace& ls,
                   const Dataset& data, const SolverConfig& cfg, bool extra, NashSolution& sol) {
  GradientOracle oracle(loss, data, cfg);
  Eigen::VectorXd th = sol.theta_hat.coords, la = sol.lambda_hat.coords;
  Eigen::VectorXd good_th = th, good_la = la;
  double eta_t = cfg.step_theta, eta_l = cfg.step_lambda;
  int halvings = 0;
  int it = 0;
  while (it < cfg.max_iters) {
    bool ok = true;
    Eigen::VectorXd nth, nla;
    try {
      Grads g = oracle(th, la);
      if (extra) {
        Eigen::VectorXd hth = th - eta_t * g.theta, hla = la + eta_l * g.lambda;
        ts.project(hth);
        ls.project(hla);
        g = oracle(hth, hla);
      }
      nth = th - eta_t * g.theta;
      nla = la + eta_l * g.lambda;
      ts.project(nth);
      ls.project(nla);
      ok = finite(nth, nla) && finite(g.theta, g.lambda);
    } catch (const NumericalFailure&) {
      ok = false;
    } catch (const DomainViolation&) {
      ok = false;
    }
    if (!ok) {
      if (halvings >= cfg.max_halvings) {
        throw NumericalFailure(loss.family() + ": iterate diverged at iteration " +
                                   std::to_string(it),
                               static_cast<std::size_t>(it));
      }
      ++halvings;
      eta_t *= 0.5;
      eta_l *= 0.5;
      th = good_th;
      la = good_la;
      continue;
    }
    const double move = std::max((nth - th).lpNorm<Eigen::Infinity>(),
                                 (nla - la).lpNorm<Eigen::Infinity>());
    th = nth;
    la = nla;
    good_th = th;
    good_la = la;
    ++it;
    eta_t *= cfg.decay;
    eta_l *= cfg.decay;
    if (it % 10 == 0 || move <= cfg.stop_tol) {
      try {
        sol.trace.push_back(loss.mean(th, la, data));
      } catch (const std::exception&) {
        sol.trace.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    if (move <= cfg.stop_tol) break;
  }
  sol.theta_hat.coords = th;
  sol.lambda_hat.coords = la;
  sol.iterations = it;
  sol.step_halvings = halvings;
}

void alternating(const SaddleLoss& loss, const ParamSpace& ts, const ParamSpace& ls,
                 const Dataset& data, const SolverConfig& cfg, NashSolution& sol) {
  Eigen::VectorXd warm = sol.lambda_hat.coords;
  int evals = 0;
  Objective concentrated = [&](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
    ++evals;
    try {
      Eigen::VectorXd la = adversary_response(loss, ls, th, data, warm, cfg.inner_solver);
      const double v = loss.mean(th, la, data);
      if (!std::isfinite(v)) throw NumericalFailure("non-finite concentrated objective");
      warm = la;
      if (g) loss.mean_grad(th, la, data, g, nullptr);
      sol.trace.push_back(v);
      return v;
    } catch (const NumericalFailure&) {
      if (g) g->setZero(th.size());
      return kInf;
    } catch (const DomainViolation&) {
      if (g) g->setZero(th.size());
      return kInf;
    }
  };
  MinimizeOptions opts;
  opts.max_iters = cfg.max_iters;
  opts.grad_tol = std::max(cfg.stop_tol, 1e-14);
  Projector proj = [&ts](Eigen::VectorXd& x) { ts.project(x); };
  Eigen::VectorXd th0 = sol.theta_hat.coords;
  if (!std::isfinite(concentrated(th0, nullptr))) {
    throw NumericalFailure(loss.family() + ": concentrated objective is non-finite at the start", 0);
  }
  MinimizeResult r = minimize(concentrated, th0, proj, opts);
  sol.theta_hat.coords = r.x;
  sol.lambda_hat.coords = adversary_response(loss, ls, r.x, data, warm, cfg.inner_solver);
  sol.iterations = r.iterations;
}

}  // namespace

Eigen::VectorXd adversary_response(const SaddleLoss& loss, const ParamSpace& lambda_space,
                                   const Eigen::VectorXd& theta, const Dataset& data,
                                   const Eigen::VectorXd& warm, InnerSolver inner) {
  if (inner == InnerSolver::Analytic && loss.has_best_response()) {
    Eigen::VectorXd la = loss.best_response(theta, data, warm);
    lambda_space.project(la);
    return la;
  }
  Objective g = [&](const Eigen::VectorXd& la, Eigen::VectorXd* grad) {
    try {
      double v = loss.mean(theta, la, data);
      if (grad) loss.mean_grad(theta, la, data, nullptr, grad);
      return v;
    } catch (const NumericalFailure&) {
      if (grad) grad->setZero(la.size());
      return -kInf;
    } catch (const DomainViolation&) {
      if (grad) grad->setZero(la.size());
      return -kInf;
    }
  };
  MinimizeOptions opts;
  opts.max_iters = 1000;
  Eigen::VectorXd start = warm;
  lambda_space.project(start);
  return maximize(g, start, [&](Eigen::VectorXd& x) { lambda_space.project(x); }, opts).x;
}

NashSolution solve(const SaddleLoss& loss, const ParamSpace& theta_space,
                   const ParamSpace& lambda_space, const Dataset& data, const SolverConfig& cfg,
                   const WarmStart& warm) {
  cfg.validate();
  if (theta_space.dim() != loss.theta_dim() || lambda_space.dim() != loss.lambda_dim()) {
    throw InvalidArgument(loss.family() + ": parameter spaces do not match the loss dimensions");
  }
  if (data.n() == 0) throw InvalidArgument("cannot solve on an empty dataset");
  Rng rng(derive_seed(cfg.seed, {0x5eed}));
  NashSolution sol;
  sol.theta_hat = theta_space.point(warm.theta.size() > 0 ? warm.theta : theta_space.initial_point(rng));
  sol.lambda_hat =
      lambda_space.point(warm.lambda.size() > 0 ? warm.lambda : lambda_space.initial_point(rng));
  theta_space.project(sol.theta_hat.coords);
  lambda_space.project(sol.lambda_hat.coords);

  switch (cfg.method) {
    case SolverMethod::Sgda:
      gradient_play(loss, theta_space, lambda_space, data, cfg, false, sol);
      break;
    case SolverMethod::Extragradient:
      gradient_play(loss, theta_space, lambda_space, data, cfg, true, sol);
      break;
    case SolverMethod::AltBestResponse:
      alternating(loss, theta_space, lambda_space, data, cfg, sol);
      break;
  }
  if (!sol.theta_hat.coords.allFinite() || !sol.lambda_hat.coords.allFinite()) {
    throw NumericalFailure(loss.family() + ": solver returned a non-finite iterate",
                           static_cast<std::size_t>(sol.iterations));
  }
  if (cfg.certify) certify_nash(loss, sol, data, theta_space, lambda_space, effective_budget(cfg));
  return sol;
}

FittedFunction fit_first_stage(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const SieveSpec& spec, const SolverConfig& cfg) {
  if (x.rows() != y.size() || x.rows() == 0) {
    throw InvalidArgument("first stage needs aligned, nonempty x and y");
  }
  auto sieve = std::make_shared<Sieve>(spec);
  if (sieve->output_dim() != 1) throw InvalidArgument("first stage sieve must be scalar");
  const double inv_n = 1.0 / static_cast<double>(y.size());
  Objective f = [&](const Eigen::VectorXd& c, Eigen::VectorXd* g) {
    Eigen::VectorXd r = sieve->eval_batch(c, x).col(0) - y;
    if (g) *g = sieve->grad_coords_batch(c, x, r) * inv_n;
    return 0.5 * r.squaredNorm() * inv_n;
  };
  Rng rng(derive_seed(cfg.seed, {0xf1e5}));
  Eigen::VectorXd c0 = sieve->initial_point(rng);
  MinimizeOptions opts;
  opts.max_iters = std::max(cfg.max_iters, 200);
  opts.grad_tol = 1e-13;
  MinimizeResult r = minimize(f, c0, [&](Eigen::VectorXd& c) { sieve->project(c); }, opts);
  if (!r.x.allFinite()) throw NumericalFailure("first stage fit is non-finite");
  return FittedFunction(sieve, r.x);
}

}  // namespace aest
