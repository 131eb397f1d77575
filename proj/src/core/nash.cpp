#include "aest/core/nash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aest/core/errors.hpp"
#include "aest/core/optimize.hpp"

namespace aest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_point(const ParamPoint& p, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(p.coords.size()) != dim) {
    throw InvalidArgument(std::string(what) + " has dimension " + std::to_string(p.coords.size()) +
                          ", expected " + std::to_string(dim));
  }
}

// Wraps a mean evaluation so that steps leaving the conjugate domain are seen
// by the line search as infeasible rather than aborting the search.
Objective theta_objective(const SaddleLoss& loss, const Eigen::VectorXd& lambda,
                          const Dataset& data) {
  return [&loss, lambda, &data](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
    try {
      double v = loss.mean(th, lambda, data);
      if (g) loss.mean_grad(th, lambda, data, g, nullptr);
      return v;
    } catch (const DomainViolation&) {
      if (g) g->setZero(th.size());
      return kInf;
    } catch (const NumericalFailure&) {
      if (g) g->setZero(th.size());
      return kInf;
    }
  };
}

Objective lambda_objective(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                           const Dataset& data) {
  return [&loss, theta, &data](const Eigen::VectorXd& la, Eigen::VectorXd* g) {
    try {
      double v = loss.mean(theta, la, data);
      if (g) loss.mean_grad(theta, la, data, nullptr, g);
      return v;
    } catch (const DomainViolation&) {
      if (g) g->setZero(la.size());
      return -kInf;
    } catch (const NumericalFailure&) {
      if (g) g->setZero(la.size());
      return -kInf;
    }
  };
}

Projector projector_of(const ParamSpace& space) {
  return [&space](Eigen::VectorXd& x) { space.project(x); };
}

MinimizeOptions options_of(const ToleranceBudget& budget) {
  MinimizeOptions o;
  o.max_iters = std::max(1, budget.max_iters);
  return o;
}

// Restart k > 0 draws its start from its own stream, so the set of starts for
// `restarts = r` is a prefix of the set for `restarts = r + 1`.
Eigen::VectorXd restart_point(const ParamSpace& space, const ToleranceBudget& budget,
                              std::uint64_t stream, int k) {
  Rng rng(derive_seed(budget.seed, {stream, static_cast<std::uint64_t>(k)}));
  return space.random_point(rng);
}

double inner_inf(const SaddleLoss& loss, const Eigen::VectorXd& theta0,
                 const Eigen::VectorXd& lambda, const Dataset& data,
                 const ParamSpace& theta_space, const ToleranceBudget& budget) {
  Objective f = theta_objective(loss, lambda, data);
  Projector proj = projector_of(theta_space);
  double best = kInf;
  for (int k = 0; k < budget.restarts; ++k) {
    Eigen::VectorXd start = k == 0 ? theta0 : restart_point(theta_space, budget, 11, k);
    theta_space.project(start);
    if (!std::isfinite(f(start, nullptr))) {
      if (k == 0) throw NumericalFailure("objective is non-finite at the fitted theta", 0);
      continue;
    }
    MinimizeResult r = minimize(f, start, proj, options_of(budget));
    best = std::min(best, r.value);
  }
  return best;
}

}  // namespace

double empirical_objective(const SaddleLoss& loss, const ParamPoint& theta,
                           const ParamPoint& lambda, const Dataset& data) {
  loss.check_dims(theta.coords, lambda.coords);
  return loss.mean(theta.coords, lambda.coords, data);
}

std::pair<double, Eigen::VectorXd> inner_sup(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                                             const Dataset& data, const ParamSpace& lambda_space,
                                             const ToleranceBudget& budget,
                                             const Eigen::VectorXd& warm, std::uint64_t stream) {
  Objective g = lambda_objective(loss, theta, data);
  Projector proj = projector_of(lambda_space);
  double best = -kInf;
  Eigen::VectorXd arg;
  Rng init_rng(derive_seed(budget.seed, {stream, 0}));
  Eigen::VectorXd first = warm.size() > 0 ? warm : lambda_space.initial_point(init_rng);

  auto consider = [&](const Eigen::VectorXd& x) {
    double v = g(x, nullptr);
    if (v > best) {
      best = v;
      arg = x;
    }
  };

  // Concave inner problems: ascent from the best response reaches the global
  // sup, so random restarts add nothing.
  const bool concave = loss.concave_in_lambda();
  if (loss.has_best_response()) {
    Eigen::VectorXd br = loss.best_response(theta, data, first);
    lambda_space.project(br);
    consider(br);
    if (concave && std::isfinite(best)) first = br;
  }
  const int restarts = concave ? 1 : budget.restarts;
  for (int k = 0; k < restarts; ++k) {
    Eigen::VectorXd start = k == 0 ? first : restart_point(lambda_space, budget, stream, k);
    lambda_space.project(start);
    if (!std::isfinite(g(start, nullptr))) continue;
    MinimizeResult r = maximize(g, start, proj, options_of(budget));
    consider(r.x);
  }
  if (!std::isfinite(best)) {
    throw NumericalFailure(loss.family() + ": inner maximization found no finite value");
  }
  return {best, arg};
}

NashSlacks certify_nash(const SaddleLoss& loss, NashSolution& sol, const Dataset& data,
                        const ParamSpace& theta_space, const ParamSpace& lambda_space,
                        const ToleranceBudget& budget) {
  budget.validate();
  check_point(sol.theta_hat, theta_space.dim(), "theta_hat");
  check_point(sol.lambda_hat, lambda_space.dim(), "lambda_hat");
  loss.check_dims(sol.theta_hat.coords, sol.lambda_hat.coords);

  const double value = loss.mean(sol.theta_hat.coords, sol.lambda_hat.coords, data);
  const double inf_theta =
      inner_inf(loss, sol.theta_hat.coords, sol.lambda_hat.coords, data, theta_space, budget);
  const double sup_lambda =
      inner_sup(loss, sol.theta_hat.coords, data, lambda_space, budget, sol.lambda_hat.coords, 13)
          .first;

  NashSlacks s;
  s.eta_tilde = std::max(0.0, value - inf_theta);
  s.eta = std::max(0.0, sup_lambda - value);
  sol.eta_tilde = s.eta_tilde;
  sol.eta = s.eta;
  sol.certified = true;
  sol.within_budget = s.eta_tilde <= budget.eta_tilde_max && s.eta <= budget.eta_max;
  return s;
}

MinimaxCheck minimax_consistency(const SaddleLoss& loss, const NashSolution& sol,
                                 const Dataset& data, const ParamSpace& theta_space,
                                 const ParamSpace& lambda_space, const ToleranceBudget& budget,
                                 double slack_tol) {
  if (!sol.certified) throw InvalidArgument("minimax check needs a certified solution");
  check_point(sol.theta_hat, theta_space.dim(), "theta_hat");
  check_point(sol.lambda_hat, lambda_space.dim(), "lambda_hat");

  MinimaxCheck out;
  out.objective = loss.mean(sol.theta_hat.coords, sol.lambda_hat.coords, data);
  out.eta_bar = sol.eta_tilde + sol.eta;

  ToleranceBudget quick = budget;
  quick.restarts = 1;
  Eigen::VectorXd warm = sol.lambda_hat.coords;

  // Upper envelope θ ↦ suP̂_λ 𝔼ₙl(θ,λ) with its envelope-theorem gradient.
  Objective envelope = [&](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
    try {
      auto [v, arg] = inner_sup(loss, th, data, lambda_space, quick, warm, 17);
      warm = arg;
      if (g) loss.mean_grad(th, arg, data, g, nullptr);
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
  opts.max_iters = std::min(50, std::max(1, budget.max_iters));
  opts.grad_tol = 1e-8;
  Projector proj = projector_of(theta_space);

  double best = kInf;
  std::vector<Eigen::VectorXd> tried;
  for (int k = 0; k < budget.restarts; ++k) {
    Eigen::VectorXd start = k == 0 ? sol.theta_hat.coords : restart_point(theta_space, budget, 19, k);
    theta_space.project(start);
    // Degenerate spaces project every start onto the same point.
    if (std::any_of(tried.begin(), tried.end(), [&](const Eigen::VectorXd& t) { return t == start; })) continue;
    tried.push_back(start);
    warm = sol.lambda_hat.coords;
    if (!std::isfinite(envelope(start, nullptr))) continue;
    MinimizeResult r = minimize(envelope, start, proj, opts);
    double v = inner_sup(loss, r.x, data, lambda_space, budget, warm, 23).first;
    best = std::min(best, v);
  }
  out.minimax = best;
  out.passed = std::isfinite(best) && out.objective <= best + out.eta_bar + slack_tol;
  return out;
}

}  // namespace aest
