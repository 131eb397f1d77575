#pragma once

#include <functional>

#include <Eigen/Dense>

namespace aest {

/// Objective returning f(x) and, when `grad` is non-null, writing ∇f(x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;
/// In-place feasibility projection; an empty function means unconstrained.
using Projector = std::function<void(Eigen::VectorXd& x)>;

struct MinimizeOptions {
  int max_iters = 500;
  double grad_tol = 1e-10;   // on the projected-gradient step, sup norm
  double rel_f_tol = 1e-15;  // stop when successive values stall
  int memory = 10;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected limited-memory BFGS with Armijo backtracking on the projected
/// trial point. Falls back to a projected gradient step whenever the
/// quasi-Newton direction is not a descent direction. Throws NumericalFailure
/// (with the iteration index) if the start or an accepted iterate is non-finite.
MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0, const Projector& project,
                        const MinimizeOptions& opts = {});

/// maximize g ≡ minimize −g; the returned value is g at the maximizer.
MinimizeResult maximize(const Objective& g, Eigen::VectorXd x0, const Projector& project,
                        const MinimizeOptions& opts = {});

}  // namespace aest
