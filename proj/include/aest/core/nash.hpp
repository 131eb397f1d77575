#pragma once

#include <utility>

#include "aest/core/dataset.hpp"
#include "aest/core/param.hpp"
#include "aest/core/saddle_loss.hpp"

namespace aest {

/// 𝔼ₙ l(θ, λ, Y) with dimension checks against the loss.
double empirical_objective(const SaddleLoss& loss, const ParamPoint& theta,
                           const ParamPoint& lambda, const Dataset& data);

struct NashSlacks {
  double eta_tilde = 0.0;
  double eta = 0.0;
};

/// Certifies the empirical Nash slacks of `sol`:
///   eta_tilde = 𝔼ₙl(θ̂,λ̂) − inf̂_θ 𝔼ₙl(θ,λ̂),   eta = suP̂_λ 𝔼ₙl(θ̂,λ) − 𝔼ₙl(θ̂,λ̂),
/// where inf̂/suP̂ are the best values found by local optimization from
/// `budget.restarts` starts (the current point plus seeded random points).
/// Both slacks are lower bounds on the true slacks; restart k always uses the
/// same seed stream, so more restarts can only raise them. The slacks are
/// stored into `sol`, together with the within-budget flag.
NashSlacks certify_nash(const SaddleLoss& loss, NashSolution& sol, const Dataset& data,
                        const ParamSpace& theta_space, const ParamSpace& lambda_space,
                        const ToleranceBudget& budget);

/// Best inner value suP̂_λ 𝔼ₙ l(θ, λ, Y) over multi-start local maximization.
/// `warm` (if non-empty) is the first start; losses that are concave in λ
/// and have a best response use a single ascent started from it instead.
std::pair<double, Eigen::VectorXd> inner_sup(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                                             const Dataset& data, const ParamSpace& lambda_space,
                                             const ToleranceBudget& budget,
                                             const Eigen::VectorXd& warm, std::uint64_t stream);

struct MinimaxCheck {
  bool passed = false;
  double objective = 0.0;   // 𝔼ₙ l(θ̂, λ̂)
  double minimax = 0.0;     // inf̂_θ suP̂_λ 𝔼ₙ l(θ, λ)
  double eta_bar = 0.0;     // η̃ + η
};

/// Checks 𝔼ₙl(θ̂,λ̂) ≤ inf̂_θ suP̂_λ 𝔼ₙl(θ,λ) + η̃ + η + slack_tol for an already
/// certified `sol`. Candidate θ are θ̂ and seeded random points, each refined by
/// local descent on the re-solved upper envelope θ ↦ suP̂_λ 𝔼ₙl(θ,λ).
MinimaxCheck minimax_consistency(const SaddleLoss& loss, const NashSolution& sol,
                                 const Dataset& data, const ParamSpace& theta_space,
                                 const ParamSpace& lambda_space, const ToleranceBudget& budget,
                                 double slack_tol = 1e-9);

inline bool minimax_consistency_check(const SaddleLoss& loss, const NashSolution& sol,
                                      const Dataset& data, const ParamSpace& theta_space,
                                      const ParamSpace& lambda_space,
                                      const ToleranceBudget& budget, double slack_tol = 1e-9) {
  return minimax_consistency(loss, sol, data, theta_space, lambda_space, budget, slack_tol).passed;
}

}  // namespace aest
