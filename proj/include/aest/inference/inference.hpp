#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/core/saddle_loss.hpp"
#include "aest/estimators/moment.hpp"

namespace aest {

using ScalarFunctional = std::function<double(const Eigen::VectorXd&)>;

/// Default finite-difference step 1e−4·(1+‖at‖∞).
double default_step(const Eigen::VectorXd& at);

/// Central difference (f(at+h·dir) − f(at−h·dir))/2h; with `richardson`,
/// (4·D(h/2) − D(h))/3. h ≤ 0 selects default_step(at).
double pathwise_derivative(const ScalarFunctional& f, const Eigen::VectorXd& at,
                           const Eigen::VectorXd& dir, double h = 0.0, bool richardson = false);

/// 𝔼ₙ l(θ, λ̂(θ), Y) with λ̂(θ) the loss's best response started from `warm`
/// (zero when empty).
double concentrated_objective(const SaddleLoss& loss, const Eigen::VectorXd& theta,
                              const Dataset& data, const Eigen::VectorXd& warm = {});

struct InnerProduct {
  Eigen::MatrixXd M;
  double min_eigenvalue = 0.0;
  bool indefinite = false;  // min eigenvalue below −tol·max|eigenvalue|
};

/// Second central differences of the concentrated objective along pairs of
/// the columns of `dirs`, symmetrized.
InnerProduct inner_product_matrix(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                  const Dataset& data, const Eigen::MatrixXd& dirs,
                                  const Eigen::VectorXd& warm = {}, double h = 0.0,
                                  double tol = 1e-8);

struct VarianceReport {
  double estimate = 0.0;  // ζ′θ̂
  double V_hat = 0.0;
  Eigen::MatrixXd M;      // inner product on the coordinate basis
  Eigen::VectorXd v_star;
  Eigen::VectorXd scores;  // per-row l′(θ̂,Y)[v*]
  double level = 0.95;
  double se = 0.0;
  double lo = 0.0, hi = 0.0;
};

/// Variance of the functional ζ′θ̂ at an approximate Nash pair, with
/// v* = M⁻¹ζ and scores through the concentrated loss:
///   l′ᵢ[v*] = ∇_θ lᵢ·v* + ∇_λ lᵢ·Dλ̂[v*],
/// Dλ̂[v*] the central difference of the best response along v*. When the
/// loss has no best response the adversary direction is dropped.
/// level = 1 gives an infinite interval.
VarianceReport variance_estimate(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                 const Eigen::VectorXd& lambda_hat, const Dataset& data,
                                 const Eigen::VectorXd& zeta, double level = 0.95);

/// δ(θ) = offset + slope·(θ − θ̂); slope may be empty (constant perturbation).
struct AffinePerturbation {
  Eigen::VectorXd offset;
  Eigen::MatrixXd slope;
};

/// θ ↦ λ map describing how the adversary moves with θ (e.g. a population
/// best response). Empty means the adversary is held at λ̂.
using AdversaryMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// max over perturbations δ and coordinates j of |∂²F/∂θⱼ∂ε| at (θ̂, 0), where
///   F(θ, ε) = 𝔼ₙ l(θ, ν(θ) + ε·δ(θ), Y),   ν(θ) = λ̂ + map(θ) − map(θ̂),
/// i.e. the nuisance derivative of the total θ-score φ(θ) = d/dθ 𝔼ₙ l(θ, ν(θ)).
/// Mixed partials use the four-point stencil with steps h·(1+‖θ̂‖∞), h·(1+‖λ̂‖∞).
double neyman_orthogonality_check(const SaddleLoss& loss, const Eigen::VectorXd& theta_hat,
                                  const Eigen::VectorXd& lambda_hat, const Dataset& data,
                                  const std::vector<AffinePerturbation>& perturbations,
                                  const AdversaryMap& map = {}, double h = 1e-4);

struct CmrVariances {
  Eigen::MatrixXd V_sandwich;  // M̃⁻¹ S M̃⁻¹
  Eigen::MatrixXd V_literal;   // 𝔼[D′ΩD]⁻¹ as printed
  Eigen::MatrixXd V_star;      // 𝔼[D′Ω⁻¹D]⁻¹
  Eigen::MatrixXd M_tilde, S;
};

/// Conditional-moment variances with D = 𝔼[∇m|Z], Ω = 𝔼[mm′|Z] integrated
/// over Z by the given nodes (one z per row) and weights (summing to 1).
CmrVariances cmr_variance_formulas(const ConditionalDesign& design, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& z_nodes,
                                   const Eigen::VectorXd& z_weights);

/// Standard normal quantile z with P(|N| ≤ z) = level.
double normal_two_sided_quantile(double level);

}  // namespace aest
