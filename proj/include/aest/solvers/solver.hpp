#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "aest/core/nash.hpp"
#include "aest/core/param.hpp"
#include "aest/core/saddle_loss.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

enum class SolverMethod { Sgda, Extragradient, AltBestResponse };
enum class InnerSolver { Analytic, Gradient };

std::string to_string(SolverMethod m);
SolverMethod solver_method_from_string(const std::string& s);

struct SolverConfig {
  SolverMethod method = SolverMethod::AltBestResponse;
  double step_theta = 1e-2;
  double step_lambda = 1e-2;
  double decay = 0.999;  // geometric step decay per iteration
  int max_iters = 2000;
  std::size_t batch = 0;  // 0 = full batch
  InnerSolver inner_solver = InnerSolver::Analytic;
  double stop_tol = 1e-10;  // sup-norm iterate movement
  int max_halvings = 5;
  std::uint64_t seed = 0;
  /// Certification budget; its seed is derived from `seed` when left at 0.
  ToleranceBudget budget;
  bool certify = true;

  void validate() const;
};

/// Optional starting points; empty vectors fall back to the spaces' initial points.
struct WarmStart {
  Eigen::VectorXd theta, lambda;
};

/// Runs the configured saddle-point method and certifies the Nash slacks of
/// the result on the full data.
NashSolution solve(const SaddleLoss& loss, const ParamSpace& theta_space,
                   const ParamSpace& lambda_space, const Dataset& data, const SolverConfig& cfg,
                   const WarmStart& warm = {});

/// λ̂(θ): the registered analytic adversary, or local maximization from
/// `warm` when `inner` is Gradient or no adversary is registered.
Eigen::VectorXd adversary_response(const SaddleLoss& loss, const ParamSpace& lambda_space,
                                   const Eigen::VectorXd& theta, const Dataset& data,
                                   const Eigen::VectorXd& warm, InnerSolver inner);

/// Least-squares sieve regression of y on x.
class FittedFunction {
 public:
  FittedFunction(std::shared_ptr<const Sieve> sieve, Eigen::VectorXd coords)
      : sieve_(std::move(sieve)), coords_(std::move(coords)) {}
  double operator()(Row x) const { return sieve_->eval_scalar(coords_, x); }
  const Eigen::VectorXd& coords() const { return coords_; }
  const Sieve& sieve() const { return *sieve_; }

 private:
  std::shared_ptr<const Sieve> sieve_;
  Eigen::VectorXd coords_;
};

FittedFunction fit_first_stage(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const SieveSpec& spec, const SolverConfig& cfg);

}  // namespace aest
