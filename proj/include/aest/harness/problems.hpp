#pragma once

#include <functional>
#include <memory>
#include <string>

#include "aest/core/saddle_loss.hpp"
#include "aest/harness/dgp.hpp"
#include "aest/sieves/sieve.hpp"
#include "aest/solvers/solver.hpp"

namespace aest {

class Config;

/// Estimator family plus sieve sizing for one experiment.
struct ProblemSpec {
  std::string family = "cue";  // cue, gel, cmr, cgel, sbeed, riesz, fgan
  std::string divergence = "chi2";
  int theta_degree = 2;     // polynomial sieves for h (nonparam_iv) and the Riesz representer
  int lambda_degree = 2;    // polynomial adversary sieves
  int first_stage_degree = 5;
  int bins = 4;             // piecewise-linear adversary of cgel
  double theta_box = 10.0;  // Θ box half width or coefficient clip
  double logit_box = 20.0;  // policy logit clip (sbeed)
  double pilot_box = 0.5;   // cgel: Θ = pilot ± pilot_box
  /// Slack budget c/n for cgel (outer) and network fgan (both slacks).
  double outer_budget_scale = 20.0;
  std::string adversary = "linear";  // fgan: linear or network
  GrowthSchedule growth;    // fgan network width
  int depth = 2;
  double output_clip = 6.0;  // fgan network adversary bound B
  double weight_clip = 10.0;
  double model_samples_factor = 10.0;  // fgan m = factor·n
  bool fixed_theta = false;  // fgan: Θ = {μ + model_offset}, only the adversary is fit
  double model_offset = 0.0;

  static ProblemSpec from_config(const Config& cfg);
};

/// Loss, spaces, solver defaults and oracle criterion for one dataset.
struct Problem {
  std::shared_ptr<const SaddleLoss> loss;
  std::shared_ptr<const ParamSpace> theta_space, lambda_space;
  SolverConfig solver;
  WarmStart warm;
  /// Population criterion gap 𝔼[l(θ̂,Y) − l(θ*,Y)] from design oracles.
  std::function<double(const Eigen::VectorXd&)> population_gap;
  /// Keeps auxiliary objects (sieves, moments, first stage) alive.
  std::vector<std::shared_ptr<const void>> keep;
};

Problem build_problem(const Dgp& dgp, const ProblemSpec& spec, const Dataset& data,
                      std::uint64_t seed);

/// Solver overrides from the [solver] section on top of `base`.
SolverConfig solver_from_config(const Config& cfg, SolverConfig base);

struct ReplicaSolve {
  Dataset data;
  Problem problem;
  NashSolution sol;
};

/// Draws a dataset of size n, builds the problem and solves it, with the
/// dataset and solver seeds derived from (seed, n).
ReplicaSolve solve_replica(const Dgp& dgp, const ProblemSpec& spec, std::size_t n,
                           std::uint64_t seed, const std::function<void(SolverConfig&)>& tweak = {});

}  // namespace aest
