#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aest/harness/csv.hpp"
#include "aest/harness/dgp.hpp"
#include "aest/harness/problems.hpp"

namespace aest {

struct RunOptions {
  RunOptions() = default;
  RunOptions(std::uint64_t s, std::size_t w = 1, bool minimax = false)
      : seed(s), workers(w), minimax_check(minimax) {}

  std::uint64_t seed = 0;
  std::size_t workers = 1;
  /// Run minimax_consistency on every solve and count the failures.
  bool minimax_check = false;
  /// Applied to each problem's solver defaults, e.g. the [solver] section.
  std::function<void(SolverConfig&)> solver_overrides;
};

struct RateFitResult {
  std::vector<std::size_t> n_grid;
  std::vector<double> gap_means;
  std::vector<double> gap_ses;
  std::vector<bool> censored;  // mean gap not distinguishable from 0; excluded from the fit
  double slope = 0.0;
  double slope_se = 0.0;
  std::size_t replicas = 0;
  std::size_t failures = 0;
  std::size_t over_budget = 0;  // certified slacks above budget
  std::size_t minimax_failures = 0;
  CsvTable rows{{"n", "replica", "gap", "seed", "failed", "eta_tilde", "eta", "within_budget"}};
  CsvTable fit_table() const;
};

/// Weighted least squares of log mean gap on log n, weights from the Monte
/// Carlo standard errors; slope_se is inflated by √(χ²/dof) when the points
/// scatter more than their errors allow. Two points give the secant with
/// the propagated error. Fewer than two uncensored points leave both NaN.
void fit_rate(RateFitResult& r);

RateFitResult run_rate_experiment(const DGPSpec& dgp, const ProblemSpec& problem,
                                  const std::vector<std::size_t>& n_grid, std::size_t replicas,
                                  const RunOptions& run);

struct CoverageReport {
  double level = 0.95;
  std::size_t hits = 0;
  std::size_t replicas = 0;  // replicas used (failures excluded)
  std::size_t failures = 0;
  std::size_t over_budget = 0, minimax_failures = 0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  double truth = 0.0;
  /// Monte Carlo variance of √n(estimate − truth) and the mean estimated V.
  double scaled_variance = 0.0;
  double mean_V_hat = 0.0;
  CsvTable rows{{"replica", "seed", "estimate", "lo", "hi", "covered", "failed", "V_hat"}};
};

/// cue: functional θ₁ of the location model through variance_estimate;
/// riesz: the orthogonalized functional with a learned representer.
/// `variance_scale` multiplies V (negative controls).
CoverageReport run_coverage(const DGPSpec& dgp, const ProblemSpec& problem, double level,
                            std::size_t replicas, std::size_t n, const RunOptions& run,
                            double variance_scale = 1.0);

struct EfficiencyReport {
  std::size_t replicas = 0, failures = 0;
  double var_cmr = 0.0, var_cmr_se = 0.0;
  double var_cgel = 0.0, var_cgel_se = 0.0;
  double diff = 0.0, diff_se = 0.0;  // var_cmr − var_cgel with a paired standard error
  double V_sandwich = 0.0, V_literal = 0.0, V_star = 0.0;
  std::size_t over_budget = 0, minimax_failures = 0;
  CsvTable rows{{"replica", "seed", "theta_cmr", "theta_cgel", "failed"}};
  CsvTable summary() const;
};

/// √n-scaled Monte Carlo variances of the cmr and conditional-GEL estimators
/// on the linear IV design, next to the three analytic variances.
EfficiencyReport run_efficiency_compare(const DGPSpec& dgp, const ProblemSpec& cgel,
                                        std::size_t replicas, std::size_t n,
                                        const RunOptions& run);

struct DivergenceReport {
  RateFitResult fit;  // gaps are oracle divergences D_f(ℙ_θ̂‖ℙ)
  CsvTable rows{{"n", "replica", "theta_hat", "divergence", "seed", "failed"}};
};

DivergenceReport run_divergence_recovery(const DGPSpec& dgp, const ProblemSpec& fgan,
                                         const std::vector<std::size_t>& n_grid,
                                         std::size_t replicas, const RunOptions& run);

}  // namespace aest
