#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aest {

/// A point θ ∈ Θₙ or λ ∈ Λₙ: flat coordinates tagged with the owning space.
struct ParamPoint {
  Eigen::VectorXd coords;
  std::string space_id;

  Eigen::Index size() const { return coords.size(); }
};

/// Certified approximate Nash pair for the empirical saddle problem.
struct NashSolution {
  ParamPoint theta_hat;
  ParamPoint lambda_hat;
  double eta_tilde = 0.0;  // outer slack: how much θ could still gain
  double eta = 0.0;        // inner slack: how much λ could still gain
  bool certified = false;
  bool within_budget = false;
  std::vector<double> trace;
  int iterations = 0;
  int step_halvings = 0;
};

/// Finite-sample slack budgets and the restart policy used to certify them.
struct ToleranceBudget {
  double eta_tilde_max = 1e-6;
  double eta_max = 1e-6;
  int max_iters = 500;
  int restarts = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

}  // namespace aest
