#include <cmath>

#include "aest/core/errors.hpp"
#include "aest/core/optimize.hpp"
#include "aest/sieves/sieve.hpp"

namespace aest {

namespace {

Eigen::MatrixXd reference_on_grid(const Sieve& sieve, const TargetClass& target) {
  const Eigen::MatrixXd& G = target.grid;
  Eigen::MatrixXd R(G.rows(), static_cast<Eigen::Index>(sieve.output_dim()));
  Eigen::VectorXd x(G.cols());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    x = G.row(i).transpose();
    R.row(i) = target.reference(Row(x.data(), static_cast<std::size_t>(x.size()))).transpose();
  }
  return R;
}

// Lipschitz estimate over consecutive grid rows.
double grid_lipschitz(const Eigen::MatrixXd& G, const Eigen::MatrixXd& V) {
  double best = 0.0;
  for (Eigen::Index i = 0; i + 1 < G.rows(); ++i) {
    double dx = (G.row(i + 1) - G.row(i)).norm();
    if (dx > 0) best = std::max(best, (V.row(i + 1) - V.row(i)).norm() / dx);
  }
  return best;
}

}  // namespace

double target_distance(const Sieve& sieve, const Eigen::VectorXd& coords,
                       const TargetClass& target) {
  if (target.grid.rows() == 0) throw InvalidArgument("target class needs an evaluation grid");
  Eigen::MatrixXd V = sieve.eval_batch(coords, target.grid);
  if (target.kind == TargetClass::Kind::SupBall) {
    if (!target.reference) throw InvalidArgument("sup-norm target needs a reference function");
    return (V - reference_on_grid(sieve, target)).cwiseAbs().maxCoeff();
  }
  return grid_lipschitz(target.grid, V);
}

ProjectionResult project_toward(const Sieve& sieve, const Eigen::VectorXd& coords,
                                const TargetClass& target) {
  ProjectionResult res;
  res.coords = coords;
  res.achieved = target_distance(sieve, coords, target);
  if (!std::isfinite(target.radius) || res.achieved <= target.radius) return res;

  const Eigen::MatrixXd& G = target.grid;
  const bool sup = target.kind == TargetClass::Kind::SupBall;
  const Eigen::MatrixXd R = sup ? reference_on_grid(sieve, target) : Eigen::MatrixXd();
  // Aim slightly inside the radius so the hinge penalty is active at the boundary.
  const double aim = 0.95 * target.radius;
  const double n_grid = static_cast<double>(G.rows());

  Eigen::VectorXd x = coords;
  double penalty = 10.0;
  for (int round = 0; round < 8; ++round, penalty *= 10.0) {
    Objective f = [&](const Eigen::VectorXd& c, Eigen::VectorXd* g) {
      Eigen::MatrixXd V = sieve.eval_batch(c, G);
      Eigen::MatrixXd U = Eigen::MatrixXd::Zero(V.rows(), V.cols());
      double val = 0.5 * (c - coords).squaredNorm();
      if (sup) {
        Eigen::MatrixXd E = V - R;
        for (Eigen::Index i = 0; i < E.rows(); ++i) {
          for (Eigen::Index j = 0; j < E.cols(); ++j) {
            double over = std::abs(E(i, j)) - aim;
            if (over > 0) {
              val += penalty * over * over / n_grid;
              U(i, j) = 2.0 * penalty * over * (E(i, j) > 0 ? 1.0 : -1.0) / n_grid;
            }
          }
        }
      } else {
        for (Eigen::Index i = 0; i + 1 < G.rows(); ++i) {
          double dx = (G.row(i + 1) - G.row(i)).norm();
          if (dx <= 0) continue;
          Eigen::RowVectorXd dv = V.row(i + 1) - V.row(i);
          double slope = dv.norm() / dx;
          double over = slope - aim;
          if (over > 0) {
            val += penalty * over * over / n_grid;
            Eigen::RowVectorXd dir = dv / (dv.norm() * dx);
            U.row(i + 1) += 2.0 * penalty * over * dir / n_grid;
            U.row(i) -= 2.0 * penalty * over * dir / n_grid;
          }
        }
      }
      if (g) *g = (c - coords) + sieve.grad_coords_batch(c, G, U);
      return val;
    };
    MinimizeOptions opts;
    opts.max_iters = 400;
    opts.grad_tol = 1e-9;
    x = minimize(f, x, [&](Eigen::VectorXd& c) { sieve.project(c); }, opts).x;
    res.achieved = target_distance(sieve, x, target);
    if (res.achieved <= target.radius) {
      res.coords = x;
      res.changed = true;
      return res;
    }
  }
  throw RegularizationFailure("could not bring the sieve within radius " +
                                  std::to_string(target.radius) + " on its grid",
                              res.achieved);
}

}  // namespace aest
