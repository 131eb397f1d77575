#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/core/saddle_loss.hpp"

namespace aest {

enum class SieveKind { Euclidean, LinearBasis, Network };
enum class Activation { Relu, Tanh };
/// polynomial: monomials of total degree ≤ degree; trig: additive
/// 1, cos(2πkx_j), sin(2πkx_j) for k ≤ degree; indicator: one-hot of the cell
/// of integer-coded inputs with `levels[j]` categories each;
/// piecewise_polynomial: one-dimensional input, polynomial of `degree` on
/// each bin delimited by `knots`.
enum class BasisKind { Polynomial, Trig, Indicator, PiecewisePolynomial };

struct SieveSpec {
  SieveKind kind = SieveKind::Euclidean;
  std::string id = "sieve";
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;

  // Network
  int depth = 2;  // number of affine maps; depth−1 hidden layers
  std::size_t width = 8;
  std::size_t max_nonzero = std::numeric_limits<std::size_t>::max();
  Activation activation = Activation::Tanh;
  double output_clip = std::numeric_limits<double>::infinity();

  // Network and linear basis coefficients
  double weight_clip = std::numeric_limits<double>::infinity();

  // LinearBasis
  BasisKind basis = BasisKind::Polynomial;
  int degree = 1;
  std::vector<int> levels;
  std::vector<double> knots;

  // Euclidean
  Eigen::VectorXd lower, upper;

  static SieveSpec euclidean(std::string id, Eigen::VectorXd lower, Eigen::VectorXd upper);
  static SieveSpec linear(std::string id, std::size_t input_dim, BasisKind basis, int degree,
                          std::size_t output_dim = 1);
  static SieveSpec network(std::string id, std::size_t input_dim, int depth, std::size_t width,
                           Activation act = Activation::Tanh, std::size_t output_dim = 1);
};

/// A finite-dimensional sieve space Θₙ or Λₙ. Function sieves map an input
/// vector x to an output vector; Euclidean sieves have no input and their
/// "output" is the coordinate vector itself.
class Sieve : public ParamSpace {
 public:
  explicit Sieve(SieveSpec spec);

  const SieveSpec& spec() const { return spec_; }
  const std::string& id() const override { return spec_.id; }
  std::size_t dim() const override { return n_params_; }
  /// Width actually used after enforcing the nonzero-parameter budget.
  std::size_t effective_width() const { return width_; }
  std::size_t num_features() const { return n_features_; }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.output_dim; }

  void project(Eigen::VectorXd& coords) const override;
  Eigen::VectorXd random_point(Rng& rng) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

  Eigen::VectorXd eval(const Eigen::VectorXd& coords, Row x) const;
  double eval_scalar(const Eigen::VectorXd& coords, Row x) const;
  /// rows(X) inputs → rows(X) × output_dim outputs.
  Eigen::MatrixXd eval_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const;

  /// ∇_coords ⟨upstream, eval(coords, x)⟩.
  Eigen::VectorXd grad_coords(const Eigen::VectorXd& coords, Row x,
                              const Eigen::VectorXd& upstream) const;
  /// Σᵢ ∇_coords ⟨upstream_i, eval(coords, X_i)⟩ for a batch.
  Eigen::VectorXd grad_coords_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& upstream) const;

  /// Row i holds ∇_x ⟨upstream_i, eval(coords, X_i)⟩. Indicator bases have
  /// zero input gradient; piecewise bases are differentiated within bins.
  Eigen::MatrixXd input_grad_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& upstream) const;

  /// Basis features (LinearBasis only); eval = Cᵀ features with C stored
  /// feature-major.
  Eigen::VectorXd features(Row x) const;
  Eigen::MatrixXd features_batch(const Eigen::MatrixXd& X) const;

 private:
  struct Forward;
  Forward forward(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd net_eval(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const;
  Eigen::VectorXd net_grad(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& upstream, Eigen::MatrixXd* dX = nullptr) const;
  /// ∂features/∂x_j at x.
  Eigen::VectorXd feature_derivative(Row x, std::size_t j) const;

  SieveSpec spec_;
  std::size_t width_ = 0;
  std::size_t n_params_ = 0;
  std::size_t n_features_ = 0;
  std::vector<std::size_t> layer_in_, layer_out_, layer_offset_;
  std::vector<std::vector<int>> monomials_;
};

/// Number of dense parameters of a depth-L network with the given sizes.
std::size_t network_param_count(std::size_t input_dim, std::size_t width, int depth,
                                std::size_t output_dim);

/// Width schedule wₙ = max(1, round(c · n^{r/(r+2)})).
struct GrowthSchedule {
  double r_lower = 2.0;
  double d_star = 1.0;
  double p = 1.0;
  double c_width = 1.0;

  void validate() const;
};

std::size_t width_for_n(const GrowthSchedule& sched, std::size_t n);

/// Constraint set for the regularized refit.
struct TargetClass {
  enum class Kind { SupBall, LipschitzCap };
  Kind kind = Kind::SupBall;
  /// Reference function (SupBall); output_dim values per input.
  std::function<Eigen::VectorXd(Row)> reference;
  double radius = std::numeric_limits<double>::infinity();  // sup radius or Lipschitz cap
  /// Evaluation grid, one input per row.
  Eigen::MatrixXd grid;
};

struct ProjectionResult {
  Eigen::VectorXd coords;
  double achieved = 0.0;  // grid sup-distance (SupBall) or grid Lipschitz estimate
  bool changed = false;
};

/// Grid estimate of the distance to `target` (sup distance or Lipschitz constant).
double target_distance(const Sieve& sieve, const Eigen::VectorXd& coords,
                       const TargetClass& target);

/// Penalized refit pulling the sieve function into `target` on its grid while
/// staying close to `coords`. RegularizationFailure when the radius cannot be met.
ProjectionResult project_toward(const Sieve& sieve, const Eigen::VectorXd& coords,
                                const TargetClass& target);

}  // namespace aest
