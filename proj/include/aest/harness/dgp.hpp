#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/estimators/moment.hpp"

namespace aest {

class Config;

struct DGPSpec {
  std::string name;
  std::map<std::string, double> params;

  double get(const std::string& key, double fallback) const;
  /// [dgp] section: `name` plus numeric parameters.
  static DGPSpec from_config(const Config& cfg);
};

/// Gauss–Hermite rule for expectations under N(0,1): Σ wᵢ g(xᵢ) ≈ 𝔼 g(Z),
/// exact for polynomials of degree < 2k.
struct Quadrature {
  Eigen::VectorXd nodes, weights;
};
Quadrature normal_quadrature(int k);

/// Seeded simulation design with closed-form truths.
class Dgp {
 public:
  virtual ~Dgp() = default;
  virtual std::string name() const = 0;
  virtual ColumnLayout layout() const = 0;
  /// Rows depend only on (n, seed); the first rows of a larger draw do not
  /// coincide with a smaller draw.
  virtual Dataset generate(std::size_t n, std::uint64_t seed) const = 0;
  /// Finite-dimensional truth: location, structural slope, polynomial
  /// coefficients, V*, or the functional value for the Riesz designs.
  virtual Eigen::VectorXd theta_star() const = 0;
};

std::unique_ptr<Dgp> make_dgp(const DGPSpec& spec);

/// y ~ N(μ·1, σ²I) in `dim` coordinates.
class GaussianLocationDgp : public Dgp {
 public:
  GaussianLocationDgp(double mu, double sigma, std::size_t dim);
  std::string name() const override { return "gaussian_location"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  Eigen::VectorXd theta_star() const override { return Eigen::VectorXd::Constant(dim_, mu_); }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  std::size_t dim() const { return dim_; }

 private:
  double mu_, sigma_;
  std::size_t dim_;
};

/// y = θ*·1 + L e in `dim` coordinates with equicorrelated, unequally scaled
/// Gaussian errors; moments m = y − θ·1 over-identify the scalar θ.
class UnconditionalMomentDgp : public Dgp {
 public:
  UnconditionalMomentDgp(double theta, std::size_t dim, double rho);
  std::string name() const override { return "unconditional_moment"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  Eigen::VectorXd theta_star() const override { return Eigen::VectorXd::Constant(1, theta_); }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  std::size_t dim() const { return dim_; }

 private:
  double theta_;
  std::size_t dim_;
  Eigen::MatrixXd cov_, chol_;
};

/// y = θ*x + e, x = πz + v, e = σ(z)(κv + √(1−κ²)η), z, v, η ~ N(0,1), with
/// σ²(z) = 1 + z² (heteroskedastic) or 1.
class LinearIvDgp : public Dgp {
 public:
  LinearIvDgp(double theta, bool hetero, double endog, double pi);
  std::string name() const override { return "linear_iv_heteroskedastic"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  Eigen::VectorXd theta_star() const override { return Eigen::VectorXd::Constant(1, theta_); }
  /// Oracles for m = y − θx given z.
  ConditionalDesign design() const;
  double cond_sd(double z) const { return hetero_ ? std::sqrt(1.0 + z * z) : 1.0; }
  bool hetero() const { return hetero_; }

 private:
  double theta_;
  bool hetero_;
  double endog_, pi_;
};

/// y = g*(x) + e with g*(x) = a₀ + a₁x + a₂x², x = ρz + √(1−ρ²)u and
/// e = κu + √(1−κ²)η, so x is endogenous and z a valid instrument.
class NonparamIvDgp : public Dgp {
 public:
  NonparamIvDgp(double rho, double endog, Eigen::Vector3d coeffs);
  std::string name() const override { return "nonparam_iv"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  Eigen::VectorXd theta_star() const override { return coeffs_; }
  double g_star(double x) const { return coeffs_[0] + x * (coeffs_[1] + x * coeffs_[2]); }
  /// 𝔼[h(x) | z] by Gauss–Hermite over u.
  double cond_mean(const std::function<double(double)>& h, double z) const;
  /// 𝔼[(𝔼[g*(x) − h(x) | z])²], the population criterion of the conditional
  /// moment game at the candidate h.
  double criterion(const std::function<double(double)>& h) const;
  double rho() const { return rho_; }

 private:
  double rho_, endog_;
  Eigen::VectorXd coeffs_;
  Quadrature q_;
};

/// Finite MDP with rewards R(s,a) ∈ [0,1], random transitions and discount β;
/// data are (s, a, s⁺) with s, a uniform. V* solves the entropy-regularized
/// Bellman equation V(s) = log Σₐ exp(R(s,a) + β Σ P(s⁺|s,a)V(s⁺)).
class TabularMdpDgp : public Dgp {
 public:
  TabularMdpDgp(int states, int actions, double beta, std::uint64_t mdp_seed);
  std::string name() const override { return "tabular_mdp"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  Eigen::VectorXd theta_star() const override { return v_star_; }
  int states() const { return S_; }
  int actions() const { return A_; }
  double beta() const { return beta_; }
  double reward(int s, int a) const { return R_(s, a); }
  /// P(s⁺ | s, a).
  double transition(int s, int a, int sp) const { return P_[static_cast<std::size_t>(s * A_ + a)][sp]; }
  /// log π*(a|s) = R + βPV* − V*.
  double log_policy_star(int s, int a) const;
  /// Soft value iteration with transition matrix P; returns V and the sup
  /// change of the final sweep.
  static Eigen::VectorXd soft_value_iteration(const Eigen::MatrixXd& R,
                                              const std::vector<Eigen::VectorXd>& P, double beta,
                                              double tol, double* residual = nullptr);
  double bellman_residual(const Eigen::VectorXd& V) const;
  const Eigen::MatrixXd& rewards() const { return R_; }
  const std::vector<Eigen::VectorXd>& transitions() const { return P_; }

 private:
  int S_, A_;
  double beta_;
  Eigen::MatrixXd R_;
  std::vector<Eigen::VectorXd> P_;  // indexed s·A + a
  Eigen::VectorXd v_star_;
};

/// x ~ N(0,1), y = g(x) + σε with g(x) = 1 + x + sin x. The mean functional
/// 𝔼[g(x)] has representer 1; the derivative functional 𝔼[g′(x)] has
/// representer x (Gaussian integration by parts).
class RieszDgp : public Dgp {
 public:
  RieszDgp(bool derivative, double noise);
  std::string name() const override { return derivative_ ? "riesz_derivative" : "riesz_mean"; }
  ColumnLayout layout() const override;
  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  /// φ* = 𝔼[g(x)] = 1 or 𝔼[g′(x)] = 1 + e^{−1/2}.
  Eigen::VectorXd theta_star() const override;
  bool derivative() const { return derivative_; }
  double representer(double x) const { return derivative_ ? x : 1.0; }
  static double g(double x) { return 1.0 + x + std::sin(x); }

 private:
  bool derivative_;
  double noise_;
};

}  // namespace aest
