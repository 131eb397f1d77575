#pragma once

#include <functional>
#include <limits>
#include <string>

#include "aest/core/dataset.hpp"
#include "aest/core/rng.hpp"

namespace aest {

enum class DivergenceName { TotalVariation, KL, ReverseKL, ChiSquared, SquaredHellinger, RescaledJS };

std::string to_string(DivergenceName name);
/// Accepts tv, kl, reverse_kl, chi2 (or chi_squared), squared_hellinger, rescaled_js.
DivergenceName divergence_from_string(const std::string& s);

/// Real interval with independent openness at each end; infinite ends are open.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool lower_open = true;
  bool upper_open = true;

  bool contains(double t) const;
  bool bounded_below() const { return lower > -std::numeric_limits<double>::infinity(); }
  bool bounded_above() const { return upper < std::numeric_limits<double>::infinity(); }
  std::string str() const;
};

/// One row of the f-divergence table, optionally in normalized form
///   f_n(t) = (f(t) − b − a(t−1))/c,   f_n*(s) = (f*(cs+a) + b − a)/c,
/// with b = f(1), a = f′(1), c = f″(1) of the raw row. The raw row has
/// b=a=0, c=1. Only rescaled JS has b ≠ 0 (f(1) = −log 4).
class FDivergence {
 public:
  static FDivergence named(DivergenceName name);

  DivergenceName name() const { return name_; }
  std::string label() const;
  bool normalized() const { return offset_ != 0.0 || shift_ != 0.0 || scale_ != 1.0; }
  double offset() const { return offset_; }
  double shift() const { return shift_; }
  double scale() const { return scale_; }

  double f(double t) const;
  double f_prime(double t) const;
  double f_second(double t) const;
  /// Throws DomainViolation outside conjugate_domain().
  double f_star(double t) const;
  double f_star_prime(double t) const;
  double f_star_second(double t) const;

  Interval f_domain() const;
  Interval conjugate_domain() const;

  /// Strictly increasing map of ℝ onto the interior of conjugate_domain():
  ///   ℝ: identity;
  ///   (−∞,U) with U>0: U(1−e^{−u/U});  (L,∞) with L<0: L(1−e^{−u/L})
  ///     (both fix 0 with unit slope);
  ///   (−∞,U) with U≤0: U − softplus(U−u);  (L,∞) with L≥0: L + softplus(u−L);
  ///   bounded (L,U): m + h·tanh((u−m)/h) with m the midpoint, h the half width.
  double squash(double u) const;
  double squash_prime(double u) const;

 private:
  FDivergence(DivergenceName name, double offset, double shift, double scale)
      : name_(name), offset_(offset), shift_(shift), scale_(scale) {}
  friend FDivergence normalize(const FDivergence& div);

  DivergenceName name_;
  double offset_ = 0.0;
  double shift_ = 0.0;
  double scale_ = 1.0;
};

/// f ← (f − f(1) − f′(1)(t−1))/f″(1). Idempotent. Throws InvalidDivergence when f is
/// not differentiable at 1 (total variation) or f″(1) ≤ 0.
FDivergence normalize(const FDivergence& div);

/// f*(t) per the closed forms; DomainViolation outside the domain.
double conjugate_eval(const FDivergence& div, double t);

struct SearchGrid {
  double lo = -10.0;
  double hi = 10.0;
  int steps = 20001;
};

/// sup_x h(x) over `allowed` ∩ [grid.lo, grid.hi] by grid search and golden
/// refinement. A maximizer on the grid edge is accepted only when the edge is
/// a closed end of `allowed`; otherwise BracketFailure.
double grid_sup(const std::function<double(double)>& h, const Interval& allowed,
                const SearchGrid& grid);

/// Brute-force f*(t) = sup_λ λt − f(λ), the independent check on conjugate_eval.
double conjugate_oracle(const FDivergence& div, double t, const SearchGrid& grid = {});

/// Brute-force (f*)*(λ) = sup_t tλ − f*(t); recovers f by biconjugacy.
double biconjugate_oracle(const FDivergence& div, double lambda, const SearchGrid& grid = {});

}  // namespace aest
