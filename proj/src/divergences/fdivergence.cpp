#include "aest/divergences/fdivergence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "aest/core/errors.hpp"

namespace aest {

namespace {

using N = DivergenceName;
constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogx(double t) { return t == 0.0 ? 0.0 : t * std::log(t); }

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double raw_f(N n, double t) {
  switch (n) {
    case N::TotalVariation: return std::abs(t - 1.0) / 2.0;
    case N::KL: return t < 0.0 ? kInf : xlogx(t);
    case N::ReverseKL: return t <= 0.0 ? kInf : -std::log(t);
    case N::ChiSquared: return (t - 1.0) * (t - 1.0);
    case N::SquaredHellinger: {
      if (t < 0.0) return kInf;
      double r = std::sqrt(t) - 1.0;
      return r * r;
    }
    case N::RescaledJS: return t < 0.0 ? kInf : xlogx(t) - (1.0 + t) * std::log1p(t);
  }
  return kInf;
}

double raw_fp(N n, double t) {
  switch (n) {
    case N::TotalVariation: return t > 1.0 ? 0.5 : (t < 1.0 ? -0.5 : 0.0);
    case N::KL: return std::log(t) + 1.0;
    case N::ReverseKL: return -1.0 / t;
    case N::ChiSquared: return 2.0 * (t - 1.0);
    case N::SquaredHellinger: return 1.0 - 1.0 / std::sqrt(t);
    case N::RescaledJS: return std::log(t / (1.0 + t));
  }
  return 0.0;
}

double raw_fpp(N n, double t) {
  switch (n) {
    case N::TotalVariation: return 0.0;
    case N::KL: return 1.0 / t;
    case N::ReverseKL: return 1.0 / (t * t);
    case N::ChiSquared: return 2.0;
    case N::SquaredHellinger: return 0.5 / (t * std::sqrt(t));
    case N::RescaledJS: return 1.0 / (t * (1.0 + t));
  }
  return 0.0;
}

Interval raw_conj_domain(N n) {
  switch (n) {
    case N::TotalVariation: return {-0.5, 0.5, false, false};
    case N::KL:
    case N::ChiSquared: return {};
    case N::ReverseKL:
    case N::RescaledJS: return {-kInf, 0.0, true, true};
    case N::SquaredHellinger: return {-kInf, 1.0, true, true};
  }
  return {};
}

Interval raw_f_domain(N n) {
  switch (n) {
    case N::TotalVariation:
    case N::ChiSquared: return {};
    case N::ReverseKL: return {0.0, kInf, true, true};
    case N::KL:
    case N::SquaredHellinger:
    case N::RescaledJS: return {0.0, kInf, false, true};
  }
  return {};
}

// Closed forms; callers have already checked the domain.
double raw_fstar(N n, double t) {
  switch (n) {
    case N::TotalVariation: return t;
    case N::KL: return std::exp(t - 1.0);
    case N::ReverseKL: return -std::log(-t) - 1.0;
    case N::ChiSquared: return t + t * t / 4.0;
    case N::SquaredHellinger: return t / (1.0 - t);
    case N::RescaledJS: return -std::log(-std::expm1(t));
  }
  return kInf;
}

double raw_fstar_prime(N n, double t) {
  switch (n) {
    case N::TotalVariation: return 1.0;
    case N::KL: return std::exp(t - 1.0);
    case N::ReverseKL: return -1.0 / t;
    case N::ChiSquared: return 1.0 + t / 2.0;
    case N::SquaredHellinger: return 1.0 / ((1.0 - t) * (1.0 - t));
    case N::RescaledJS: return -std::exp(t) / std::expm1(t);
  }
  return kInf;
}

double raw_fstar_second(N n, double t) {
  switch (n) {
    case N::TotalVariation: return 0.0;
    case N::KL: return std::exp(t - 1.0);
    case N::ReverseKL: return 1.0 / (t * t);
    case N::ChiSquared: return 0.5;
    case N::SquaredHellinger: return 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    case N::RescaledJS: {
      double d = std::expm1(t);
      return std::exp(t) / (d * d);
    }
  }
  return kInf;
}

double golden_max(const std::function<double(double)>& h, double a, double b, double* arg) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = h(c), fd = h(d);
  for (int i = 0; i < 200 && (b - a) > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = h(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = h(d);
    }
  }
  if (arg) *arg = fc >= fd ? c : d;
  return std::max(fc, fd);
}

}  // namespace

std::string to_string(DivergenceName name) {
  switch (name) {
    case N::TotalVariation: return "tv";
    case N::KL: return "kl";
    case N::ReverseKL: return "reverse_kl";
    case N::ChiSquared: return "chi2";
    case N::SquaredHellinger: return "squared_hellinger";
    case N::RescaledJS: return "rescaled_js";
  }
  return "?";
}

DivergenceName divergence_from_string(const std::string& s) {
  if (s == "tv" || s == "total_variation") return N::TotalVariation;
  if (s == "kl") return N::KL;
  if (s == "reverse_kl") return N::ReverseKL;
  if (s == "chi2" || s == "chi_squared") return N::ChiSquared;
  if (s == "squared_hellinger" || s == "hellinger") return N::SquaredHellinger;
  if (s == "rescaled_js" || s == "js") return N::RescaledJS;
  throw InvalidArgument("unknown divergence '" + s + "'");
}

bool Interval::contains(double t) const {
  if (std::isnan(t)) return false;
  bool lo_ok = lower_open ? t > lower : t >= lower;
  bool hi_ok = upper_open ? t < upper : t <= upper;
  return lo_ok && hi_ok;
}

std::string Interval::str() const {
  std::ostringstream os;
  os << (lower_open ? "(" : "[") << lower << ", " << upper << (upper_open ? ")" : "]");
  return os.str();
}

FDivergence FDivergence::named(DivergenceName name) { return FDivergence(name, 0.0, 0.0, 1.0); }

std::string FDivergence::label() const {
  return to_string(name_) + (normalized() ? " (normalized)" : "");
}

double FDivergence::f(double t) const {
  return (raw_f(name_, t) - offset_ - shift_ * (t - 1.0)) / scale_;
}

double FDivergence::f_prime(double t) const { return (raw_fp(name_, t) - shift_) / scale_; }

double FDivergence::f_second(double t) const { return raw_fpp(name_, t) / scale_; }

double FDivergence::f_star(double t) const {
  if (!conjugate_domain().contains(t)) {
    throw DomainViolation(label(), t, conjugate_domain().str());
  }
  return (raw_fstar(name_, scale_ * t + shift_) + offset_ - shift_) / scale_;
}

double FDivergence::f_star_prime(double t) const {
  if (!conjugate_domain().contains(t)) {
    throw DomainViolation(label(), t, conjugate_domain().str());
  }
  return raw_fstar_prime(name_, scale_ * t + shift_);
}

double FDivergence::f_star_second(double t) const {
  if (!conjugate_domain().contains(t)) {
    throw DomainViolation(label(), t, conjugate_domain().str());
  }
  return scale_ * raw_fstar_second(name_, scale_ * t + shift_);
}

Interval FDivergence::f_domain() const { return raw_f_domain(name_); }

Interval FDivergence::conjugate_domain() const {
  Interval d = raw_conj_domain(name_);
  if (d.bounded_below()) d.lower = (d.lower - shift_) / scale_;
  if (d.bounded_above()) d.upper = (d.upper - shift_) / scale_;
  return d;
}

double FDivergence::squash(double u) const {
  Interval d = conjugate_domain();
  if (!d.bounded_below() && !d.bounded_above()) return u;
  if (d.bounded_below() && d.bounded_above()) {
    double m = 0.5 * (d.lower + d.upper), h = 0.5 * (d.upper - d.lower);
    return m + h * std::tanh((u - m) / h);
  }
  if (d.bounded_above()) {
    double U = d.upper;
    return U > 0.0 ? U * -std::expm1(-u / U) : U - softplus(U - u);
  }
  double L = d.lower;
  return L < 0.0 ? L * -std::expm1(-u / L) : L + softplus(u - L);
}

double FDivergence::squash_prime(double u) const {
  Interval d = conjugate_domain();
  if (!d.bounded_below() && !d.bounded_above()) return 1.0;
  if (d.bounded_below() && d.bounded_above()) {
    double m = 0.5 * (d.lower + d.upper), h = 0.5 * (d.upper - d.lower);
    double th = std::tanh((u - m) / h);
    return 1.0 - th * th;
  }
  if (d.bounded_above()) {
    double U = d.upper;
    return U > 0.0 ? std::exp(-u / U) : sigmoid(U - u);
  }
  double L = d.lower;
  return L < 0.0 ? std::exp(-u / L) : sigmoid(u - L);
}

FDivergence normalize(const FDivergence& div) {
  const double h = 1e-6;
  const double left = (div.f(1.0) - div.f(1.0 - h)) / h;
  const double right = (div.f(1.0 + h) - div.f(1.0)) / h;
  if (!std::isfinite(left) || !std::isfinite(right) || std::abs(left - right) > 1e-3) {
    throw InvalidDivergence(div.label() + " is not differentiable at 1 and cannot be normalized");
  }
  const double a = div.f_prime(1.0);
  const double c = div.f_second(1.0);
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InvalidDivergence(div.label() + " has f''(1) <= 0");
  }
  const double b = div.f(1.0);
  return FDivergence(div.name_, div.offset_ + div.scale_ * b, div.shift_ + div.scale_ * a,
                     div.scale_ * c);
}

double conjugate_eval(const FDivergence& div, double t) { return div.f_star(t); }

double grid_sup(const std::function<double(double)>& h, const Interval& allowed,
                const SearchGrid& grid) {
  if (grid.steps < 3 || !(grid.hi > grid.lo)) throw InvalidArgument("degenerate search grid");
  double a = std::max(grid.lo, allowed.lower);
  double b = std::min(grid.hi, allowed.upper);
  const bool a_closed_edge = a == allowed.lower && !allowed.lower_open;
  const bool b_closed_edge = b == allowed.upper && !allowed.upper_open;
  if (a == allowed.lower && allowed.lower_open) a += 1e-12 * (1.0 + std::abs(a));
  if (b == allowed.upper && allowed.upper_open) b -= 1e-12 * (1.0 + std::abs(b));
  if (!(b > a)) throw InvalidArgument("search grid misses the allowed interval");

  auto safe = [&h](double x) {
    try {
      double v = h(x);
      return std::isnan(v) ? -kInf : v;
    } catch (const DomainViolation&) {
      return -kInf;
    }
  };
  const int steps = grid.steps;
  std::vector<double> xs(steps), vs(steps);
  int best = 0;
  for (int i = 0; i < steps; ++i) {
    xs[i] = a + (b - a) * i / (steps - 1);
    vs[i] = safe(xs[i]);
    if (vs[i] > vs[best]) best = i;
  }
  if (!std::isfinite(vs[best])) throw BracketFailure("objective is not finite on the search grid");
  if ((best == 0 && !a_closed_edge) || (best == steps - 1 && !b_closed_edge)) {
    std::ostringstream os;
    os << "maximizer at grid edge " << xs[best] << "; widen the grid";
    throw BracketFailure(os.str());
  }
  const double lo = xs[std::max(0, best - 1)];
  const double hi = xs[std::min(steps - 1, best + 1)];
  return std::max(vs[best], golden_max(safe, lo, hi, nullptr));
}

double conjugate_oracle(const FDivergence& div, double t, const SearchGrid& grid) {
  return grid_sup([&](double lam) { return lam * t - div.f(lam); }, div.f_domain(), grid);
}

double biconjugate_oracle(const FDivergence& div, double lambda, const SearchGrid& grid) {
  return grid_sup([&](double t) { return t * lambda - div.f_star(t); }, div.conjugate_domain(),
                  grid);
}

}  // namespace aest
