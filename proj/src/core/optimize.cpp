#include "aest/core/optimize.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "aest/core/errors.hpp"

namespace aest {

namespace {

Eigen::VectorXd two_loop(const Eigen::VectorXd& grad, const std::deque<Eigen::VectorXd>& s,
                         const std::deque<Eigen::VectorXd>& y) {
  Eigen::VectorXd q = -grad;
  const std::size_t m = s.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / y[k].dot(s[k]);
    alpha[k] = rho[k] * s[k].dot(q);
    q -= alpha[k] * y[k];
  }
  if (m > 0) q *= s.back().dot(y.back()) / y.back().squaredNorm();
  for (std::size_t k = 0; k < m; ++k) {
    double beta = rho[k] * y[k].dot(q);
    q += (alpha[k] - beta) * s[k];
  }
  return q;
}

}  // namespace

MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0, const Projector& project,
                        const MinimizeOptions& opts) {
  MinimizeResult res;
  Eigen::VectorXd x = std::move(x0);
  if (project) project(x);
  Eigen::VectorXd g(x.size());
  double fx = f(x, &g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.allFinite()) {
    throw NumericalFailure("objective is non-finite at the starting point", 0);
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  Eigen::VectorXd gt(x.size());
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    Eigen::VectorXd pg = x - g;
    if (project) project(pg);
    pg -= x;
    if (pg.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = two_loop(g, s_hist, y_hist);
    bool steepest = s_hist.empty();
    if (!(g.dot(d) < 0.0) || !d.allFinite()) {
      d = -g;
      steepest = true;
      s_hist.clear();
      y_hist.clear();
    }

    bool accepted = false;
    Eigen::VectorXd xt;
    double ft = fx;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      if (steepest && s_hist.empty()) {
        step = std::min(1.0, 1.0 / std::max(1e-300, g.lpNorm<Eigen::Infinity>()));
      }
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        xt = x + step * d;
        if (project) project(xt);
        const double decrease = g.dot(xt - x);
        if ((xt - x).lpNorm<Eigen::Infinity>() == 0.0) break;
        ft = f(xt, &gt);
        ++res.evaluations;
        if (std::isfinite(ft) && gt.allFinite() && ft <= fx + 1e-4 * decrease &&
            (decrease < 0.0 || ft < fx)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (steepest) break;
        d = -g;
        steepest = true;
        s_hist.clear();
        y_hist.clear();
      }
    }
    if (!accepted) {
      // No feasible decrease along the projected gradient: stationary to
      // working precision.
      res.converged = true;
      break;
    }
    if (!std::isfinite(ft)) {
      throw NumericalFailure("non-finite iterate at iteration " + std::to_string(iter), iter);
    }

    Eigen::VectorXd s = xt - x;
    Eigen::VectorXd yv = gt - g;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double change = std::abs(fx - ft);
    x = std::move(xt);
    g = gt;
    fx = ft;
    if (change <= opts.rel_f_tol * std::max({std::abs(fx), 1e-300})) {
      res.converged = true;
      ++iter;
      break;
    }
  }
  res.x = std::move(x);
  res.value = fx;
  res.iterations = iter;
  return res;
}

MinimizeResult maximize(const Objective& g, Eigen::VectorXd x0, const Projector& project,
                        const MinimizeOptions& opts) {
  Objective neg = [&g](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double v = g(x, grad);
    if (grad) *grad = -*grad;
    return -v;
  };
  MinimizeResult r = minimize(neg, std::move(x0), project, opts);
  r.value = -r.value;
  return r;
}

}  // namespace aest
