#include "aest/harness/drivers.hpp"

#include <cmath>
#include <limits>

#include "aest/core/errors.hpp"
#include "aest/core/nash.hpp"
#include "aest/estimators/riesz.hpp"
#include "aest/inference/inference.hpp"
#include "aest/harness/pool.hpp"

namespace aest {

namespace {

// Solver-side failures are counted; contract violations propagate.
template <class F>
bool guarded(F&& f, std::string* why = nullptr) {
  try {
    f();
    return true;
  } catch (const InvalidArgument&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    if (why) *why = e.what();
    return false;
  }
}

// Budget flag and optional minimax check of one solve.
struct SolveCheck {
  bool within = false, minimax = true;
};

SolveCheck check_solve(const Problem& p, const NashSolution& sol, const Dataset& data,
                       const RunOptions& run) {
  SolveCheck c;
  c.within = sol.within_budget;
  if (run.minimax_check) {
    c.minimax = minimax_consistency_check(*p.loss, sol, data, *p.theta_space, *p.lambda_space,
                                          p.solver.budget);
  }
  return c;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Standard error of the sample variance from the fourth central moment.
double var_se(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const double k = static_cast<double>(v.size());
  m2 /= k;
  m4 /= k;
  return std::sqrt(std::max(0.0, m4 - m2 * m2) / k);
}

}  // namespace

CsvTable RateFitResult::fit_table() const {
  CsvTable t({"slope", "slope_se"});
  t.row({cell(slope), cell(slope_se)});
  return t;
}

void fit_rate(RateFitResult& r) {
  std::vector<double> xs, ys, vs;
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    if (r.censored[i]) continue;
    xs.push_back(std::log(static_cast<double>(r.n_grid[i])));
    ys.push_back(std::log(r.gap_means[i]));
    const double rel = r.gap_ses[i] / r.gap_means[i];
    vs.push_back(rel * rel);
  }
  const std::size_t k = xs.size();
  if (k < 2) {
    r.slope = r.slope_se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  bool weighted = true;
  for (double v : vs) weighted = weighted && v > 0.0;
  Eigen::MatrixXd X(k, 2);
  Eigen::VectorXd y(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = xs[i];
    y[i] = ys[i];
    w[i] = weighted ? 1.0 / vs[i] : 1.0;
  }
  Eigen::Matrix2d A = X.transpose() * w.asDiagonal() * X;
  Eigen::Vector2d beta = A.ldlt().solve(X.transpose() * w.asDiagonal() * y);
  Eigen::VectorXd res = y - X * beta;
  const double chi2 = res.dot(w.asDiagonal() * res);
  const double dof = static_cast<double>(k) - 2.0;
  Eigen::Matrix2d cov = A.inverse();
  double scale = 1.0;
  if (weighted) {
    if (dof > 0) scale = std::max(1.0, chi2 / dof);
  } else {
    scale = dof > 0 ? chi2 / dof : 0.0;
  }
  r.slope = beta[1];
  r.slope_se = std::sqrt(cov(1, 1) * scale);
}

RateFitResult run_rate_experiment(const DGPSpec& dgp_spec, const ProblemSpec& problem,
                                  const std::vector<std::size_t>& n_grid, std::size_t replicas,
                                  const RunOptions& run) {
  if (n_grid.size() < 2 || replicas < 1) throw InvalidArgument("rate fit needs ≥ 2 sizes and ≥ 1 replica");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) throw InvalidArgument("n_grid must be strictly increasing");
  }
  auto dgp = make_dgp(dgp_spec);
  struct Out {
    double gap = std::nan(""), eta_tilde = 0.0, eta = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    SolveCheck check;
  };
  const std::size_t tasks = n_grid.size() * replicas;
  auto outs = parallel_map<Out>(tasks, run.workers, [&](std::size_t t) {
    const std::size_t n = n_grid[t / replicas], r = t % replicas;
    Out o;
    o.seed = derive_seed(run.seed, {r, n});
    o.ok = guarded([&] {
      ReplicaSolve rs = solve_replica(*dgp, problem, n, o.seed, run.solver_overrides);
      o.gap = rs.problem.population_gap(rs.sol.theta_hat.coords);
      o.eta_tilde = rs.sol.eta_tilde;
      o.eta = rs.sol.eta;
      o.check = check_solve(rs.problem, rs.sol, rs.data, run);
    });
    return o;
  });
  RateFitResult res;
  res.n_grid = n_grid;
  res.replicas = replicas;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    std::vector<double> gaps;
    for (std::size_t r = 0; r < replicas; ++r) {
      const Out& o = outs[i * replicas + r];
      res.rows.row({cell(n_grid[i]), cell(r), cell(o.gap), cell(o.seed),
                    cell(!o.ok), cell(o.eta_tilde), cell(o.eta), cell(o.check.within)});
      if (!o.ok) {
        ++res.failures;
        continue;
      }
      if (!o.check.within) ++res.over_budget;
      if (!o.check.minimax) ++res.minimax_failures;
      gaps.push_back(o.gap);
    }
    const double m = gaps.empty() ? 0.0 : sample_mean(gaps);
    const double se = gaps.size() > 1 ? std::sqrt(sample_var(gaps) / gaps.size()) : 0.0;
    res.gap_means.push_back(m);
    res.gap_ses.push_back(se);
    res.censored.push_back(gaps.empty() || m <= 0.0 || m <= 2.0 * se);
  }
  fit_rate(res);
  return res;
}

CoverageReport run_coverage(const DGPSpec& dgp_spec, const ProblemSpec& problem, double level,
                            std::size_t replicas, std::size_t n, const RunOptions& run,
                            double variance_scale) {
  if (replicas < 1) throw InvalidArgument("coverage needs at least one replica");
  if (!(variance_scale > 0.0)) throw InvalidArgument("variance scale must be positive");
  const double z = normal_two_sided_quantile(level);
  auto dgp = make_dgp(dgp_spec);
  CoverageReport rep;
  rep.level = level;
  rep.truth = dgp->theta_star()[0];
  struct Out {
    double est = std::nan(""), se = std::nan(""), V = std::nan("");
    std::uint64_t seed = 0;
    bool ok = false;
    SolveCheck check;
  };
  auto outs = parallel_map<Out>(replicas, run.workers, [&](std::size_t r) {
    Out o;
    o.seed = derive_seed(run.seed, {r, n});
    o.ok = guarded([&] {
      ReplicaSolve rs = solve_replica(*dgp, problem, n, o.seed, run.solver_overrides);
      o.check = check_solve(rs.problem, rs.sol, rs.data, run);
      if (problem.family == "riesz") {
        const auto& loss = dynamic_cast<const RieszLoss&>(*rs.problem.loss);
        const Eigen::VectorXd c = rs.sol.theta_hat.coords;
        const Sieve& th = loss.representer_sieve();
        FunctionalEstimate fe = orthogonalized_functional(
            loss.problem(), [&](Row x) { return th.eval_scalar(c, x); }, rs.data);
        o.est = fe.estimate;
        o.se = fe.se;
        o.V = fe.se * fe.se * static_cast<double>(n);
      } else {
        Eigen::VectorXd zeta = Eigen::VectorXd::Zero(rs.sol.theta_hat.coords.size());
        zeta[0] = 1.0;
        VarianceReport v = variance_estimate(*rs.problem.loss, rs.sol.theta_hat.coords,
                                             rs.sol.lambda_hat.coords, rs.data, zeta, level);
        o.est = v.estimate;
        o.se = v.se;
        o.V = v.V_hat;
      }
    });
    return o;
  });
  std::vector<double> scaled;
  double width = 0.0, vsum = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    const Out& o = outs[r];
    double lo = std::nan(""), hi = std::nan("");
    bool covered = false;
    if (o.ok) {
      const double half = z * o.se * std::sqrt(variance_scale);
      lo = std::isinf(z) ? -INFINITY : o.est - half;
      hi = std::isinf(z) ? INFINITY : o.est + half;
      covered = lo <= rep.truth && rep.truth <= hi;
      rep.hits += covered;
      ++rep.replicas;
      rep.over_budget += !o.check.within;
      rep.minimax_failures += !o.check.minimax;
      width += hi - lo;
      vsum += o.V;
      scaled.push_back(std::sqrt(static_cast<double>(n)) * (o.est - rep.truth));
    } else {
      ++rep.failures;
    }
    rep.rows.row({cell(r), cell(o.seed), cell(o.est), cell(lo), cell(hi),
                  cell(covered), cell(!o.ok), cell(o.V)});
  }
  if (rep.replicas == 0) throw NumericalFailure("every coverage replica failed");
  rep.coverage = static_cast<double>(rep.hits) / static_cast<double>(rep.replicas);
  rep.mean_ci_width = width / static_cast<double>(rep.replicas);
  rep.mean_V_hat = vsum / static_cast<double>(rep.replicas);
  rep.scaled_variance = scaled.size() > 1 ? sample_var(scaled) : std::nan("");
  return rep;
}

CsvTable EfficiencyReport::summary() const {
  CsvTable t({"estimator", "mc_variance", "mc_variance_se", "V_sandwich", "V_literal", "V_star",
              "replicas", "failures"});
  t.row({"cmr", cell(var_cmr), cell(var_cmr_se), cell(V_sandwich), cell(V_literal), cell(V_star),
         cell(replicas), cell(failures)});
  t.row({"cgel", cell(var_cgel), cell(var_cgel_se), cell(V_sandwich), cell(V_literal), cell(V_star),
         cell(replicas), cell(failures)});
  t.row({"cmr_minus_cgel", cell(diff), cell(diff_se), cell(V_sandwich), cell(V_literal), cell(V_star),
         cell(replicas), cell(failures)});
  return t;
}

EfficiencyReport run_efficiency_compare(const DGPSpec& dgp_spec, const ProblemSpec& cgel,
                                        std::size_t replicas, std::size_t n,
                                        const RunOptions& run) {
  if (replicas < 2) throw InvalidArgument("efficiency comparison needs at least two replicas");
  auto dgp = make_dgp(dgp_spec);
  auto* iv = dynamic_cast<const LinearIvDgp*>(dgp.get());
  if (!iv) throw InvalidArgument("efficiency comparison needs the linear_iv_heteroskedastic design");
  ProblemSpec cmr = cgel;
  cmr.family = "cmr";
  ProblemSpec eff = cgel;
  eff.family = "cgel";
  const double t0 = iv->theta_star()[0];
  struct Out {
    double a = std::nan(""), b = std::nan("");
    std::uint64_t seed = 0;
    bool ok = false;
    SolveCheck ca, cb;
  };
  auto outs = parallel_map<Out>(replicas, run.workers, [&](std::size_t r) {
    Out o;
    o.seed = derive_seed(run.seed, {r, n});
    o.ok = guarded([&] {
      Dataset data = dgp->generate(n, derive_seed(o.seed, {0xda7a, n}));
      Problem pa = build_problem(*dgp, cmr, data, derive_seed(o.seed, {0x9b, n}));
      Problem pb = build_problem(*dgp, eff, data, derive_seed(o.seed, {0x9c, n}));
      if (run.solver_overrides) {
        run.solver_overrides(pa.solver);
        run.solver_overrides(pb.solver);
      }
      NashSolution sa = solve(*pa.loss, *pa.theta_space, *pa.lambda_space, data, pa.solver, pa.warm);
      NashSolution sb = solve(*pb.loss, *pb.theta_space, *pb.lambda_space, data, pb.solver, pb.warm);
      o.a = sa.theta_hat.coords[0];
      o.b = sb.theta_hat.coords[0];
      o.ca = check_solve(pa, sa, data, run);
      o.cb = check_solve(pb, sb, data, run);
    });
    return o;
  });
  EfficiencyReport rep;
  std::vector<double> a, b;
  for (std::size_t r = 0; r < replicas; ++r) {
    const Out& o = outs[r];
    rep.rows.row({cell(r), cell(o.seed), cell(o.a), cell(o.b), cell(!o.ok)});
    if (!o.ok) {
      ++rep.failures;
      continue;
    }
    rep.over_budget += !o.ca.within + !o.cb.within;
    rep.minimax_failures += !o.ca.minimax + !o.cb.minimax;
    a.push_back(std::sqrt(static_cast<double>(n)) * (o.a - t0));
    b.push_back(std::sqrt(static_cast<double>(n)) * (o.b - t0));
  }
  rep.replicas = a.size();
  if (rep.replicas < 2) throw NumericalFailure("too few successful efficiency replicas");
  rep.var_cmr = sample_var(a);
  rep.var_cgel = sample_var(b);
  rep.var_cmr_se = var_se(a);
  rep.var_cgel_se = var_se(b);
  const double ma = sample_mean(a), mb = sample_mean(b);
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = (a[i] - ma) * (a[i] - ma) - (b[i] - mb) * (b[i] - mb);
  rep.diff = rep.var_cmr - rep.var_cgel;
  rep.diff_se = std::sqrt(sample_var(d) / static_cast<double>(d.size()));
  const Quadrature q = normal_quadrature(80);
  Eigen::MatrixXd nodes = q.nodes;
  CmrVariances v = cmr_variance_formulas(iv->design(), iv->theta_star(), nodes, q.weights);
  rep.V_sandwich = v.V_sandwich(0, 0);
  rep.V_literal = v.V_literal(0, 0);
  rep.V_star = v.V_star(0, 0);
  return rep;
}

DivergenceReport run_divergence_recovery(const DGPSpec& dgp_spec, const ProblemSpec& fgan,
                                         const std::vector<std::size_t>& n_grid,
                                         std::size_t replicas, const RunOptions& run) {
  if (fgan.family != "fgan") throw InvalidArgument("divergence recovery uses the fgan family");
  if (dgp_spec.name != "gaussian_location") {
    throw InvalidArgument("divergence recovery needs the gaussian_location design");
  }
  auto dgp = make_dgp(dgp_spec);
  struct Out {
    double theta = std::nan(""), div = std::nan("");
    std::uint64_t seed = 0;
    bool ok = false;
    SolveCheck check;
  };
  const std::size_t tasks = n_grid.size() * replicas;
  auto outs = parallel_map<Out>(tasks, run.workers, [&](std::size_t t) {
    const std::size_t n = n_grid[t / replicas], r = t % replicas;
    Out o;
    o.seed = derive_seed(run.seed, {r, n});
    o.ok = guarded([&] {
      ReplicaSolve rs = solve_replica(*dgp, fgan, n, o.seed, run.solver_overrides);
      o.theta = rs.sol.theta_hat.coords[0];
      o.div = rs.problem.population_gap(rs.sol.theta_hat.coords);
      o.check = check_solve(rs.problem, rs.sol, rs.data, run);
    });
    return o;
  });
  DivergenceReport rep;
  rep.fit.n_grid = n_grid;
  rep.fit.replicas = replicas;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    std::vector<double> divs;
    for (std::size_t r = 0; r < replicas; ++r) {
      const Out& o = outs[i * replicas + r];
      rep.rows.row({cell(n_grid[i]), cell(r), cell(o.theta), cell(o.div),
                    cell(o.seed), cell(!o.ok)});
      if (o.ok) {
        divs.push_back(o.div);
        rep.fit.over_budget += !o.check.within;
        rep.fit.minimax_failures += !o.check.minimax;
      } else {
        ++rep.fit.failures;
      }
    }
    const double m = divs.empty() ? 0.0 : sample_mean(divs);
    const double se = divs.size() > 1 ? std::sqrt(sample_var(divs) / divs.size()) : 0.0;
    rep.fit.gap_means.push_back(m);
    rep.fit.gap_ses.push_back(se);
    rep.fit.censored.push_back(divs.empty() || m <= 0.0 || m <= 2.0 * se);
  }
  if (n_grid.size() >= 2) fit_rate(rep.fit);
  return rep;
}

}  // namespace aest
