#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aest/core/errors.hpp"
#include "aest/core/nash.hpp"
#include "aest/divergences/fdivergence.hpp"
#include "aest/estimators/gel.hpp"
#include "aest/estimators/moment.hpp"
#include "aest/harness/config.hpp"
#include "aest/harness/csv.hpp"
#include "aest/harness/dgp.hpp"
#include "aest/harness/drivers.hpp"
#include "aest/harness/problems.hpp"

using namespace aest;

namespace {

struct Common {
  std::string config, out;
  std::int64_t seed = -1;
  std::size_t workers = 0;
};

struct Context {
  Config cfg;
  DGPSpec dgp;
  ProblemSpec problem;
  RunOptions run;
};

Context load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config", "a config file is required");
  Context ctx;
  ctx.cfg = Config::from_file(c.config);
  ctx.dgp = DGPSpec::from_config(ctx.cfg);
  ctx.problem = ProblemSpec::from_config(ctx.cfg);
  ctx.run.seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed)
                             : static_cast<std::uint64_t>(ctx.cfg.integer("experiment.seed", 0));
  ctx.run.workers = c.workers > 0 ? c.workers
                                  : static_cast<std::size_t>(ctx.cfg.integer("experiment.workers", 1));
  ctx.run.minimax_check = ctx.cfg.flag("experiment.minimax_check", false);
  // Validate the [solver] section once up front so errors surface as config errors.
  (void)solver_from_config(ctx.cfg, SolverConfig{});
  const Config cfg = ctx.cfg;
  ctx.run.solver_overrides = [cfg](SolverConfig& s) { s = solver_from_config(cfg, s); };
  return ctx;
}

std::size_t count(const Config& cfg, const std::string& path, long long fallback) {
  const long long v = cfg.integer(path, fallback);
  if (v < 1) throw ConfigError(path, "must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> n_grid(const Config& cfg) {
  std::vector<std::size_t> out;
  for (double v : cfg.reals("experiment.n_grid", {500, 1000, 2000, 4000, 8000})) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("experiment.n_grid", "sizes must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// rates.csv -> rates_fit.csv next to it.
std::string companion(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + "_" + suffix + ".csv")).string();
}

// Main table to --out, or stdout when no path is given.
void emit(const CsvTable& t, const std::string& out) {
  if (out.empty()) {
    t.write(std::cout);
  } else {
    t.write(out);
  }
}

void emit_companion(const CsvTable& t, const std::string& out, const std::string& suffix) {
  if (!out.empty()) t.write(companion(out, suffix));
}

// One-line summary; stderr when the table itself goes to stdout.
std::ostream& summary(const Common& c) { return c.out.empty() ? std::cerr : std::cout; }

int estimate(const Common& c) {
  Context ctx = load(c);
  const std::size_t n = count(ctx.cfg, "experiment.n", 1000);
  auto dgp = make_dgp(ctx.dgp);
  ReplicaSolve rs = solve_replica(*dgp, ctx.problem, n, ctx.run.seed, ctx.run.solver_overrides);
  const double gap = rs.problem.population_gap(rs.sol.theta_hat.coords);
  CsvTable t({"coordinate", "theta_hat", "theta_star"});
  const Eigen::VectorXd truth = dgp->theta_star();
  for (Eigen::Index j = 0; j < rs.sol.theta_hat.coords.size(); ++j) {
    t.row({cell(static_cast<long long>(j)), cell(rs.sol.theta_hat.coords[j]),
           j < truth.size() ? cell(truth[j]) : std::string("")});
  }
  emit(t, c.out);
  summary(c) << "estimate: " << ctx.problem.family << " on " << ctx.dgp.name << ", n=" << n
             << ", theta_hat[0]=" << rs.sol.theta_hat.coords[0] << ", gap=" << gap
             << ", eta_tilde=" << rs.sol.eta_tilde << ", eta=" << rs.sol.eta
             << ", within_budget=" << rs.sol.within_budget << "\n";
  return 0;
}

int rates(const Common& c) {
  Context ctx = load(c);
  const RateFitResult r = run_rate_experiment(ctx.dgp, ctx.problem, n_grid(ctx.cfg),
                                              count(ctx.cfg, "experiment.replicas", 50), ctx.run);
  emit(r.rows, c.out);
  emit_companion(r.fit_table(), c.out, "fit");
  std::size_t censored = 0;
  for (bool b : r.censored) censored += b;
  summary(c) << "rates: slope " << r.slope << " (se " << r.slope_se << "), " << censored
             << " censored sizes, " << r.failures << " failures, " << r.over_budget
             << " over budget\n";
  return 0;
}

int coverage(const Common& c) {
  Context ctx = load(c);
  const CoverageReport r = run_coverage(ctx.dgp, ctx.problem, ctx.cfg.real("experiment.level", 0.95),
                                        count(ctx.cfg, "experiment.replicas", 500),
                                        count(ctx.cfg, "experiment.n", 500), ctx.run,
                                        ctx.cfg.real("experiment.variance_scale", 1.0));
  emit(r.rows, c.out);
  summary(c) << "coverage: " << r.coverage << " (" << r.hits << "/" << r.replicas << "), mean width "
             << r.mean_ci_width << ", scaled variance " << r.scaled_variance << ", " << r.failures
             << " failures\n";
  return 0;
}

int efficiency(const Common& c) {
  Context ctx = load(c);
  const EfficiencyReport r = run_efficiency_compare(ctx.dgp, ctx.problem,
                                                    count(ctx.cfg, "experiment.replicas", 500),
                                                    count(ctx.cfg, "experiment.n", 2000), ctx.run);
  emit(r.rows, c.out);
  emit_companion(r.summary(), c.out, "summary");
  summary(c) << "efficiency: var cmr " << r.var_cmr << ", var cgel " << r.var_cgel << ", gap "
             << r.diff << " (se " << r.diff_se << "), V_sandwich " << r.V_sandwich << ", V_star "
             << r.V_star << ", V_literal " << r.V_literal << ", " << r.failures << " failures\n";
  return 0;
}

int divergence(const Common& c) {
  Context ctx = load(c);
  const DivergenceReport r = run_divergence_recovery(ctx.dgp, ctx.problem, n_grid(ctx.cfg),
                                                     count(ctx.cfg, "experiment.replicas", 50), ctx.run);
  emit(r.rows, c.out);
  emit_companion(r.fit.fit_table(), c.out, "fit");
  summary(c) << "divergence: slope " << r.fit.slope << " (se " << r.fit.slope_se << "), "
             << r.fit.failures << " failures\n";
  return 0;
}

int nash_check(const Common& c) {
  Context ctx = load(c);
  const std::size_t n = count(ctx.cfg, "experiment.n", 1000);
  auto dgp = make_dgp(ctx.dgp);
  ReplicaSolve rs = solve_replica(*dgp, ctx.problem, n, ctx.run.seed, ctx.run.solver_overrides);
  const MinimaxCheck mc = minimax_consistency(*rs.problem.loss, rs.sol, rs.data, *rs.problem.theta_space,
                                              *rs.problem.lambda_space, rs.problem.solver.budget);
  const ToleranceBudget& b = rs.problem.solver.budget;
  CsvTable t({"eta_tilde", "eta", "eta_tilde_max", "eta_max", "within_budget", "objective", "minimax",
              "minimax_passed"});
  t.row({cell(rs.sol.eta_tilde), cell(rs.sol.eta), cell(b.eta_tilde_max), cell(b.eta_max),
         cell(rs.sol.within_budget), cell(mc.objective), cell(mc.minimax), cell(mc.passed)});
  emit(t, c.out);
  const bool ok = rs.sol.within_budget && mc.passed;
  summary(c) << "nash-check: " << (ok ? "certified" : "NOT certified") << ", eta_tilde "
             << rs.sol.eta_tilde << ", eta " << rs.sol.eta << ", objective " << mc.objective
             << " vs minimax " << mc.minimax << "\n";
  return ok ? 0 : 2;
}

// Fast invariant checks over the library.
int selftest(const Common&) {
  int failed = 0, total = 0;
  auto check = [&](bool ok, const std::string& what) {
    ++total;
    if (!ok) {
      ++failed;
      std::cerr << "selftest: FAILED " << what << "\n";
    }
  };
  {
    auto dgp = make_dgp(DGPSpec{"unconditional_moment", {}});
    const Dataset data = dgp->generate(200, 1);
    auto m = std::make_shared<MeanMoment>(data.layout());
    GelLoss loss = cue_loss(m);
    const Eigen::VectorXd th = Eigen::VectorXd::Constant(3, 0.2);
    const double dual = loss.mean(th, loss.best_response(th, data, Eigen::VectorXd::Zero(3)), data);
    check(std::abs(dual - cue_objective(*m, th, data)) <= 1e-10, "CUE duality identity");
  }
  for (DivergenceName d : {DivergenceName::KL, DivergenceName::ChiSquared, DivergenceName::SquaredHellinger}) {
    const FDivergence f = FDivergence::named(d);
    check(std::abs(conjugate_eval(f, -0.5) - conjugate_oracle(f, -0.5)) <= 1e-5,
          "conjugate of " + f.label());
  }
  {
    TabularMdpDgp mdp(5, 3, 0.6, 7);
    check(mdp.bellman_residual(mdp.theta_star()) <= 1e-8, "soft Bellman fixed point");
  }
  {
    auto dgp = make_dgp(DGPSpec{"gaussian_location", {{"dim", 1}}});
    ProblemSpec p;
    ReplicaSolve rs = solve_replica(*dgp, p, 200, 3);
    check(rs.sol.certified && rs.sol.within_budget, "CUE solve within budget");
    check(minimax_consistency_check(*rs.problem.loss, rs.sol, rs.data, *rs.problem.theta_space,
                                    *rs.problem.lambda_space, rs.problem.solver.budget),
          "minimax consistency");
  }
  {
    ProblemSpec p;
    std::ostringstream a, b;
    run_rate_experiment(DGPSpec{"gaussian_location", {{"dim", 2}}}, p, {100, 200}, 3, RunOptions{5, 1}).rows.write(a);
    run_rate_experiment(DGPSpec{"gaussian_location", {{"dim", 2}}}, p, {100, 200}, 3, RunOptions{5, 2}).rows.write(b);
    check(a.str() == b.str(), "byte-identical reruns across worker counts");
  }
  std::cout << "selftest: " << total - failed << "/" << total << " checks passed\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Adversarial estimation: saddle-point estimators and Monte Carlo drivers", "aest"};
  app.require_subcommand(1);
  Common common;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const Entry entries[] = {
      {"estimate", "solve one dataset and write the fitted parameters", estimate},
      {"rates", "criterion-gap rate experiment (writes <out>_fit.csv with the slope)", rates},
      {"coverage", "confidence interval coverage", coverage},
      {"efficiency", "cmr versus conditional GEL variances on the linear IV design", efficiency},
      {"divergence", "f-GAN divergence recovery on the Gaussian location design", divergence},
      {"nash-check", "solve, certify the Nash slacks and run the minimax check", nash_check},
      {"selftest", "fast invariant checks", selftest},
  };
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", common.config, "sectioned key=value experiment file");
    sub->add_option("--out", common.out, "CSV output path (stdout when omitted)");
    sub->add_option("--seed", common.seed, "overrides experiment.seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", common.workers, "overrides experiment.workers")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  for (const Entry& e : entries) {
    if (!app.got_subcommand(e.name)) continue;
    try {
      return e.run(common);
    } catch (const ConfigError& err) {
      std::cerr << "config error: " << err.what() << "\n";
      return 1;
    } catch (const InvalidArgument& err) {
      std::cerr << "config error: " << err.what() << "\n";
      return 1;
    } catch (const std::exception& err) {
      std::cerr << "numerical failure: " << err.what() << "\n";
      return 2;
    }
  }
  return 1;
}

int main(int argc, char** argv) { return cli_main(argc, argv); }
