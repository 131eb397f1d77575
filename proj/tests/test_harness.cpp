#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "aest/core/errors.hpp"
#include "aest/harness/config.hpp"
#include "aest/harness/csv.hpp"
#include "aest/harness/dgp.hpp"
#include "aest/harness/drivers.hpp"
#include "aest/harness/pool.hpp"
#include "aest/harness/problems.hpp"

using namespace aest;

namespace {

std::string csv_text(const CsvTable& t) {
  std::ostringstream out;
  t.write(out);
  return out.str();
}

DGPSpec spec(const std::string& name, std::map<std::string, double> params = {}) {
  DGPSpec s;
  s.name = name;
  s.params = std::move(params);
  return s;
}

}  // namespace

TEST_CASE("generate is deterministic in (n, seed)") {
  auto dgp = make_dgp(spec("gaussian_location", {{"mu", 0.0}}));
  const Dataset a = dgp->generate(50, 11), b = dgp->generate(50, 11), c = dgp->generate(50, 12);
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
  for (const char* name : {"unconditional_moment", "linear_iv_heteroskedastic", "nonparam_iv",
                           "tabular_mdp", "riesz_mean", "riesz_derivative"}) {
    auto d = make_dgp(spec(name));
    CHECK(d->generate(20, 3).values() == d->generate(20, 3).values());
    CHECK(d->generate(20, 3).width() == d->layout().width());
  }
  CHECK_THROWS_AS(make_dgp(spec("no_such_design")), InvalidArgument);
  CHECK_THROWS_AS(dgp->generate(0, 1), InvalidArgument);
}

TEST_CASE("normal quadrature integrates low moments exactly") {
  const Quadrature q = normal_quadrature(8);
  const double moments[] = {1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0};
  for (int k = 0; k <= 8; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], k);
    CHECK(s == doctest::Approx(moments[k]).epsilon(1e-12));
  }
}

TEST_CASE("linear IV residual has zero mean in every instrument bin") {
  for (double hetero : {1.0, 0.0}) {
    auto dgp = make_dgp(spec("linear_iv_heteroskedastic", {{"hetero", hetero}}));
    const double theta = dgp->theta_star()[0];
    const Dataset d = dgp->generate(200000, 5);
    const double cuts[] = {-1e300, -1.5, -0.5, 0.0, 0.5, 1.5, 1e300};
    for (int b = 0; b < 6; ++b) {
      double s = 0.0, ss = 0.0;
      std::size_t k = 0;
      for (std::size_t i = 0; i < d.n(); ++i) {
        const double z = d.slice(i, "z")[0];
        if (z <= cuts[b] || z > cuts[b + 1]) continue;
        const double r = d.slice(i, "y")[0] - theta * d.slice(i, "x")[0];
        s += r;
        ss += r * r;
        ++k;
      }
      const double m = s / k, se = std::sqrt((ss / k - m * m) / k);
      CHECK(std::abs(m) < 4.0 * se);
    }
  }
}

TEST_CASE("linear IV conditional variance oracle matches binned moments") {
  LinearIvDgp dgp(1.0, true, 0.5, 1.0);
  const Dataset d = dgp.generate(400000, 9);
  double s = 0.0, ss = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double z = d.slice(i, "z")[0];
    if (std::abs(z - 1.0) > 0.05) continue;
    const double r = d.slice(i, "y")[0] - d.slice(i, "x")[0];
    s += r * r;
    ss += r * r * r * r;
    ++k;
  }
  const double m = s / k, se = std::sqrt((ss / k - m * m) / k);
  CHECK(std::abs(m - dgp.cond_sd(1.0) * dgp.cond_sd(1.0)) < 4.0 * se + 0.05);
}

TEST_CASE("nonparametric IV conditional mean oracle") {
  NonparamIvDgp dgp(0.8, 0.5, Eigen::Vector3d(0.5, 1.0, -0.5));
  for (double z : {-1.0, 0.0, 0.7}) {
    CHECK(dgp.cond_mean([](double x) { return x; }, z) == doctest::Approx(0.8 * z).epsilon(1e-12));
    CHECK(dgp.cond_mean([](double x) { return x * x; }, z) ==
          doctest::Approx(0.64 * z * z + 0.36).epsilon(1e-12));
  }
  CHECK(dgp.criterion([&](double x) { return dgp.g_star(x); }) == doctest::Approx(0.0));
  CHECK(dgp.criterion([](double) { return 0.0; }) > 0.0);
}

TEST_CASE("tabular MDP value function solves the soft Bellman equation") {
  TabularMdpDgp dgp(5, 3, 0.6, 7);
  const Eigen::VectorXd V = dgp.theta_star();
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      double ev = 0.0, mass = 0.0;
      for (int sp = 0; sp < 5; ++sp) {
        ev += dgp.transition(s, a, sp) * V[sp];
        mass += dgp.transition(s, a, sp);
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
      acc += std::exp(dgp.reward(s, a) + 0.6 * ev);
    }
    worst = std::max(worst, std::abs(std::log(acc) - V[s]));
  }
  CHECK(worst <= 1e-8);
  CHECK(dgp.bellman_residual(V) <= 1e-8);
  for (int s = 0; s < 5; ++s) {
    double p = 0.0;
    for (int a = 0; a < 3; ++a) p += std::exp(dgp.log_policy_star(s, a));
    CHECK(p == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("Riesz designs report their functional values") {
  CHECK(make_dgp(spec("riesz_mean"))->theta_star()[0] == doctest::Approx(1.0));
  CHECK(make_dgp(spec("riesz_derivative"))->theta_star()[0] ==
        doctest::Approx(1.0 + std::exp(-0.5)));
}

TEST_CASE("config lookups name the missing section.key") {
  const Config cfg = Config::from_string(
      "[dgp]\nname = gaussian_location\nmu = 1.5\n[experiment]\nn_grid = 500, 1000 2000\n"
      "bad = abc\n");
  CHECK(cfg.str("dgp.name") == "gaussian_location");
  CHECK(cfg.real("dgp.mu") == 1.5);
  CHECK(cfg.reals("experiment.n_grid") == std::vector<double>{500, 1000, 2000});
  CHECK(cfg.real("dgp.sigma", 2.0) == 2.0);
  try {
    (void)cfg.real("dgp.sigma");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "dgp.sigma");
  }
  try {
    (void)cfg.real("experiment.bad");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "experiment.bad");
  }
  CHECK_THROWS_AS(Config::from_string("[dgp\nname"), ConfigError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/x.cfg"), ConfigError);
  const DGPSpec d = DGPSpec::from_config(cfg);
  CHECK(d.name == "gaussian_location");
  CHECK(d.get("mu", 0.0) == 1.5);
}

TEST_CASE("parallel_map keeps index order and rethrows") {
  std::function<int(std::size_t)> sq = [](std::size_t i) { return static_cast<int>(i * i); };
  const auto out = parallel_map<int>(100, 4, sq);
  for (std::size_t i = 0; i < 100; ++i) CHECK(out[i] == static_cast<int>(i * i));
  std::function<int(std::size_t)> bad = [](std::size_t i) -> int {
    if (i == 7) throw std::runtime_error("seven");
    return 0;
  };
  CHECK_THROWS_WITH(parallel_map<int>(20, 3, bad), "seven");
}

TEST_CASE("csv cells round-trip at full precision") {
  CsvTable t({"a", "b"});
  t.row({cell(0.1), cell(std::size_t{3})});
  CHECK(csv_text(t) == "a,b\n0.10000000000000001,3\n");
  CHECK_THROWS(t.row({cell(1.0)}));
}

TEST_CASE("rate fit arithmetic") {
  RateFitResult r;
  r.n_grid = {100, 200, 400, 800};
  for (std::size_t n : r.n_grid) {
    r.gap_means.push_back(3.0 / static_cast<double>(n));
    r.gap_ses.push_back(0.1 / static_cast<double>(n));
    r.censored.push_back(false);
  }
  fit_rate(r);
  CHECK(r.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.slope_se > 0.0);
  r.censored = {true, true, true, false};
  fit_rate(r);
  CHECK(std::isnan(r.slope));
  CHECK(std::isnan(r.slope_se));
}

TEST_CASE("rate experiment with one replica gives the secant") {
  ProblemSpec p;
  p.family = "cue";
  RunOptions run;
  run.seed = 4;
  const RateFitResult r =
      run_rate_experiment(spec("gaussian_location", {{"dim", 2}}), p, {200, 800}, 1, run);
  REQUIRE(r.rows.rows().size() == 2);
  CHECK(r.rows.header()[0] == "n");
  CHECK(r.rows.header()[3] == "seed");
  const double g1 = std::stod(r.rows.rows()[0][2]), g2 = std::stod(r.rows.rows()[1][2]);
  CHECK(r.failures == 0);
  CHECK(r.slope == doctest::Approx((std::log(g2) - std::log(g1)) / std::log(4.0)).epsilon(1e-12));
  const CsvTable fit = r.fit_table();
  CHECK(fit.header() == std::vector<std::string>{"slope", "slope_se"});
  CHECK_THROWS_AS(run_rate_experiment(spec("gaussian_location"), p, {800, 200}, 1, run),
                  InvalidArgument);
}

TEST_CASE("drivers are byte-identical across reruns and worker counts") {
  ProblemSpec p;
  p.family = "cue";
  RunOptions one{17, 1}, many{17, 3};
  const DGPSpec d = spec("unconditional_moment");
  const std::string a = csv_text(run_rate_experiment(d, p, {100, 200}, 4, one).rows);
  const std::string b = csv_text(run_rate_experiment(d, p, {100, 200}, 4, one).rows);
  const std::string c = csv_text(run_rate_experiment(d, p, {100, 200}, 4, many).rows);
  CHECK(a == b);
  CHECK(a == c);
  const DGPSpec g = spec("gaussian_location", {{"dim", 1}});
  CHECK(csv_text(run_coverage(g, p, 0.95, 6, 100, one).rows) ==
        csv_text(run_coverage(g, p, 0.95, 6, 100, many).rows));
}

TEST_CASE("coverage edge cases and negative control") {
  ProblemSpec p;
  p.family = "cue";
  RunOptions run{21, 1};
  const DGPSpec g = spec("gaussian_location", {{"dim", 1}, {"sigma", 2.0}});
  const CoverageReport full = run_coverage(g, p, 1.0, 20, 100, run);
  CHECK(full.coverage == 1.0);
  CHECK(full.hits == full.replicas);
  const CoverageReport nominal = run_coverage(g, p, 0.95, 200, 200, run);
  const CoverageReport narrow = run_coverage(g, p, 0.95, 200, 200, run, 0.25);
  // halving the standard error leaves 2Φ(0.98)−1 ≈ 0.67 of the mass
  CHECK(nominal.coverage > 0.88);
  CHECK(narrow.coverage < 0.80);
  CHECK(narrow.hits <= narrow.replicas);
  CHECK_THROWS_AS(run_coverage(g, p, 0.0, 5, 100, run), InvalidArgument);
}

TEST_CASE("efficiency comparison rejects a single replica") {
  ProblemSpec p;
  p.family = "cgel";
  CHECK_THROWS_AS(run_efficiency_compare(spec("linear_iv_heteroskedastic"), p, 1, 200, RunOptions{}),
                  InvalidArgument);
}

TEST_CASE("efficiency comparison reports the analytic variances") {
  ProblemSpec p;
  p.family = "cgel";
  const EfficiencyReport e =
      run_efficiency_compare(spec("linear_iv_heteroskedastic"), p, 4, 300, RunOptions{2, 1});
  CHECK(e.V_sandwich == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(e.V_literal == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(e.V_sandwich >= e.V_star);
  CHECK(e.rows.rows().size() == 4);
  CHECK(e.summary().rows().size() == 3);
}

TEST_CASE("divergence recovery initialized at the truth reports zero divergence") {
  ProblemSpec p;
  p.family = "fgan";
  p.divergence = "kl";
  p.fixed_theta = true;
  const DivergenceReport r = run_divergence_recovery(spec("gaussian_location", {{"mu", 0.0}, {"dim", 1}}),
                                                     p, {100, 200}, 1, RunOptions{3, 1});
  for (const auto& row : r.rows.rows()) CHECK(std::stod(row[3]) == doctest::Approx(0.0));
  CHECK(r.fit.censored == std::vector<bool>{true, true});
}

TEST_CASE("problem specs read from config") {
  const Config cfg = Config::from_string(
      "[family]\nname = cmr\n[sieve]\ntheta_degree = 3\n[solver]\nmethod = extragradient\n"
      "max_iters = 50\nbatch = full\n");
  const ProblemSpec p = ProblemSpec::from_config(cfg);
  CHECK(p.family == "cmr");
  CHECK(p.theta_degree == 3);
  const SolverConfig s = solver_from_config(cfg, SolverConfig{});
  CHECK(s.method == SolverMethod::Extragradient);
  CHECK(s.max_iters == 50);
  CHECK(s.batch == 0);
  CHECK_THROWS_AS(solver_from_config(Config::from_string("[solver]\nmethod = newton\n"), SolverConfig{}),
                  ConfigError);
}
