// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aest/core/nash.hpp"
#include "aest/core/rng.hpp"
#include "aest/core/toy_losses.hpp"
#include "aest/divergences/fdivergence.hpp"
#include "aest/divergences/ratio_model.hpp"
#include "aest/estimators/gel.hpp"
#include "aest/estimators/moment.hpp"
#include "aest/estimators/riesz.hpp"
#include "aest/estimators/sbeed.hpp"
#include "aest/harness/dgp.hpp"
#include "aest/harness/drivers.hpp"
#include "aest/harness/problems.hpp"
#include "aest/inference/inference.hpp"

using namespace aest;

namespace {

// Every solve made by the suite, for the certificate criterion.
struct Tally {
  std::size_t solves = 0, failures = 0, over_budget = 0, minimax_failures = 0;

  void add(std::size_t s, std::size_t f, std::size_t ob, std::size_t mm) {
    solves += s;
    failures += f;
    over_budget += ob;
    minimax_failures += mm;
  }
  // Directly solved replica: budget flag and minimax check.
  void add(const ReplicaSolve& rs) {
    const bool mm = minimax_consistency_check(*rs.problem.loss, rs.sol, rs.data,
                                              *rs.problem.theta_space, *rs.problem.lambda_space,
                                              rs.problem.solver.budget);
    add(1, 0, !rs.sol.within_budget, !mm);
  }
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }

DGPSpec dgp_spec(const std::string& name, std::map<std::string, double> params = {}) {
  DGPSpec s;
  s.name = name;
  s.params = std::move(params);
  return s;
}

ProblemSpec family(const std::string& name) {
  ProblemSpec p;
  p.family = name;
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// Failure rate below 5% of attempted replicas.
bool few_failures(std::size_t failures, std::size_t attempted) {
  return static_cast<double>(failures) < 0.05 * static_cast<double>(attempted);
}

Outcome cue_duality(Tally&) {
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t dim = 1 + static_cast<std::size_t>(k % 3), n = 200;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j <= i; ++j) L(i, j) = i == j ? rng.uniform(0.5, 2.0) : rng.normal(0.0, 0.5);
    }
    Eigen::VectorXd shift(dim);
    for (auto& s : shift) s = rng.normal(0.0, 0.5);
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd e(dim);
      for (auto& x : e) x = rng.normal();
      Eigen::VectorXd y = shift + L * e;
      v.insert(v.end(), y.data(), y.data() + dim);
    }
    const Dataset data(ColumnLayout().add("y", dim), std::move(v));
    auto m = std::make_shared<MeanMoment>(data.layout());
    GelLoss loss = cue_loss(m);
    Eigen::VectorXd theta(dim);
    for (auto& t : theta) t = rng.normal(0.0, 0.3);
    const double closed = cue_objective(*m, theta, data);
    const Eigen::VectorXd lam = loss.best_response(theta, data, Eigen::VectorXd::Zero(dim));
    const double dual = loss.mean(theta, lam, data);
    const double analytic = loss.mean(theta, gmm_lambda_star(*m, theta, data), data);
    worst = std::max({worst, std::abs(closed - dual), std::abs(closed - analytic)});
  }
  return {worst <= 1e-10, "max |closed form - dual| = " + sci(worst) + " over 100 datasets"};
}

// Interior t ranges keeping the brute-force maximizer inside the search grid.
std::pair<double, double> interior(DivergenceName n) {
  switch (n) {
    case DivergenceName::TotalVariation: return {-0.45, 0.45};
    case DivergenceName::KL: return {-3.0, 3.0};
    case DivergenceName::ReverseKL: return {-5.0, -0.2};
    case DivergenceName::ChiSquared: return {-3.0, 3.0};
    case DivergenceName::SquaredHellinger: return {-3.0, 0.8};
    case DivergenceName::RescaledJS: return {-4.0, -0.05};
  }
  return {0.0, 0.0};
}

Outcome conjugates(Tally&) {
  const DivergenceName all[] = {DivergenceName::TotalVariation, DivergenceName::KL,
                                DivergenceName::ReverseKL,      DivergenceName::ChiSquared,
                                DivergenceName::SquaredHellinger, DivergenceName::RescaledJS};
  double worst_conj = 0.0, worst_bi = 0.0, worst_fy = 0.0, worst_tight = 0.0;
  for (DivergenceName name : all) {
    const FDivergence d = FDivergence::named(name);
    auto [lo, hi] = interior(name);
    for (int i = 0; i < 50; ++i) {
      const double t = lo + (hi - lo) * i / 49.0;
      worst_conj = std::max(worst_conj, std::abs(conjugate_eval(d, t) - conjugate_oracle(d, t, {-10.0, 60.0, 70001})));
    }
    for (int i = 0; i <= 30; ++i) {
      const double lam = 0.2 + 4.8 * i / 30.0;
      worst_bi = std::max(worst_bi, std::abs(biconjugate_oracle(d, lam, {-30.0, 30.0, 60001}) - d.f(lam)));
    }
    for (int i = 0; i <= 40; ++i) {
      const double lam = 0.05 + 5.0 * i / 40.0;
      if (!d.f_domain().contains(lam)) continue;
      for (int j = 0; j <= 40; ++j) {
        const double t = lo + (hi - lo) * j / 40.0;
        worst_fy = std::max(worst_fy, lam * t - d.f(lam) - d.f_star(t));
      }
      if (name != DivergenceName::TotalVariation) {
        const double t = d.f_prime(lam);
        if (d.conjugate_domain().contains(t)) {
          worst_tight = std::max(worst_tight, std::abs(d.f(lam) + d.f_star(t) - lam * t));
        }
      }
    }
  }
  const bool pass = worst_conj <= 1e-5 && worst_bi <= 1e-4 && worst_fy <= 1e-12 && worst_tight <= 1e-9;
  return {pass, "conjugate err " + sci(worst_conj) + ", biconjugate err " + sci(worst_bi) +
                    ", Fenchel-Young violation " + sci(std::max(0.0, worst_fy)) + ", equality err " +
                    sci(worst_tight)};
}

Outcome divergence_recovery(Tally& tally) {
  const FDivergence kl = FDivergence::named(DivergenceName::KL);
  const Dataset data = GaussianLocationDgp(0.0, 1.0, 1).generate(100000, 31);
  const GaussianLocation model(Eigen::VectorXd::Constant(1, 1.0));
  Rng rng(32);
  DualEstimateOptions opts;
  opts.model_samples = 100000;
  const double analytic = dual_divergence_estimate(
      kl, model, data, [&](Row y) { return analytic_adversary(kl, model, y); }, rng, opts);

  auto dgp = make_dgp(dgp_spec("gaussian_location", {{"mu", 0.0}, {"dim", 1}}));
  ProblemSpec net = family("fgan");
  net.divergence = "kl";
  net.adversary = "network";
  net.fixed_theta = true;
  net.model_offset = 1.0;
  net.growth.c_width = 0.25;
  net.model_samples_factor = 1.0;
  const std::size_t n = 4000;
  ReplicaSolve rs = solve_replica(*dgp, net, n, 33);
  tally.add(rs);
  const double network = empirical_objective(*rs.problem.loss, rs.sol.theta_hat, rs.sol.lambda_hat, rs.data);
  const double truth = 0.5;
  const double rel = std::abs(network - truth) / truth;
  return {std::abs(analytic - truth) <= 0.05 && rel <= 0.20,
          "analytic adversary " + fmt("%.4f", analytic) + " (n=m=1e5); tanh network width " +
              std::to_string(width_for_n(net.growth, n)) + " gives " + fmt("%.4f", network) +
              ", relative error " + fmt("%.3f", rel)};
}

// Coefficients c of a linear function sieve with λ_c(z) ≈ target(z) on a grid.
Eigen::VectorXd project_onto(const Sieve& s, const std::function<double(double)>& target) {
  const Eigen::Index K = static_cast<Eigen::Index>(s.dim());
  Eigen::MatrixXd F(41, K);
  Eigen::VectorXd t(41);
  for (int i = 0; i < 41; ++i) {
    const double z = -2.0 + 0.1 * i;
    const double row[] = {z};
    for (Eigen::Index k = 0; k < K; ++k) {
      F(i, k) = s.eval_scalar(Eigen::VectorXd::Unit(K, k), Row(row, 1));
    }
    t[i] = target(z);
  }
  return F.colPivHouseholderQr().solve(t);
}

Outcome neyman(Tally& tally) {
  // CUE on the over-identified moment design, population adversary map.
  auto cue_dgp = make_dgp(dgp_spec("unconditional_moment", {{"dim", 3}}));
  const auto& um = dynamic_cast<const UnconditionalMomentDgp&>(*cue_dgp);
  const Eigen::MatrixXd cov = um.covariance();
  const double t0 = um.theta_star()[0];
  AdversaryMap cue_map = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd d = Eigen::VectorXd::Constant(3, t0 - th[0]);
    return Eigen::VectorXd(-2.0 * (cov + d * d.transpose()).ldlt().solve(d));
  };
  std::vector<AffinePerturbation> cue_dirs;
  for (int j = 0; j < 3; ++j) cue_dirs.push_back({Eigen::VectorXd::Unit(3, j), {}});
  cue_dirs.push_back({Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Ones(3, 1)});

  // cmr on the linear IV design: the adversary tracks 2𝔼[y − θx | z] = 2π(θ* − θ)z.
  auto iv_dgp = make_dgp(dgp_spec("linear_iv_heteroskedastic"));
  const double b0 = iv_dgp->theta_star()[0];

  auto stat = [&](const std::string& fam, std::size_t n, std::uint64_t seed) {
    const Dgp& dgp = fam == "cue" ? *cue_dgp : *iv_dgp;
    ReplicaSolve rs = solve_replica(dgp, family(fam), n, seed);
    tally.add(rs);
    const Eigen::VectorXd& th = rs.sol.theta_hat.coords;
    const Eigen::VectorXd& la = rs.sol.lambda_hat.coords;
    if (fam == "cue") return neyman_orthogonality_check(*rs.problem.loss, th, la, rs.data, cue_dirs, cue_map);
    const auto& sieve = dynamic_cast<const Sieve&>(*rs.problem.lambda_space);
    const Eigen::Index K = static_cast<Eigen::Index>(sieve.dim());
    const Eigen::VectorXd unit_z = project_onto(sieve, [](double z) { return z; });
    AdversaryMap map = [&, unit_z](const Eigen::VectorXd& t) {
      return Eigen::VectorXd(2.0 * (b0 - t[0]) * unit_z);
    };
    std::vector<AffinePerturbation> dirs;
    for (Eigen::Index j = 0; j < K; ++j) dirs.push_back({Eigen::VectorXd::Unit(K, j), {}});
    return neyman_orthogonality_check(*rs.problem.loss, th, la, rs.data, dirs, map);
  };
  std::ostringstream out;
  bool pass = true;
  for (const auto& [fam, n] : std::vector<std::pair<std::string, std::size_t>>{{"cue", 500}, {"cmr", 1000}}) {
    std::vector<double> small, large;
    for (std::uint64_t s = 0; s < 20; ++s) {
      small.push_back(stat(fam, n, 400 + s));
      large.push_back(stat(fam, 4 * n, 500 + s));
    }
    const double ratio = median(small) / median(large);
    pass = pass && ratio >= 1.5;
    out << fam << " median " << sci(median(small)) << " -> " << sci(median(large)) << " (ratio "
        << fmt("%.2f", ratio) << "); ";
  }
  BilinearLoss bil;
  const Dataset dummy(ColumnLayout().add("y", 1), {0.0});
  const double b = neyman_orthogonality_check(bil, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), dummy,
                                              {{Eigen::VectorXd::Ones(1), {}}});
  const double b4 = neyman_orthogonality_check(bil, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
                                               Dataset(ColumnLayout().add("y", 1), {0.0, 0.0, 0.0, 0.0}),
                                               {{Eigen::VectorXd::Ones(1), {}}});
  pass = pass && std::abs(b - 1.0) < 1e-6 && std::abs(b / b4 - 1.0) < 1e-6;
  out << "bilinear control " << fmt("%.6f", b) << " (ratio " << fmt("%.3f", b / b4) << ")";
  return {pass, out.str()};
}

Outcome coverage(Tally& tally, std::size_t workers) {
  const double sigma = 2.0;
  RunOptions run{51, workers, true};
  const CoverageReport r = run_coverage(dgp_spec("gaussian_location", {{"mu", 0.0}, {"sigma", sigma}, {"dim", 1}}),
                                        family("cue"), 0.95, 500, 500, run);
  tally.add(r.replicas + r.failures, r.failures, r.over_budget, r.minimax_failures);
  const double rel = r.scaled_variance / (sigma * sigma) - 1.0;
  const bool pass = r.coverage >= 0.90 && r.coverage <= 0.98 && std::abs(rel) <= 0.15 &&
                    few_failures(r.failures, r.replicas + r.failures);
  return {pass, "coverage " + fmt("%.3f", r.coverage) + " over " + std::to_string(r.replicas) +
                    " replicas, var of sqrt(n)(est-mu) " + fmt("%.3f", r.scaled_variance) + " vs " +
                    fmt("%.1f", sigma * sigma) + " (" + fmt("%+.1f%%", 100.0 * rel) + "), failures " +
                    std::to_string(r.failures)};
}

Outcome rates(Tally& tally, std::size_t workers) {
  const std::vector<std::size_t> grid = {500, 1000, 2000, 4000, 8000};
  RunOptions run{61, workers, true};
  const RateFitResult a = run_rate_experiment(dgp_spec("unconditional_moment", {{"dim", 3}}), family("cue"), grid, 50, run);
  const RateFitResult b = run_rate_experiment(dgp_spec("nonparam_iv"), family("cmr"), grid, 50, run);
  const std::size_t attempts = grid.size() * 50;
  tally.add(attempts, a.failures, a.over_budget, a.minimax_failures);
  tally.add(attempts, b.failures, b.over_budget, b.minimax_failures);
  const bool pa = a.slope - 2.0 * a.slope_se >= -1.3 && a.slope + 2.0 * a.slope_se <= -0.7;
  const bool pb = b.slope <= -0.5 + 2.0 * b.slope_se;
  const bool pass = pa && pb && few_failures(a.failures, attempts) && few_failures(b.failures, attempts);
  return {pass, "cue slope " + fmt("%.3f", a.slope) + " +- 2*" + fmt("%.3f", a.slope_se) +
                    " within [-1.3,-0.7]; cmr slope " + fmt("%.3f", b.slope) + " (se " +
                    fmt("%.3f", b.slope_se) + ") vs -0.5 + 2se; failures " +
                    std::to_string(a.failures + b.failures)};
}

Outcome efficiency(Tally& tally, std::size_t workers) {
  const std::size_t R = 500, n = 2000;
  RunOptions run{71, workers, true};
  const EfficiencyReport het = run_efficiency_compare(
      dgp_spec("linear_iv_heteroskedastic", {{"hetero", 1.0}}), family("cgel"), R, n, run);
  const EfficiencyReport hom = run_efficiency_compare(
      dgp_spec("linear_iv_heteroskedastic", {{"hetero", 0.0}}), family("cgel"), R, n, run);
  tally.add(2 * R, 2 * het.failures, het.over_budget, het.minimax_failures);
  tally.add(2 * R, 2 * hom.failures, hom.over_budget, hom.minimax_failures);
  const double rel = het.var_cmr / het.V_sandwich - 1.0;
  const bool pass = std::abs(rel) <= 0.15 && het.diff >= 2.0 * het.diff_se &&
                    het.V_sandwich >= het.V_star && std::abs(hom.diff) < 2.0 * hom.diff_se &&
                    few_failures(het.failures, R) && few_failures(hom.failures, R);
  return {pass, "var cmr " + fmt("%.3f", het.var_cmr) + " vs V_sandwich " + fmt("%.3f", het.V_sandwich) +
                    " (" + fmt("%+.1f%%", 100.0 * rel) + "), var cgel " + fmt("%.3f", het.var_cgel) +
                    ", gap " + fmt("%.3f", het.diff) + " = " + fmt("%.1f", het.diff / het.diff_se) +
                    " se, V_star " + fmt("%.3f", het.V_star) + ", literal " + fmt("%.3f", het.V_literal) +
                    "; homoskedastic gap " + fmt("%.3f", hom.diff) + " = " +
                    fmt("%.1f", hom.diff / hom.diff_se) + " se"};
}

Outcome sbeed(Tally& tally) {
  auto dgp = make_dgp(dgp_spec("tabular_mdp"));
  const auto& mdp = dynamic_cast<const TabularMdpDgp&>(*dgp);
  const Eigen::VectorXd vstar = mdp.theta_star();
  double worst_obj = 0.0, worst_v = 0.0;
  for (std::uint64_t seed : {81, 82, 83}) {
    ReplicaSolve rs = solve_replica(*dgp, family("sbeed"), 10000, seed);
    tally.add(rs);
    const auto& loss = dynamic_cast<const SbeedLoss&>(*rs.problem.loss);
    worst_obj = std::max(worst_obj, std::abs(empirical_objective(loss, rs.sol.theta_hat, rs.sol.lambda_hat, rs.data)));
    for (int s = 0; s < mdp.states(); ++s) {
      const double row[] = {static_cast<double>(s)};
      worst_v = std::max(worst_v, std::abs(loss.value(rs.sol.theta_hat.coords, Row(row, 1)) - vstar[s]));
    }
  }
  return {worst_obj <= 1e-3 && worst_v <= 0.05,
          "objective " + sci(worst_obj) + ", sup |V - V*| " + fmt("%.4f", worst_v) + " (n=1e4, 3 seeds)"};
}

Outcome riesz(Tally& tally, std::size_t workers) {
  auto dgp = make_dgp(dgp_spec("riesz_mean"));
  const Dataset data = dgp->generate(1000, 91);
  RieszProblem prob;
  prob.functional = std::make_shared<MeanFunctional>();
  prob.first_stage_g = [](Row x) { return 0.3 + std::cos(x[0]); };
  const FunctionalEstimate fe = orthogonalized_functional(prob, [](Row) { return 1.0; }, data);
  double ybar = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) ybar += data.slice(i, "y")[0];
  ybar /= static_cast<double>(data.n());
  const double alg = std::abs(fe.estimate - ybar);

  RunOptions run{92, workers, true};
  const CoverageReport r = run_coverage(dgp_spec("riesz_derivative"), family("riesz"), 0.95, 300, 1000, run);
  tally.add(r.replicas + r.failures, r.failures, r.over_budget, r.minimax_failures);
  const bool pass = alg <= 1e-12 && r.coverage >= 0.88 && r.coverage <= 0.99 &&
                    few_failures(r.failures, r.replicas + r.failures);
  return {pass, "|estimate - mean(y)| = " + sci(alg) + " at theta = 1; derivative coverage " +
                    fmt("%.3f", r.coverage) + " over " + std::to_string(r.replicas) + " replicas"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> only;
  std::size_t workers = 1;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  std::set<int> chosen(only.begin(), only.end());
  auto wanted = [&](int k) { return chosen.empty() || chosen.count(k); };

  Tally tally;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [&] { return cue_duality(tally); }},
      {2, [&] { return conjugates(tally); }},
      {3, [&] { return divergence_recovery(tally); }},
      {4, [&] { return neyman(tally); }},
      {5, [&] { return coverage(tally, workers); }},
      {6, [&] { return rates(tally, workers); }},
      {7, [&] { return efficiency(tally, workers); }},
      {8, [&] { return sbeed(tally); }},
      {9, [&] { return riesz(tally, workers); }},
  };
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!wanted(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt("%.1f", secs) << " s]" << std::endl;
  }
  if (wanted(10)) {
    const bool pass = tally.solves > 0 && tally.over_budget == 0 && tally.minimax_failures == 0 &&
                      few_failures(tally.failures, tally.solves);
    all = all && pass;
    std::cout << "criterion 10: " << (pass ? "PASS" : "FAIL") << "  " << tally.solves << " solves, "
              << tally.over_budget << " over budget, " << tally.minimax_failures
              << " minimax failures, " << tally.failures << " solver failures" << std::endl;
  }
  return all ? 0 : 1;
}
