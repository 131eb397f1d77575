#include "aest/harness/problems.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "aest/core/box_space.hpp"
#include "aest/core/errors.hpp"
#include "aest/divergences/ratio_model.hpp"
#include "aest/estimators/estimators.hpp"
#include "aest/harness/config.hpp"

namespace aest {

ProblemSpec ProblemSpec::from_config(const Config& cfg) {
  ProblemSpec s;
  s.family = cfg.str("family.name");
  s.divergence = cfg.str("family.divergence", s.divergence);
  s.fixed_theta = cfg.flag("family.fixed_theta", s.fixed_theta);
  s.model_samples_factor = cfg.real("family.model_samples_factor", s.model_samples_factor);
  s.model_offset = cfg.real("family.model_offset", s.model_offset);
  s.theta_degree = static_cast<int>(cfg.integer("sieve.theta_degree", s.theta_degree));
  s.lambda_degree = static_cast<int>(cfg.integer("sieve.lambda_degree", s.lambda_degree));
  s.first_stage_degree = static_cast<int>(cfg.integer("sieve.first_stage_degree", s.first_stage_degree));
  s.bins = static_cast<int>(cfg.integer("sieve.bins", s.bins));
  s.theta_box = cfg.real("sieve.theta_box", s.theta_box);
  s.logit_box = cfg.real("sieve.logit_box", s.logit_box);
  s.pilot_box = cfg.real("sieve.pilot_box", s.pilot_box);
  s.outer_budget_scale = cfg.real("solver.outer_budget_scale", s.outer_budget_scale);
  s.adversary = cfg.str("sieve.adversary", s.adversary);
  s.depth = static_cast<int>(cfg.integer("sieve.depth", s.depth));
  s.output_clip = cfg.real("sieve.output_clip", s.output_clip);
  s.weight_clip = cfg.real("sieve.weight_clip", s.weight_clip);
  s.growth.r_lower = cfg.real("sieve.r", s.growth.r_lower);
  s.growth.c_width = cfg.real("sieve.width_c", s.growth.c_width);
  s.growth.validate();
  return s;
}

SolverConfig solver_from_config(const Config& cfg, SolverConfig base) {
  if (cfg.has("solver.method")) {
    try {
      base.method = solver_method_from_string(cfg.str("solver.method"));
    } catch (const InvalidArgument& e) {
      throw ConfigError("solver.method", e.what());
    }
  }
  base.step_theta = cfg.real("solver.step_theta", base.step_theta);
  base.step_lambda = cfg.real("solver.step_lambda", base.step_lambda);
  base.decay = cfg.real("solver.decay", base.decay);
  base.max_iters = static_cast<int>(cfg.integer("solver.max_iters", base.max_iters));
  if (cfg.has("solver.batch")) {
    const std::string b = cfg.str("solver.batch");
    base.batch = b == "full" ? 0 : static_cast<std::size_t>(cfg.integer("solver.batch"));
  }
  if (cfg.has("solver.inner_solver")) {
    const std::string s = cfg.str("solver.inner_solver");
    if (s == "analytic") {
      base.inner_solver = InnerSolver::Analytic;
    } else if (s == "gradient") {
      base.inner_solver = InnerSolver::Gradient;
    } else {
      throw ConfigError("solver.inner_solver", "expected analytic or gradient");
    }
  }
  base.stop_tol = cfg.real("solver.stop_tol", base.stop_tol);
  base.budget.eta_tilde_max = cfg.real("solver.eta_tilde_max", base.budget.eta_tilde_max);
  base.budget.eta_max = cfg.real("solver.eta_max", base.budget.eta_max);
  base.budget.restarts = static_cast<int>(cfg.integer("solver.restarts", base.budget.restarts));
  base.certify = cfg.flag("solver.certify", base.certify);
  try {
    base.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("solver", e.what());
  }
  return base;
}

namespace {

using SievePtrM = std::shared_ptr<Sieve>;

SievePtrM poly(const std::string& id, int degree, double clip = std::numeric_limits<double>::infinity()) {
  SieveSpec s = SieveSpec::linear(id, 1, BasisKind::Polynomial, degree);
  s.weight_clip = clip;
  return std::make_shared<Sieve>(s);
}

std::shared_ptr<BoxSpace> cube(const std::string& id, std::size_t dim, double half) {
  return std::make_shared<BoxSpace>(BoxSpace::cube(id, dim, half));
}

// Population CUE criterion d′(Σ + dd′)⁻¹d for mean gap d.
double cue_criterion(const Eigen::VectorXd& d, const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd B = cov + d * d.transpose();
  return d.dot(B.ldlt().solve(d));
}

FDivergence divergence_for(const std::string& name) {
  FDivergence raw = FDivergence::named(divergence_from_string(name));
  return raw.name() == DivergenceName::TotalVariation ? raw : normalize(raw);
}

void gel_problem(const Dgp& dgp, const ProblemSpec& spec, Problem& p) {
  const ColumnLayout layout = dgp.layout();
  auto m = std::make_shared<MeanMoment>(layout);
  std::size_t k = 0, pdim = 0;
  std::function<double(const Eigen::VectorXd&)> gap;
  if (auto* g = dynamic_cast<const GaussianLocationDgp*>(&dgp)) {
    k = pdim = g->dim();
    const Eigen::MatrixXd cov = g->sigma() * g->sigma() * Eigen::MatrixXd::Identity(k, k);
    const Eigen::VectorXd mu = g->theta_star();
    gap = [cov, mu](const Eigen::VectorXd& th) { return cue_criterion(mu - th, cov); };
    MomentPtr mm = m;
    p.loss = spec.family == "cue" ? std::make_shared<GelLoss>(cue_loss(mm))
                                  : std::make_shared<GelLoss>(divergence_for(spec.divergence), mm);
  } else if (auto* u = dynamic_cast<const UnconditionalMomentDgp*>(&dgp)) {
    k = u->dim();
    pdim = 1;
    const Eigen::MatrixXd cov = u->covariance();
    const double t0 = u->theta_star()[0];
    auto over = std::make_shared<LambdaMoment>(
        k, 1,
        [k](const Eigen::VectorXd& th, Row y) {
          Eigen::VectorXd out(static_cast<Eigen::Index>(k));
          for (std::size_t j = 0; j < k; ++j) out[static_cast<Eigen::Index>(j)] = y[j] - th[0];
          return out;
        },
        std::vector<std::string>{"y"});
    gap = [cov, t0, k](const Eigen::VectorXd& th) {
      return cue_criterion(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), t0 - th[0]), cov);
    };
    p.loss = spec.family == "cue" ? std::make_shared<GelLoss>(cue_loss(over))
                                  : std::make_shared<GelLoss>(divergence_for(spec.divergence), over);
  } else {
    throw InvalidArgument(spec.family + " needs gaussian_location or unconditional_moment data");
  }
  p.theta_space = cube("theta", pdim, spec.theta_box);
  p.lambda_space = cube("lambda", k, 1e3);
  p.population_gap = gap;
  p.warm.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pdim));
}

void cmr_problem(const Dgp& dgp, const ProblemSpec& spec, const Dataset& data, Problem& p) {
  const ColumnLayout layout = dgp.layout();
  if (auto* iv = dynamic_cast<const LinearIvDgp*>(&dgp)) {
    auto m = std::make_shared<LinearIV>(layout);
    const double t0 = iv->theta_star()[0];
    if (spec.family == "cmr") {
      auto lam = poly("lambda", spec.lambda_degree);
      p.loss = std::make_shared<CmrLoss>(m, lam, iv->design(), layout);
      p.lambda_space = lam;
      p.theta_space = cube("theta", 1, spec.theta_box);
    } else {
      // Piecewise-linear adversary on equal-probability bins of z.
      SieveSpec s = SieveSpec::linear("lambda", 1, BasisKind::PiecewisePolynomial, 1);
      for (int b = 1; b < spec.bins; ++b) {
        s.knots.push_back(std::sqrt(2.0) * boost::math::erf_inv(2.0 * b / spec.bins - 1.0));
      }
      auto lam = std::make_shared<Sieve>(s);
      p.loss = std::make_shared<ConditionalGelLoss>(FDivergence::named(divergence_from_string(spec.divergence)),
                                                    m, lam, iv->design(), layout);
      p.lambda_space = lam;
      // θ ↦ 𝔼ₙ l(θ, λ̂) is concave here, so the outer slack is only finite on a
      // bounded Θ: a box around the just-identified IV pilot Σzy/Σzx.
      const Eigen::VectorXd y = data.column_block("y").col(0), x = data.column_block("x").col(0),
                            z = data.column_block("z").col(0);
      const double pilot = z.dot(y) / z.dot(x);
      p.theta_space = std::make_shared<BoxSpace>("theta", Eigen::VectorXd::Constant(1, pilot - spec.pilot_box),
                                                 Eigen::VectorXd::Constant(1, pilot + spec.pilot_box));
      p.solver.budget.eta_tilde_max = spec.outer_budget_scale / static_cast<double>(data.n());
      p.warm.theta = Eigen::VectorXd::Constant(1, pilot);
      p.population_gap = [t0](const Eigen::VectorXd& th) { return (th[0] - t0) * (th[0] - t0); };
      return;
    }
    p.population_gap = [t0](const Eigen::VectorXd& th) { return (th[0] - t0) * (th[0] - t0); };
    p.warm.theta = Eigen::VectorXd::Zero(1);
    return;
  }
  if (auto* np = dynamic_cast<const NonparamIvDgp*>(&dgp)) {
    if (spec.family != "cmr") throw InvalidArgument("nonparam_iv supports the cmr family");
    auto h = poly("h", spec.theta_degree, spec.theta_box);
    auto lam = poly("lambda", spec.lambda_degree);
    auto m = std::make_shared<SieveResidualMoment>(layout, h);
    ConditionalDesign design;
    p.loss = std::make_shared<CmrLoss>(m, lam, design, layout);
    p.theta_space = h;
    p.lambda_space = lam;
    const NonparamIvDgp copy = *np;
    p.population_gap = [copy, h](const Eigen::VectorXd& th) {
      return copy.criterion([&](double x) { return h->eval_scalar(th, Row(&x, 1)); });
    };
    p.warm.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h->dim()));
    p.keep.push_back(h);
    return;
  }
  throw InvalidArgument(spec.family + " needs linear_iv_heteroskedastic or nonparam_iv data");
}


void sbeed_problem(const TabularMdpDgp& mdp, const ProblemSpec& spec, Problem& p) {
  const ColumnLayout layout = mdp.layout();
  const int S = mdp.states(), A = mdp.actions();
  SieveSpec v = SieveSpec::linear("V", 1, BasisKind::Indicator, 0);
  v.levels = {S};
  SieveSpec pol = SieveSpec::linear("P", 1, BasisKind::Indicator, 0, static_cast<std::size_t>(A));
  pol.levels = {S};
  SieveSpec l = SieveSpec::linear("L", 2, BasisKind::Indicator, 0);
  l.levels = {S, A};
  auto value = std::make_shared<Sieve>(v);
  auto policy = std::make_shared<Sieve>(pol);
  auto adv = std::make_shared<Sieve>(l);
  MDPBatch batch;
  batch.beta = mdp.beta();
  batch.num_actions = static_cast<std::size_t>(A);
  const Eigen::MatrixXd R = mdp.rewards();
  batch.reward = [R](Row s, Row a) { return R(static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(a[0])); };
  auto loss = std::make_shared<SbeedLoss>(batch, value, policy, adv, layout);
  p.loss = loss;
  const auto nv = static_cast<Eigen::Index>(value->dim()), np = static_cast<Eigen::Index>(policy->dim());
  Eigen::VectorXd lo(nv + np), hi(nv + np);
  lo << Eigen::VectorXd::Constant(nv, -spec.theta_box), Eigen::VectorXd::Constant(np, -spec.logit_box);
  hi = -lo;
  p.theta_space = std::make_shared<BoxSpace>("theta", lo, hi);
  p.lambda_space = adv;
  p.warm.theta = Eigen::VectorXd::Zero(nv + np);
  const TabularMdpDgp copy = mdp;
  p.population_gap = [copy, loss](const Eigen::VectorXd& th) {
    // ½ Σ p(s,a) 𝔼[δ | s,a]² under the true transitions and uniform sampling.
    const int S = copy.states(), A = copy.actions();
    Eigen::VectorXd V(S);
    for (int s = 0; s < S; ++s) {
      double sd = s;
      V[s] = loss->value(th, Row(&sd, 1));
    }
    double acc = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double sd = s, ad = a;
        double ev = 0.0;
        for (int sp = 0; sp < S; ++sp) ev += copy.transition(s, a, sp) * V[sp];
        const double d = copy.reward(s, a) + copy.beta() * ev - V[s] -
                         loss->log_policy(th, Row(&sd, 1), Row(&ad, 1));
        acc += d * d;
      }
    }
    return 0.5 * acc / (S * A);
  };
  p.keep.push_back(value);
  p.keep.push_back(policy);
}

void riesz_problem(const RieszDgp& dgp, const ProblemSpec& spec, const Dataset& data,
                   std::uint64_t seed, Problem& p) {
  const ColumnLayout layout = dgp.layout();
  RieszProblem rp;
  if (dgp.derivative()) {
    rp.functional = std::make_shared<DerivativeFunctional>();
  } else {
    rp.functional = std::make_shared<MeanFunctional>();
  }
  SolverConfig fs;
  fs.seed = derive_seed(seed, {0xf1});
  auto g = std::make_shared<FittedFunction>(
      fit_first_stage(data.column_block("x"), data.column_block("y").col(0),
                      SieveSpec::linear("g", 1, BasisKind::Polynomial, spec.first_stage_degree), fs));
  rp.first_stage_g = [g](Row x) { return (*g)(x); };
  auto th = poly("theta", spec.theta_degree, spec.theta_box);
  auto lam = poly("lambda", spec.theta_degree);
  p.loss = std::make_shared<RieszLoss>(rp, th, lam, layout);
  p.theta_space = th;
  p.lambda_space = lam;
  p.warm.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(th->dim()));
  const Quadrature q = normal_quadrature(40);
  const RieszDgp copy = dgp;
  p.population_gap = [q, copy, th](const Eigen::VectorXd& c) {
    // ½𝔼[(θ* − θ)²], the population criterion of the Riesz game.
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.nodes.size(); ++i) {
      double x = q.nodes[i];
      const double d = copy.representer(x) - th->eval_scalar(c, Row(&x, 1));
      acc += q.weights[i] * d * d;
    }
    return 0.5 * acc;
  };
  p.keep.push_back(g);
}

void fgan_problem(const GaussianLocationDgp& dgp, const ProblemSpec& spec, std::size_t n,
                  std::uint64_t seed, Problem& p) {
  if (dgp.dim() != 1) throw InvalidArgument("fgan supports scalar locations");
  const ColumnLayout layout = dgp.layout();
  const FDivergence div = divergence_for(spec.divergence);
  const double mu = dgp.mu(), sigma = dgp.sigma();
  auto model = std::make_shared<GaussianLocationFamily>(1, sigma, Eigen::VectorXd::Constant(1, mu), sigma);
  std::shared_ptr<Sieve> adv;
  if (spec.adversary == "network") {
    SieveSpec net = SieveSpec::network("lambda", 1, spec.depth, width_for_n(spec.growth, n), Activation::Tanh);
    net.output_clip = spec.output_clip;
    net.weight_clip = spec.weight_clip;
    adv = std::make_shared<Sieve>(net);
  } else if (spec.adversary == "linear") {
    adv = poly("lambda", spec.lambda_degree);
  } else {
    throw InvalidArgument("adversary must be linear or network");
  }
  FganOptions opts;
  opts.model_samples = std::max<std::size_t>(1, static_cast<std::size_t>(spec.model_samples_factor * n));
  opts.seed = derive_seed(seed, {0xfa});
  p.loss = std::make_shared<FganLoss>(div, model, adv, layout, opts);
  if (spec.fixed_theta) {
    const double at = mu + spec.model_offset;
    p.theta_space = std::make_shared<BoxSpace>("theta", Eigen::VectorXd::Constant(1, at),
                                               Eigen::VectorXd::Constant(1, at));
    p.warm.theta = Eigen::VectorXd::Constant(1, at);
  } else {
    p.theta_space = std::make_shared<BoxSpace>("theta", Eigen::VectorXd::Constant(1, mu - spec.theta_box),
                                               Eigen::VectorXd::Constant(1, mu + spec.theta_box));
    p.warm.theta = Eigen::VectorXd::Constant(1, mu - 0.5);
  }
  p.lambda_space = adv;
  p.solver.inner_solver = InnerSolver::Gradient;
  if (spec.adversary == "network") {
    // Nonconcave inner problem: local ascent certifies slacks of order 1/n.
    const double b = spec.outer_budget_scale / static_cast<double>(n);
    p.solver.budget.eta_max = std::max(p.solver.budget.eta_max, b);
    p.solver.budget.eta_tilde_max = std::max(p.solver.budget.eta_tilde_max, b);
  }
  p.population_gap = [div, mu, sigma](const Eigen::VectorXd& th) {
    return gaussian_location_divergence(div, (th[0] - mu) / sigma);
  };
}

}  // namespace

Problem build_problem(const Dgp& dgp, const ProblemSpec& spec, const Dataset& data,
                      std::uint64_t seed) {
  Problem p;
  p.solver.seed = derive_seed(seed, {0x501e});
  if (spec.family == "cue" || spec.family == "gel") {
    gel_problem(dgp, spec, p);
  } else if (spec.family == "cmr" || spec.family == "cgel") {
    cmr_problem(dgp, spec, data, p);
  } else if (spec.family == "sbeed") {
    auto* mdp = dynamic_cast<const TabularMdpDgp*>(&dgp);
    if (!mdp) throw InvalidArgument("sbeed needs tabular_mdp data");
    sbeed_problem(*mdp, spec, p);
  } else if (spec.family == "riesz") {
    auto* r = dynamic_cast<const RieszDgp*>(&dgp);
    if (!r) throw InvalidArgument("riesz needs riesz_mean or riesz_derivative data");
    riesz_problem(*r, spec, data, seed, p);
  } else if (spec.family == "fgan") {
    auto* g = dynamic_cast<const GaussianLocationDgp*>(&dgp);
    if (!g) throw InvalidArgument("fgan needs gaussian_location data");
    fgan_problem(*g, spec, data.n(), seed, p);
  } else {
    throw InvalidArgument("unknown family '" + spec.family + "'");
  }
  return p;
}

ReplicaSolve solve_replica(const Dgp& dgp, const ProblemSpec& spec, std::size_t n,
                           std::uint64_t seed, const std::function<void(SolverConfig&)>& tweak) {
  Dataset data = dgp.generate(n, derive_seed(seed, {0xda7a, n}));
  Problem p = build_problem(dgp, spec, data, derive_seed(seed, {0x9b, n}));
  if (tweak) tweak(p.solver);
  NashSolution sol = solve(*p.loss, *p.theta_space, *p.lambda_space, data, p.solver, p.warm);
  return {std::move(data), std::move(p), std::move(sol)};
}

}  // namespace aest
