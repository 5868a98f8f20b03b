#include "bpmf/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "bpmf/exact_oracle.hpp"
#include "bpmf/free_energy.hpp"
#include "bpmf/instance_gen.hpp"
#include "bpmf/ofdm.hpp"
#include "bpmf/scheduler.hpp"

namespace bpmf {
namespace verify {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// fully-MF random instance: small positive-factor graph
FactorGraph random_mf_graph(std::mt19937_64& rng) {
  int nv = 2 + static_cast<int>(rng() % 4u);
  std::vector<Variable> vars;
  std::vector<int> sizes;
  for (int i = 0; i < nv; ++i) {
    int sz = 2 + static_cast<int>(rng() % 2u);
    sizes.push_back(sz);
    vars.push_back({"v" + std::to_string(i), VarKind::Discrete, sz, 0});
  }
  std::vector<FactorSpec> fs;
  int nf = 2 + static_cast<int>(rng() % 4u);
  for (int a = 0; a < nf; ++a) {
    int arity = 1 + static_cast<int>(rng() % 2u);
    std::vector<VarId> scope;
    while (static_cast<int>(scope.size()) < arity) {
      VarId cand = static_cast<VarId>(rng() % static_cast<unsigned>(nv));
      bool dup = false;
      for (VarId s : scope) dup |= s == cand;
      if (!dup) scope.push_back(cand);
    }
    std::vector<int> ssz;
    for (VarId i : scope) ssz.push_back(sizes[i]);
    fs.push_back({"f" + std::to_string(a), scope,
                  TablePotential{gen::random_positive_table(rng, scope, ssz,
                                                            0.3, 1.7)}});
  }
  return build_graph(vars, fs);
}

// three BP chain variables plus a Gaussian channel-like variable observed
// through one shared BP variable
gen::MixedInstance gaussian_mixed_instance(std::mt19937_64& rng) {
  std::vector<Variable> vars{{"x0", VarKind::Discrete, 2, 0},
                             {"x1", VarKind::Discrete, 2, 0},
                             {"x2", VarKind::Discrete, 2, 0},
                             {"h", VarKind::GaussianVec, 0, 2}};
  std::vector<FactorSpec> fs;
  fs.push_back({"bp01",
                {0, 1},
                TablePotential{gen::random_positive_table(rng, {0, 1}, {2, 2})}});
  fs.push_back({"bp12",
                {1, 2},
                TablePotential{gen::random_positive_table(rng, {1, 2}, {2, 2})}});
  Eigen::MatrixXcd lam(2, 2);
  lam << cplx(2.0, 0.0), cplx(0.3, 0.1), cplx(0.3, -0.1), cplx(1.5, 0.0);
  fs.push_back({"prior_h",
                {3},
                GaussianPriorPotential{Eigen::VectorXcd::Zero(2), lam}});
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ScalarObservationPotential obs;
  obs.y = cplx(unif(rng), unif(rng));
  obs.gamma = 1.3;
  obs.coord = 0;
  obs.symbols = {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
  fs.push_back({"obs", {3, 0}, obs});
  ScalarObservationPotential pil;
  pil.y = cplx(unif(rng), unif(rng));
  pil.gamma = 1.3;
  pil.coord = 1;
  pil.symbols = {cplx(1.0, 0.0)};
  fs.push_back({"pilot", {3}, pil});
  gen::MixedInstance inst;
  inst.graph = build_graph(vars, fs);
  inst.bp_ids = {0, 1};
  return inst;
}

BeliefState uniform_mf_state(const FactorGraph& g) {
  BeliefState st;
  st.var_beliefs.resize(g.num_vars());
  st.gauss_beliefs.resize(g.num_vars());
  st.factor_beliefs.resize(g.num_factors());
  st.z_factor.assign(g.num_factors(), 1.0);
  st.z_var.assign(g.num_vars(), 1.0);
  for (VarId i = 0; i < g.num_vars(); ++i)
    st.var_beliefs[i] = Table::uniform({i}, {g.var(i).states});
  return st;
}

// one coordinate update of the fully factorized approximation
Table mf_coordinate_update(const FactorGraph& g, const BeliefState& st,
                           VarId i) {
  int states = g.var(i).states;
  std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
  for (FactorId a : g.var_neighbors(i)) {
    const Table& f = g.table(a);
    const auto& nb = g.neighbors(a);
    std::vector<Message> n_in(nb.size());
    int slot = -1;
    for (std::size_t s = 0; s < nb.size(); ++s) {
      n_in[s] = st.var_beliefs[nb[s]];
      if (nb[s] == i) slot = static_cast<int>(s);
    }
    Message m = mf_factor_to_var(f, n_in, slot);
    for (int x = 0; x < states; ++x)
      acc[x] += m.log_at(static_cast<std::size_t>(x));
  }
  return normalize(Table::from_log({i}, {states}, std::move(acc))).table;
}

}  // namespace

CheckResult check_tree_exactness(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(o.seed ^ 0x7ee);
  double worst_marg = 0.0, worst_fe = 0.0;
  for (int t = 0; t < 100; ++t) {
    FactorGraph g = gen::random_tree_bayes_net(rng, 8, 4);
    BpMfPartition p = all_bp_partition(g);
    RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{10, 1e-12, 1e-11});
    auto em = oracle::exact_marginals(g);
    for (VarId i = 0; i < g.num_vars(); ++i)
      worst_marg = std::max(
          worst_marg, max_abs_diff(res.state.var_beliefs[i], em.var_marginals[i]));
    worst_fe = std::max(worst_fe, std::abs(bethe_free_energy(g, res.state)));
  }
  double secs = seconds_since(t0);
  bool pass = worst_marg < 1e-10 && worst_fe < 1e-9 && secs < 10.0;
  return {"tree-exactness",
          pass,
          fmt("max marginal err %.3g, max |bethe| %.3g, %.1fs", worst_marg,
              worst_fe, secs)};
}

CheckResult check_mf_monotonicity(const Options& o) {
  std::mt19937_64 rng(o.seed ^ 0x3f);
  double worst_increase = 0.0, worst_residual = 0.0;
  for (int t = 0; t < 100; ++t) {
    FactorGraph g = random_mf_graph(rng);
    BeliefState st = uniform_mf_state(g);
    double fe = mf_free_energy(g, st);
    for (int sweep = 0; sweep < 400; ++sweep) {
      double change = 0.0;
      for (VarId i = 0; i < g.num_vars(); ++i) {
        Table bnew = mf_coordinate_update(g, st, i);
        change = std::max(change, max_abs_diff(bnew, st.var_beliefs[i]));
        st.var_beliefs[i] = std::move(bnew);
        double fe_new = mf_free_energy(g, st);
        worst_increase = std::max(worst_increase, fe_new - fe);
        fe = fe_new;
      }
      if (change < 1e-13) break;
    }
    for (VarId i = 0; i < g.num_vars(); ++i)
      worst_residual = std::max(
          worst_residual,
          max_abs_diff(mf_coordinate_update(g, st, i), st.var_beliefs[i]));
  }
  bool pass = worst_increase <= 1e-12 && worst_residual < 1e-9;
  return {"mf-monotonicity",
          pass,
          fmt("max per-update increase %.3g, fixed-point residual %.3g",
              worst_increase, worst_residual)};
}

CheckResult check_combined_monotonicity(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(o.seed ^ 0xc0);
  double worst_increase = 0.0, worst_stat = 0.0, worst_marg = 0.0,
         worst_norm = 0.0;
  int not_converged = 0;
  for (int t = 0; t < 100; ++t) {
    gen::MixedInstance inst = (t % 10 == 9)
                                  ? gaussian_mixed_instance(rng)
                                  : gen::random_applicable_instance(rng);
    BpMfPartition p = partition(inst.graph, inst.bp_ids);
    RunResult res =
        run_algorithm1(inst.graph, p, UpdateConfig{}, StopRule{2000, 1e-13, 1e-10});
    if (!res.trace.converged) ++not_converged;
    for (std::size_t k = 1; k < res.trace.rows.size(); ++k)
      worst_increase =
          std::max(worst_increase, res.trace.rows[k].free_energy -
                                       res.trace.rows[k - 1].free_energy);
    worst_stat = std::max(worst_stat, res.trace.rows.back().stat_residual);
    ConstraintResiduals cr = constraint_residuals(inst.graph, p, res.state);
    worst_marg = std::max(worst_marg, cr.max_marg_residual);
    worst_norm = std::max(worst_norm, cr.max_norm_residual);
  }
  double secs = seconds_since(t0);
  bool pass = worst_increase <= 1e-12 && worst_stat < 1e-8 &&
              worst_marg < 1e-9 && worst_norm < 1e-9 && not_converged == 0 &&
              secs < 30.0;
  return {"combined-monotonicity",
          pass,
          fmt("max increase %.3g, stat %.3g, marg %.3g", worst_increase,
              worst_stat, worst_marg) +
              fmt(", norm %.3g, unconverged %.0f, %.1fs", worst_norm,
                  not_converged, secs)};
}

CheckResult check_reductions(const Options& o) {
  std::mt19937_64 rng(o.seed ^ 0x4ed);
  bool ok = true;
  std::string what;
  // BP side: the combined machinery on an all-BP partition must be
  // bit-identical to the dedicated forms
  for (int t = 0; t < 20 && ok; ++t) {
    FactorGraph g = gen::random_tree_bayes_net(rng, 6, 3);
    BpMfPartition p = all_bp_partition(g);
    RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{10, 1e-12, 1e-11});
    double fb = bethe_free_energy(g, res.state);
    double fc = combined_free_energy(g, p, res.state);
    if (fb != fc) {
      ok = false;
      what = fmt("bethe %.17g vs combined %.17g", fb, fc);
    }
    // variable updates with an empty MF side
    for (VarId i = 0; i < g.num_vars() && ok; ++i) {
      std::vector<Message> ms;
      for (FactorId a : g.var_neighbors(i)) {
        const auto& nb = g.neighbors(a);
        for (std::size_t s = 0; s < nb.size(); ++s)
          if (nb[s] == i) ms.push_back(res.state.messages.m[a][s]);
      }
      if (ms.empty()) continue;
      Message pure = bp_var_to_factor(i, g.var(i).states, ms, 0);
      Message comb =
          combined_var_to_factor(i, g.var(i).states, ms, 0, {}, false);
      if (pure.raw() != comb.raw()) {
        ok = false;
        what = "variable update differs from the pure-BP kernel";
      }
    }
  }
  // MF side: all-MF combined energy must be bit-identical to the dedicated form
  for (int t = 0; t < 20 && ok; ++t) {
    FactorGraph g = random_mf_graph(rng);
    BeliefState st = uniform_mf_state(g);
    for (int sweep = 0; sweep < 50; ++sweep)
      for (VarId i = 0; i < g.num_vars(); ++i)
        st.var_beliefs[i] = mf_coordinate_update(g, st, i);
    double fm = mf_free_energy(g, st);
    double fc = combined_free_energy(g, all_mf_partition(g), st);
    if (fm != fc) {
      ok = false;
      what = fmt("mf %.17g vs combined %.17g", fm, fc);
    }
  }
  return {"reductions", ok, ok ? "bit-identical on both reductions" : what};
}

CheckResult check_hard_constraints(const Options& o) {
  (void)o;
  std::vector<Variable> vars;
  for (int i = 0; i < 4; ++i)
    vars.push_back({"x" + std::to_string(i), VarKind::Discrete, 2, 0});
  std::vector<FactorSpec> fs;
  fs.push_back({"p01", {0, 1}, TablePotential{gen::parity_table({0, 1})}});
  fs.push_back({"p12", {1, 2}, TablePotential{gen::parity_table({1, 2})}});
  fs.push_back({"p23", {2, 3}, TablePotential{gen::parity_table({2, 3})}});
  fs.push_back({"e0", {0}, TablePotential{Table::from_linear({0}, {2}, {0.9, 0.1})}});
  fs.push_back({"e3", {3}, TablePotential{Table::from_linear({3}, {2}, {0.3, 0.7})}});
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);
  RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{10, 1e-12, 1e-11});

  bool support_ok = true;
  for (FactorId a = 0; a < 3; ++a) {
    const Table& f = g.table(a);
    const Table& b = res.state.factor_beliefs[a];
    for (std::size_t k = 0; k < f.size(); ++k)
      if (f.linear_at(k) == 0.0 && b.linear_at(k) != 0.0) support_ok = false;
  }
  double fe = combined_free_energy(g, p, res.state);
  bool finite_ok = std::isfinite(fe);

  auto em = oracle::exact_marginals(g);
  double marg_err = 0.0;
  for (VarId i = 0; i < g.num_vars(); ++i)
    marg_err = std::max(
        marg_err, max_abs_diff(res.state.var_beliefs[i], em.var_marginals[i]));

  // forcing mass onto a zero of the potential must give exactly +inf
  BeliefState bad = res.state;
  bad.factor_beliefs[0] = Table::uniform({0, 1}, {2, 2});
  bool inf_ok = combined_free_energy(g, p, bad) == kPosInf;

  bool pass = support_ok && finite_ok && inf_ok && marg_err < 1e-10;
  return {"hard-constraints",
          pass,
          fmt("support ok %.0f, finite %.17g, marg err %.3g",
              support_ok ? 1.0 : 0.0, fe, marg_err) +
              (inf_ok ? ", forced mass gives +inf" : ", +inf check FAILED")};
}

CheckResult check_rescaling(const Options& o) {
  std::mt19937_64 rng(o.seed ^ 0x1e);
  // forward/backward on normalized trees: omega = 1, scale factors g = 1
  double worst_g = 0.0;
  bool ok = true;
  for (int t = 0; t < 20; ++t) {
    FactorGraph g = gen::random_tree_bayes_net(rng, 7, 3);
    BpMfPartition p = all_bp_partition(g);
    EdgeMessages msgs = EdgeMessages::sized(g);
    std::vector<Table> evidence(g.num_vars());
    forward_backward(g, p, evidence, msgs);
    UnnormalizedSolution sol;
    sol.n = msgs.n;
    sol.omega.resize(g.num_factors());
    for (FactorId a = 0; a < g.num_factors(); ++a)
      sol.omega[a].assign(g.neighbors(a).size(), 1.0);
    RescalingReport rep = rescaling_check(g, sol, 1e-7);
    if (!rep.rescalable) ok = false;
    for (double gi : rep.g) worst_g = std::max(worst_g, std::abs(gi - 1.0));
  }
  if (worst_g > 1e-9) ok = false;

  // three-cycle with unequal factor scales, all-one messages claimed as a
  // solution with omega = 1: the per-factor masses differ, so no consistent
  // g exists
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0},
                             {"c", VarKind::Discrete, 2, 0}};
  auto sym = [](double scale) {
    return Table::from_linear({0, 1}, {2, 2},
                              {scale * 0.7, scale * 0.3, scale * 0.3,
                               scale * 0.7});
  };
  Table fab = sym(2.0), fbc = sym(1.0), fca = sym(0.5);
  std::vector<FactorSpec> cfs{
      {"fab", {0, 1}, TablePotential{Table::from_linear({0, 1}, {2, 2}, fab.raw())}},
      {"fbc", {1, 2}, TablePotential{Table::from_linear({1, 2}, {2, 2}, fbc.raw())}},
      {"fca", {2, 0}, TablePotential{Table::from_linear({2, 0}, {2, 2}, fca.raw())}}};
  FactorGraph cg = build_graph(vars, cfs);
  UnnormalizedSolution csol;
  csol.n.resize(3);
  csol.omega.resize(3);
  for (FactorId a = 0; a < 3; ++a) {
    const auto& nb = cg.neighbors(a);
    for (VarId i : nb) csol.n[a].push_back(Table::ones({i}, {2}));
    csol.omega[a].assign(nb.size(), 1.0);
  }
  RescalingReport crep = rescaling_check(cg, csol, 1e-9);
  bool counter_ok = !crep.rescalable && crep.violation.has_value();

  // independent exhaustive search over the candidate scale factors
  bool search_found = false;
  for (VarId i = 0; i < cg.num_vars() && !search_found; ++i) {
    // candidates for g_i are omega/z for each neighbor; try each globally
    for (FactorId a : cg.var_neighbors(i)) {
      double cand = 1.0 / crep.z_tilde[a];
      bool consistent = true;
      for (FactorId b : cg.var_neighbors(i)) {
        double other = 1.0 / crep.z_tilde[b];
        if (std::abs(cand - other) > 1e-9 * std::max(cand, other))
          consistent = false;
      }
      search_found |= consistent;
    }
  }
  bool counter_search_ok = !search_found;

  // planted scale factors are recovered exactly
  UnnormalizedSolution planted = csol;
  std::vector<double> g_true{1.5, 2.5, 0.75};
  for (FactorId a = 0; a < 3; ++a) {
    const auto& nb = cg.neighbors(a);
    for (std::size_t s = 0; s < nb.size(); ++s)
      planted.omega[a][s] = g_true[nb[s]] * crep.z_tilde[a];
  }
  RescalingReport prep = rescaling_check(cg, planted, 1e-9);
  double planted_err = 0.0;
  for (VarId i = 0; i < 3; ++i)
    planted_err = std::max(planted_err, std::abs(prep.g[i] - g_true[i]));
  bool planted_ok = prep.rescalable && planted_err < 1e-9;

  bool pass = ok && counter_ok && counter_search_ok && planted_ok;
  return {"rescaling-checker",
          pass,
          fmt("trees g err %.3g, planted err %.3g", worst_g, planted_err) +
              (counter_ok ? ", counterexample rejected" : ", counterexample MISSED") +
              (counter_search_ok ? ", search agrees" : ", search DISAGREES")};
}

CheckResult check_gaussian_closed_forms(const Options& o) {
  std::mt19937_64 rng(o.seed ^ 0x6a);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  // product lemma against pointwise log-density addition on a grid
  double worst_grid = 0.0;
  for (int t = 0; t < 5; ++t) {
    ComplexGaussian g1{Eigen::VectorXcd::Constant(1, cplx(unif(rng), unif(rng))),
                       Eigen::MatrixXcd::Constant(1, 1, cplx(0.5 + t * 0.3, 0.0))};
    ComplexGaussian g2{Eigen::VectorXcd::Constant(1, cplx(unif(rng), unif(rng))),
                       Eigen::MatrixXcd::Constant(1, 1, cplx(1.1, 0.0))};
    ComplexGaussian prod = gaussian_product({g1, g2});
    double shift = 0.0;
    bool first = true;
    for (int a = -20; a <= 20; ++a)
      for (int b = -20; b <= 20; ++b) {
        Eigen::VectorXcd x =
            Eigen::VectorXcd::Constant(1, cplx(a * 0.15, b * 0.15));
        double lhs = g1.log_density(x) + g2.log_density(x);
        double rhs = prod.log_density(x);
        if (first) {
          shift = lhs - rhs;
          first = false;
        } else {
          worst_grid = std::max(worst_grid, std::abs(lhs - rhs - shift));
        }
      }
  }
  // known pilot layout: the precision-form update equals the covariance-form
  // linear MMSE estimate
  ofdm::OfdmScenario sc;
  sc.carriers = 16;
  sc.pilot_indices = ofdm::OfdmScenario::evenly_spaced_pilots(16, 4);
  sc.constellation = ofdm::Constellation::qpsk();
  sc.code_generators_octal = {7, 5};
  ofdm::ScenarioRuntime rt(sc);
  double gamma = 2.0;
  Rng crng(o.seed ^ 0x77);
  Eigen::VectorXcd x(16);
  for (int i = 0; i < 16; ++i) x[i] = crng.cnormal();
  for (std::size_t k = 0; k < sc.pilot_indices.size(); ++k)
    x[sc.pilot_indices[k]] = rt.pilot_symbols()[static_cast<int>(k)];
  ofdm::ChannelDraw d = ofdm::apply_channel(rt, x, gamma, crng);
  ComplexGaussian post = ofdm::pilot_posterior(rt, d.y, gamma);

  int Mp = static_cast<int>(sc.pilot_indices.size());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(Mp, 16);
  Eigen::VectorXcd yp(Mp);
  for (int k = 0; k < Mp; ++k) {
    A(k, sc.pilot_indices[k]) = rt.pilot_symbols()[k];
    yp[k] = d.y[sc.pilot_indices[k]];
  }
  const Eigen::MatrixXcd& C = rt.prior_covariance();
  Eigen::MatrixXcd S =
      A * C * A.adjoint() + (1.0 / gamma) * Eigen::MatrixXcd::Identity(Mp, Mp);
  Eigen::MatrixXcd Sinv = S.inverse();
  Eigen::VectorXcd mu_mmse = C * A.adjoint() * Sinv * yp;
  Eigen::MatrixXcd cov_mmse = C - C * A.adjoint() * Sinv * A * C;

  double mu_err = (mu_mmse - post.mean).cwiseAbs().maxCoeff();
  double cov_err = (cov_mmse - post.covariance()).cwiseAbs().maxCoeff();

  bool pass = worst_grid < 1e-9 && mu_err < 1e-10 && cov_err < 1e-10;
  return {"gaussian-closed-forms",
          pass,
          fmt("grid err %.3g, mmse mean err %.3g, cov err %.3g", worst_grid,
              mu_err, cov_err)};
}

CheckResult check_em_specialization(const Options& o) {
  (void)o;
  std::vector<Variable> vars{{"theta", VarKind::Discrete, 3, 0},
                             {"x", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"prior",
       {0},
       TablePotential{Table::from_linear({0}, {3}, {0.2, 0.5, 0.3})}},
      {"coupling",
       {0, 1},
       TablePotential{Table::from_linear({0, 1}, {3, 2},
                                         {0.9, 0.1, 0.2, 0.8, 0.6, 0.4})}},
      {"evidence",
       {1},
       TablePotential{Table::from_linear({1}, {2}, {0.3, 0.7})}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_mf_partition(g);
  EmConstraintSet em;
  em.vars = {0};
  RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{200, 1e-12, 1e-11}, &em);
  auto marg = oracle::exact_marginals(g);
  int truth = static_cast<int>(marg.var_marginals[0].argmax());
  int found = static_cast<int>(res.state.var_beliefs[0].argmax());
  bool point_mass = res.state.var_beliefs[0].max_linear() == 1.0;
  bool pass = res.trace.converged && point_mass && found == truth;
  return {"em-specialization",
          pass,
          fmt("estimate %.0f, oracle argmax %.0f", double(found), double(truth))};
}

CheckResult check_ofdm_experiment(const Options& o) {
  if (!o.include_ofdm)
    return {"ofdm-desk-experiment", true, "skipped by configuration"};
  auto t0 = std::chrono::steady_clock::now();
  ofdm::OfdmScenario sc;  // desk-scale defaults: 64 carriers, 12 pilots, qpsk
  sc.pilot_indices = ofdm::OfdmScenario::evenly_spaced_pilots(64, 12);
  ofdm::ScenarioRuntime rt(sc);
  std::vector<ofdm::Receiver> rcv{ofdm::Receiver::BpMf, ofdm::Receiver::BpGauss,
                                  ofdm::Receiver::PerfectCsi};
  std::vector<ofdm::BerRow> rows = ofdm::run_ber_sweep(rt, rcv, o.seed, o.jobs);

  auto ber_of = [&](ofdm::Receiver r, int si) {
    for (const auto& row : rows)
      if (row.receiver == r && row.ebn0_db == sc.ebn0_db[si]) return row.ber;
    return -1.0;
  };
  double nbits = double(rt.info_len()) * sc.trials;
  int nsnr = static_cast<int>(sc.ebn0_db.size());

  // (a) BER non-increasing in SNR within Monte-Carlo slack
  bool mono_ok = true;
  for (ofdm::Receiver r : rcv)
    for (int si = 0; si + 1 < nsnr; ++si) {
      double b0 = ber_of(r, si), b1 = ber_of(r, si + 1);
      double p = std::max(std::max(b0, b1), 1.0 / nbits);
      double slack = 3.0 * std::sqrt(p * (1.0 - p) / nbits) + 2.0 / nbits;
      if (b1 > b0 + slack) mono_ok = false;
    }
  // (b) combined scheme at least as good as the moment-matched baseline at
  // every point where either is above 1e-4
  bool order_ok = true;
  double worst_gap = 0.0;
  for (int si = 0; si < nsnr; ++si) {
    double bm = ber_of(ofdm::Receiver::BpMf, si);
    double bg = ber_of(ofdm::Receiver::BpGauss, si);
    if (bm > 1e-4 || bg > 1e-4) {
      if (bm > bg + 1e-12) order_ok = false;
      worst_gap = std::max(worst_gap, bm - bg);
    }
  }
  // (c) within one order of magnitude of perfect CSI at the top SNR point
  double bm_top =
      std::max(ber_of(ofdm::Receiver::BpMf, nsnr - 1), 1.0 / nbits);
  double bc_top =
      std::max(ber_of(ofdm::Receiver::PerfectCsi, nsnr - 1), 1.0 / nbits);
  bool close_ok = bm_top <= 10.0 * bc_top;

  // the large configuration must run end to end (values not gated)
  bool table1_ok = true;
  try {
    ofdm::OfdmScenario big;
    if (!o.table1_scenario.empty()) {
      big = ofdm::load_scenario(o.table1_scenario);
    } else {
      big.carriers = 300;
      big.pilot_indices = ofdm::OfdmScenario::evenly_spaced_pilots(300, 13);
      big.constellation = ofdm::Constellation::qam16();
      big.code_generators_octal = {133, 171, 165};
    }
    big.trials = 1;
    big.ebn0_db = {8.0};
    big.max_outer = 5;
    ofdm::ScenarioRuntime brt(big);
    ofdm::run_ber_sweep(brt, {ofdm::Receiver::BpMf}, o.seed, 1);
  } catch (const std::exception&) {
    table1_ok = false;
  }

  double secs = seconds_since(t0);
  bool pass = mono_ok && order_ok && close_ok && table1_ok && secs < 600.0;
  return {"ofdm-desk-experiment",
          pass,
          std::string(mono_ok ? "monotone" : "NOT monotone") +
              (order_ok ? ", combined <= baseline" : ", ordering FAILED") +
              fmt(", top-snr ratio %.2f", bm_top / bc_top) +
              (table1_ok ? ", large scenario ran" : ", large scenario FAILED") +
              fmt(", %.0fs", secs)};
}

CheckResult check_determinism(const Options& o) {
  // receiver sweep: identical (scenario, seed, jobs) twice
  ofdm::OfdmScenario sc;
  sc.carriers = 16;
  sc.pilot_indices = ofdm::OfdmScenario::evenly_spaced_pilots(16, 4);
  sc.trials = 3;
  sc.ebn0_db = {2.0, 6.0};
  sc.max_outer = 5;
  ofdm::ScenarioRuntime rt(sc);
  std::vector<ofdm::Receiver> rcv{ofdm::Receiver::BpMf,
                                  ofdm::Receiver::PerfectCsi};
  std::ostringstream csv1, csv2;
  ofdm::write_ber_csv(ofdm::run_ber_sweep(rt, rcv, o.seed, o.jobs), csv1);
  ofdm::write_ber_csv(ofdm::run_ber_sweep(rt, rcv, o.seed, o.jobs), csv2);
  bool sweep_ok = csv1.str() == csv2.str();

  // inference trace replay
  std::mt19937_64 rng(o.seed ^ 0xd5);
  gen::MixedInstance inst = gen::random_applicable_instance(rng);
  BpMfPartition p = partition(inst.graph, inst.bp_ids);
  std::ostringstream t1, t2;
  write_trace_csv(
      run_algorithm1(inst.graph, p, UpdateConfig{}, StopRule{}).trace, t1);
  write_trace_csv(
      run_algorithm1(inst.graph, p, UpdateConfig{}, StopRule{}).trace, t2);
  bool trace_ok = t1.str() == t2.str();

  bool pass = sweep_ok && trace_ok;
  return {"determinism",
          pass,
          std::string(sweep_ok ? "sweep byte-identical" : "sweep DIFFERS") +
              (trace_ok ? ", trace byte-identical" : ", trace DIFFERS")};
}

std::vector<CheckResult> run_all(const Options& o) {
  std::vector<CheckResult> out;
  out.push_back(check_tree_exactness(o));
  out.push_back(check_mf_monotonicity(o));
  out.push_back(check_combined_monotonicity(o));
  out.push_back(check_reductions(o));
  out.push_back(check_hard_constraints(o));
  out.push_back(check_rescaling(o));
  out.push_back(check_gaussian_closed_forms(o));
  out.push_back(check_em_specialization(o));
  out.push_back(check_ofdm_experiment(o));
  out.push_back(check_determinism(o));
  return out;
}

int print_report(const std::vector<CheckResult>& results, std::ostream& os) {
  int failures = 0;
  for (const CheckResult& r : results) {
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
       << "\n";
    if (!r.pass) ++failures;
  }
  os << (failures == 0 ? "all checks passed\n"
                       : std::to_string(failures) + " check(s) failed\n");
  return failures;
}

}  // namespace verify
}  // namespace bpmf
