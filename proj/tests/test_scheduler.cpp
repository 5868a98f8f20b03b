#include <doctest.h>

#include <random>
#include <sstream>

#include "bpmf/exact_oracle.hpp"
#include "bpmf/instance_gen.hpp"
#include "bpmf/scheduler.hpp"

using namespace bpmf;
using namespace bpmf::gen;

TEST_CASE("pure MF graphs reduce to monotone coordinate descent") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                               {"b", VarKind::Discrete, 3, 0},
                               {"c", VarKind::Discrete, 2, 0}};
    std::vector<FactorSpec> fs{
        {"fab", {0, 1},
         TablePotential{random_positive_table(rng, {0, 1}, {2, 3})}},
        {"fbc", {1, 2},
         TablePotential{random_positive_table(rng, {1, 2}, {3, 2})}}};
    FactorGraph g = build_graph(vars, fs);
    RunResult res = run_algorithm1(g, all_mf_partition(g), UpdateConfig{},
                                   StopRule{500, 1e-12, 1e-11});
    CHECK(res.trace.converged);
    for (std::size_t k = 1; k < res.trace.rows.size(); ++k)
      CHECK(res.trace.rows[k].free_energy <=
            res.trace.rows[k - 1].free_energy + 1e-12);
  }
}

TEST_CASE("pure BP trees converge in one pass and stay fixed") {
  std::mt19937_64 rng(5);
  FactorGraph g = random_tree_bayes_net(rng, 7, 3);
  RunResult res = run_algorithm1(g, all_bp_partition(g), UpdateConfig{},
                                 StopRule{10, 1e-12, 1e-11});
  CHECK(res.trace.converged);
  CHECK(res.trace.rows.size() == 2);  // second pass confirms the fixed point
  CHECK(res.trace.rows[1].max_delta == 0.0);
  auto em = oracle::exact_marginals(g);
  for (VarId i = 0; i < g.num_vars(); ++i)
    CHECK(max_abs_diff(res.state.var_beliefs[i], em.var_marginals[i]) < 1e-12);
}

TEST_CASE("mixed instance with a Gaussian variable converges cleanly") {
  // three-variable BP chain observed through one coordinate of a Gaussian
  std::vector<Variable> vars{{"x0", VarKind::Discrete, 2, 0},
                             {"x1", VarKind::Discrete, 2, 0},
                             {"x2", VarKind::Discrete, 2, 0},
                             {"h", VarKind::GaussianVec, 0, 2}};
  std::mt19937_64 rng(7);
  Eigen::MatrixXcd lam(2, 2);
  lam << cplx(2.0, 0.0), cplx(0.4, 0.2), cplx(0.4, -0.2), cplx(3.0, 0.0);
  ScalarObservationPotential obs{cplx(0.8, -0.5), 2.0, 0,
                                 {cplx(1, 0), cplx(-1, 0)}};
  ScalarObservationPotential pil{cplx(0.2, 0.9), 2.0, 1, {cplx(1, 0)}};
  std::vector<FactorSpec> fs{
      {"b01", {0, 1}, TablePotential{random_positive_table(rng, {0, 1}, {2, 2})}},
      {"b12", {1, 2}, TablePotential{random_positive_table(rng, {1, 2}, {2, 2})}},
      {"prior", {3}, GaussianPriorPotential{Eigen::VectorXcd::Zero(2), lam}},
      {"obs", {3, 0}, obs},
      {"pil", {3}, pil}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = partition(g, {0, 1});
  CHECK(check_algorithm1_applicable(g, p).applicable);
  RunResult res =
      run_algorithm1(g, p, UpdateConfig{}, StopRule{500, 1e-13, 1e-10});
  CHECK(res.trace.converged);
  CHECK(res.trace.rows.back().stat_residual < 1e-8);
  for (std::size_t k = 1; k < res.trace.rows.size(); ++k)
    CHECK(res.trace.rows[k].free_energy <=
          res.trace.rows[k - 1].free_energy + 1e-12);
}

TEST_CASE("forward/backward matches enumeration with evidence") {
  std::mt19937_64 rng(11);
  // chain of 3 binary variables
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0},
                             {"c", VarKind::Discrete, 2, 0}};
  Table f01 = random_positive_table(rng, {0, 1}, {2, 2});
  Table f12 = random_positive_table(rng, {1, 2}, {2, 2});
  std::vector<FactorSpec> fs{{"f01", {0, 1}, TablePotential{f01}},
                             {"f12", {1, 2}, TablePotential{f12}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);

  std::vector<Table> evidence(3);
  evidence[0] = Table::from_linear({0}, {2}, {0.9, 0.1}).to_domain(Domain::Log);
  evidence[2] = Table::from_linear({2}, {2}, {0.25, 0.75}).to_domain(Domain::Log);
  EdgeMessages msgs = EdgeMessages::sized(g);
  forward_backward(g, p, evidence, msgs);
  BeliefState st = compute_beliefs(g, p, std::move(msgs));

  // oracle on the graph with the evidence folded in as unary factors
  std::vector<FactorSpec> fs2 = fs;
  fs2.push_back({"e0", {0}, TablePotential{Table::from_linear({0}, {2}, {0.9, 0.1})}});
  fs2.push_back({"e2", {2}, TablePotential{Table::from_linear({2}, {2}, {0.25, 0.75})}});
  FactorGraph g2 = build_graph(vars, fs2);
  auto em = oracle::exact_marginals(g2);
  for (VarId i = 0; i < 3; ++i) {
    Table b = st.var_beliefs[i];
    // fold the evidence into the variable belief by hand
    if (evidence[i].size() != 0) {
      Table prod = product({b, evidence[i]}, {i}, {2});
      b = normalize(prod).table;
    }
    // the stored belief already contains the evidence; compare directly
    CHECK(max_abs_diff(st.var_beliefs[i], em.var_marginals[i]) < 1e-12);
  }
}

TEST_CASE("forward/backward with uniform factors gives uniform marginals") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 3, 0},
                             {"b", VarKind::Discrete, 3, 0}};
  std::vector<FactorSpec> fs{
      {"f", {0, 1}, TablePotential{Table::ones({0, 1}, {3, 3}, Domain::Linear)}}};
  FactorGraph g = build_graph(vars, fs);
  EdgeMessages msgs = EdgeMessages::sized(g);
  std::vector<Table> evidence(2);
  forward_backward(g, all_bp_partition(g), evidence, msgs);
  BeliefState st = compute_beliefs(g, all_bp_partition(g), std::move(msgs));
  for (VarId i = 0; i < 2; ++i)
    for (int x = 0; x < 3; ++x)
      CHECK(st.var_beliefs[i].linear_at(x) == doctest::Approx(1.0 / 3));
}

TEST_CASE("forward/backward on a hard parity chain") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0},
                             {"c", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"p01", {0, 1}, TablePotential{parity_table({0, 1})}},
      {"p12", {1, 2}, TablePotential{parity_table({1, 2})}},
      {"e0", {0}, TablePotential{Table::from_linear({0}, {2}, {0.7, 0.3})}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);
  RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{10, 1e-12, 1e-11});
  auto em = oracle::exact_marginals(g);
  for (VarId i = 0; i < 3; ++i)
    CHECK(max_abs_diff(res.state.var_beliefs[i], em.var_marginals[i]) < 1e-12);
  CHECK(std::isfinite(combined_free_energy(g, p, res.state)));
}

TEST_CASE("forward/backward rejects cycles") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"f1", {0, 1}, TablePotential{Table::ones({0, 1}, {2, 2})}},
      {"f2", {0, 1}, TablePotential{Table::ones({0, 1}, {2, 2})}}};
  FactorGraph g = build_graph(vars, fs);
  EdgeMessages msgs = EdgeMessages::sized(g);
  std::vector<Table> evidence(2);
  CHECK_THROWS_AS(forward_backward(g, all_bp_partition(g), evidence, msgs),
                  Error);
}

TEST_CASE("loopy schedule on a weakly coupled cycle is near exact") {
  std::mt19937_64 rng(13);
  std::vector<Variable> vars;
  for (int i = 0; i < 4; ++i)
    vars.push_back({"v" + std::to_string(i), VarKind::Discrete, 2, 0});
  std::vector<FactorSpec> fs;
  for (int i = 0; i < 4; ++i) {
    int j = (i + 1) % 4;
    fs.push_back({"c" + std::to_string(i),
                  {std::min(i, j), std::max(i, j)},
                  TablePotential{random_positive_table(
                      rng, {std::min(i, j), std::max(i, j)}, {2, 2}, 0.8,
                      1.25)}});
  }
  fs.push_back({"e0", {0}, TablePotential{Table::from_linear({0}, {2}, {0.6, 0.4})}});
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);
  UpdateConfig cfg;
  cfg.damping = 0.3;
  RunResult res = run_loopy(g, p, cfg, StopRule{200, 1e-10, 1e-9}, LoopyOptions{5});
  CHECK(res.trace.converged);
  auto em = oracle::exact_marginals(g);
  for (VarId i = 0; i < 4; ++i)
    CHECK(max_abs_diff(res.state.var_beliefs[i], em.var_marginals[i]) < 1e-3);
}

TEST_CASE("loopy schedule equals the convergent one on trees") {
  std::mt19937_64 rng(17);
  MixedInstance inst = random_applicable_instance(rng);
  BpMfPartition p = partition(inst.graph, inst.bp_ids);
  RunResult exact = run_algorithm1(inst.graph, p, UpdateConfig{},
                                   StopRule{800, 1e-13, 1e-11});
  RunResult loopy = run_loopy(inst.graph, p, UpdateConfig{},
                              StopRule{800, 1e-13, 1e-11}, LoopyOptions{6});
  REQUIRE(exact.trace.converged);
  REQUIRE(loopy.trace.converged);
  for (VarId i = 0; i < inst.graph.num_vars(); ++i)
    CHECK(max_abs_diff(exact.state.var_beliefs[i],
                       loopy.state.var_beliefs[i]) < 1e-8);
}

TEST_CASE("contradictions surface per the zero-support policy") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"par", {0, 1}, TablePotential{parity_table({0, 1})}},
      {"e0", {0}, TablePotential{Table::from_linear({0}, {2}, {0, 1})}},
      {"e1", {1}, TablePotential{Table::from_linear({1}, {2}, {1, 0})}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);
  CHECK_THROWS_AS(
      run_algorithm1(g, p, UpdateConfig{}, StopRule{10, 1e-12, 1e-11}),
      ContradictionError);
  UpdateConfig partial;
  partial.zero_support = ZeroSupportPolicy::Partial;
  RunResult res = run_algorithm1(g, p, partial, StopRule{10, 1e-12, 1e-11});
  CHECK(res.trace.contradiction);
}

TEST_CASE("termination by message delta implies near stationarity") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 10; ++t) {
    MixedInstance inst = random_applicable_instance(rng);
    BpMfPartition p = partition(inst.graph, inst.bp_ids);
    StopRule stop{2000, 1e-16, 1e-9};  // effectively delta-driven
    RunResult res = run_algorithm1(inst.graph, p, UpdateConfig{}, stop);
    if (res.trace.converged &&
        res.trace.stop_reason == "message delta below tolerance")
      CHECK(res.trace.rows.back().stat_residual < 10 * stop.msg_delta_tol);
  }
}

TEST_CASE("traces replay bit-identically") {
  std::mt19937_64 rng(23);
  MixedInstance inst = random_applicable_instance(rng);
  BpMfPartition p = partition(inst.graph, inst.bp_ids);
  std::ostringstream a, b;
  write_trace_csv(run_algorithm1(inst.graph, p, UpdateConfig{}, StopRule{}).trace, a);
  write_trace_csv(run_algorithm1(inst.graph, p, UpdateConfig{}, StopRule{}).trace, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("iteration,free_energy,marg_residual,stat_residual,"
                      "max_delta",
                      0) == 0);
}

TEST_CASE("free-energy trace is non-increasing on random applicable instances") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 25; ++t) {
    MixedInstance inst = random_applicable_instance(rng);
    BpMfPartition p = partition(inst.graph, inst.bp_ids);
    RunResult res = run_algorithm1(inst.graph, p, UpdateConfig{},
                                   StopRule{400, 1e-12, 1e-10});
    for (std::size_t k = 1; k < res.trace.rows.size(); ++k)
      CHECK(res.trace.rows[k].free_energy <=
            res.trace.rows[k - 1].free_energy + 1e-12);
  }
}
