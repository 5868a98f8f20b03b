#include <doctest.h>

#include <random>

#include "bpmf/exact_oracle.hpp"
#include "bpmf/instance_gen.hpp"
#include "bpmf/message_passing.hpp"
#include "bpmf/scheduler.hpp"

using namespace bpmf;
using namespace bpmf::gen;

namespace {

Message msg(VarId v, std::vector<double> lin) {
  int n = static_cast<int>(lin.size());
  return Table::from_linear({v}, {n}, std::move(lin));
}

}  // namespace

TEST_CASE("factor-to-variable update on a unary factor") {
  Table f = Table::from_linear({0}, {2}, {2, 6});
  std::vector<Message> n_in{Table::ones({0}, {2})};
  Message m = bp_factor_to_var(f, n_in, 0, UpdateConfig{});
  Message nm = normalize(m).table;
  CHECK(nm.linear_at(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(nm.linear_at(1) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("factor-to-variable update by hand") {
  Table f = Table::from_linear({1, 2}, {2, 2}, {1, 2, 3, 4});
  std::vector<Message> n_in{Table::ones({1}, {2}), msg(2, {0.5, 0.5})};
  Message m = normalize(bp_factor_to_var(f, n_in, 0, UpdateConfig{})).table;
  // sum_j f(x1,j) * 0.5 = [1.5, 3.5] -> [0.3, 0.7]
  CHECK(m.linear_at(0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(m.linear_at(1) == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("parity factors copy the incoming message") {
  Table f = parity_table({0, 1});
  std::vector<Message> n_in{Table::ones({0}, {2}), msg(1, {0.9, 0.1})};
  Message m = normalize(bp_factor_to_var(f, n_in, 0, UpdateConfig{})).table;
  CHECK(m.linear_at(0) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(m.linear_at(1) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("conflicting hard constraints raise a contradiction") {
  Table f = Table::from_linear({0, 1}, {2, 2}, {1, 0, 0, 0});
  std::vector<Message> n_in{msg(0, {0.0, 1.0}), msg(1, {1.0, 1.0})};
  CHECK_THROWS_AS(bp_factor_to_var(f, n_in, 1, UpdateConfig{}),
                  ContradictionError);
}

TEST_CASE("leaf variables send the empty product") {
  Message m = bp_var_to_factor(0, 3, {}, -1);
  for (int x = 0; x < 3; ++x) CHECK(m.linear_at(x) == doctest::Approx(1.0));
}

TEST_CASE("extrinsic toward the BP side, APP toward the MF side") {
  std::vector<Message> m_bp{msg(0, {0.6, 0.4})};
  std::vector<Message> m_mf{msg(0, {0.3, 0.7})};
  // toward the single BP factor: its own reply is excluded, only the MF
  // message remains
  Message to_bp = combined_var_to_factor(0, 2, m_bp, 0, m_mf, false);
  CHECK(to_bp.linear_at(0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(to_bp.linear_at(1) == doctest::Approx(0.7).epsilon(1e-14));
  // toward the MF factor: full product
  Message to_mf = combined_var_to_factor(0, 2, m_bp, -1, m_mf, false);
  CHECK(to_mf.linear_at(0) == doctest::Approx(0.18).epsilon(1e-14));
  CHECK(to_mf.linear_at(1) == doctest::Approx(0.28).epsilon(1e-14));
}

TEST_CASE("extrinsic exclusion invariance") {
  std::mt19937_64 rng(3);
  std::vector<Message> m_bp{msg(0, {0.6, 0.4}), msg(0, {0.2, 0.8})};
  std::vector<Message> m_mf{msg(0, {0.5, 0.5})};
  Message before = combined_var_to_factor(0, 2, m_bp, 0, m_mf, false);
  m_bp[0] = msg(0, {0.99, 0.01});  // the excluded reply changes
  Message after = combined_var_to_factor(0, 2, m_bp, 0, m_mf, false);
  CHECK(max_abs_diff(before, after) == 0.0);

  // toward an MF factor the same change is visible (APP)
  Message b2 = combined_var_to_factor(0, 2, m_bp, -1, m_mf, false);
  m_bp[0] = msg(0, {0.6, 0.4});
  Message a2 = combined_var_to_factor(0, 2, m_bp, -1, m_mf, false);
  CHECK(max_abs_diff(b2, a2) > 1e-3);
}

TEST_CASE("expected-log update examples") {
  // ln f = [[1,0],[0,1]], b2 uniform -> message proportional to
  // [e^0.5, e^0.5] -> uniform
  Table f = Table::from_log({0, 1}, {2, 2}, {1, 0, 0, 1});
  std::vector<Message> n_in{Table::ones({0}, {2}), msg(1, {0.5, 0.5})};
  Message m = normalize(mf_factor_to_var(f, n_in, 0)).table;
  CHECK(m.linear_at(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.linear_at(1) == doctest::Approx(0.5).epsilon(1e-14));

  // a point-mass neighbor collapses the expectation to a slice
  std::mt19937_64 rng(7);
  Table f2 = random_positive_table(rng, {0, 1}, {3, 2});
  std::vector<Message> n2{Table::ones({0}, {3}), Table::point_mass(1, 2, 1)};
  Message slice = normalize(mf_factor_to_var(f2, n2, 0)).table;
  std::vector<double> expect(3);
  for (int x = 0; x < 3; ++x)
    expect[x] = f2.linear_at(f2.index_of(std::array<int, 2>{x, 1}));
  Table et = normalize(Table::from_linear({0}, {3}, expect)).table;
  CHECK(max_abs_diff(slice, et) < 1e-12);
}

TEST_CASE("expected-log update rejects zeros inside the support") {
  Table f = Table::from_linear({0, 1}, {2, 2}, {1, 0, 1, 1});
  std::vector<Message> n_in{Table::ones({0}, {2}), msg(1, {0.5, 0.5})};
  CHECK_THROWS_AS(mf_factor_to_var(f, n_in, 0), Error);
  // a point mass that avoids the zero is fine
  std::vector<Message> ok{Table::ones({0}, {2}), Table::point_mass(1, 2, 0)};
  CHECK_NOTHROW(mf_factor_to_var(f, ok, 0));
}

TEST_CASE("observation message matches numerical integration") {
  ScalarObservationPotential obs;
  obs.y = cplx(0.6, -0.2);
  obs.gamma = 1.4;
  obs.coord = 0;
  obs.symbols = {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)};
  CoordMoments h{cplx(0.4, 0.3), 0.5};

  Message closed = normalize(mf_observation_to_symbol(obs, 0, h)).table;

  // brute-force E_h |y - h s|^2 over a grid of the complex plane, density
  // CN(h; mean, var)
  std::vector<double> lg(4);
  int G = 120;
  double span = 4.5, step = 2 * span / G;
  for (int s = 0; s < 4; ++s) {
    double acc = 0.0, wsum = 0.0;
    for (int a = 0; a < G; ++a)
      for (int b = 0; b < G; ++b) {
        cplx hv(h.mean.real() - span + (a + 0.5) * step,
                h.mean.imag() - span + (b + 0.5) * step);
        double w = std::exp(-std::norm(hv - h.mean) / h.var);
        acc += w * std::norm(obs.y - hv * obs.symbols[s]);
        wsum += w;
      }
    lg[s] = -obs.gamma * acc / wsum;
  }
  Message grid = normalize(Table::from_log({0}, {4}, std::move(lg))).table;
  CHECK(max_abs_diff(closed, grid) < 1e-6);
}

TEST_CASE("beliefs: pure BP on trees equals enumeration") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    FactorGraph g = random_tree_bayes_net(rng, 6, 3);
    BpMfPartition p = all_bp_partition(g);
    EdgeMessages msgs = EdgeMessages::sized(g);
    std::vector<Table> evidence(g.num_vars());
    forward_backward(g, p, evidence, msgs);
    BeliefState st = compute_beliefs(g, p, std::move(msgs));
    auto em = oracle::exact_marginals(g);
    for (VarId i = 0; i < g.num_vars(); ++i)
      CHECK(max_abs_diff(st.var_beliefs[i], em.var_marginals[i]) < 1e-12);
    for (FactorId a = 0; a < g.num_factors(); ++a)
      CHECK(max_abs_diff(st.factor_beliefs[a], em.factor_marginals[a]) < 1e-12);
  }
}

TEST_CASE("beliefs under hard constraints vanish exactly off support") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"par", {0, 1}, TablePotential{parity_table({0, 1})}},
      {"ea", {0}, TablePotential{Table::from_linear({0}, {2}, {0.8, 0.2})}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_bp_partition(g);
  EdgeMessages msgs = EdgeMessages::sized(g);
  std::vector<Table> evidence(g.num_vars());
  forward_backward(g, p, evidence, msgs);
  BeliefState st = compute_beliefs(g, p, std::move(msgs));
  const Table& f = g.table(0);
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.linear_at(k) == 0.0) CHECK(st.factor_beliefs[0].linear_at(k) == 0.0);
}

TEST_CASE("scale invariance of normalized beliefs") {
  std::mt19937_64 rng(13);
  FactorGraph g = random_tree_bayes_net(rng, 5, 3);
  BpMfPartition p = all_bp_partition(g);
  EdgeMessages msgs = EdgeMessages::sized(g);
  std::vector<Table> evidence(g.num_vars());
  forward_backward(g, p, evidence, msgs);
  BeliefState st1 = compute_beliefs(g, p, msgs);
  // scale one message by an arbitrary positive constant
  msgs.m[1][0].scale_inplace(37.5);
  msgs.n[1][0].scale_inplace(0.004);
  BeliefState st2 = compute_beliefs(g, p, msgs);
  for (VarId i = 0; i < g.num_vars(); ++i)
    CHECK(max_abs_diff(st1.var_beliefs[i], st2.var_beliefs[i]) < 1e-12);
  for (FactorId a = 0; a < g.num_factors(); ++a)
    CHECK(max_abs_diff(st1.factor_beliefs[a], st2.factor_beliefs[a]) < 1e-12);
}

TEST_CASE("point-mass updates") {
  CHECK(em_var_update({msg(0, {0.2, 0.8})}) == 1);
  CHECK(em_var_update({msg(0, {0.5, 0.5})}) == 0);  // tie rule
  CHECK(em_var_update({msg(0, {0.6, 0.4}), msg(0, {0.3, 0.7})}) == 1);
}

TEST_CASE("rescaling check on a normalized tree") {
  std::mt19937_64 rng(17);
  FactorGraph g = random_tree_bayes_net(rng, 6, 3);
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
  CHECK(rep.rescalable);
  for (double gi : rep.g) CHECK(gi == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mean-field stationary point from message passing") {
  // with no BP factors the scheduler's coordinate updates solve the
  // stationary condition b = z exp(sum of expected log factors)
  std::mt19937_64 rng(23);
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 3, 0}};
  std::vector<FactorSpec> fs{
      {"fab", {0, 1},
       TablePotential{random_positive_table(rng, {0, 1}, {2, 3})}},
      {"fb", {1}, TablePotential{random_positive_table(rng, {1}, {3})}}};
  FactorGraph g = build_graph(vars, fs);
  BpMfPartition p = all_mf_partition(g);
  RunResult res = run_algorithm1(g, p, UpdateConfig{}, StopRule{500, 1e-13, 1e-11});
  REQUIRE(res.trace.converged);
  for (VarId i = 0; i < g.num_vars(); ++i) {
    std::vector<double> acc(g.var(i).states, 0.0);
    for (FactorId a : g.var_neighbors(i)) {
      const auto& nb = g.neighbors(a);
      std::vector<Message> n_in(nb.size());
      int slot = -1;
      for (std::size_t s = 0; s < nb.size(); ++s) {
        n_in[s] = res.state.var_beliefs[nb[s]];
        if (nb[s] == i) slot = static_cast<int>(s);
      }
      Message m = mf_factor_to_var(g.table(a), n_in, slot);
      for (int x = 0; x < g.var(i).states; ++x) acc[x] += m.log_at(x);
    }
    Table expect =
        normalize(Table::from_log({i}, {g.var(i).states}, std::move(acc))).table;
    CHECK(max_abs_diff(expect, res.state.var_beliefs[i]) < 1e-9);
  }
}
