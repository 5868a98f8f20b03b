#include <doctest.h>

#include <random>

#include "bpmf/exact_oracle.hpp"
#include "bpmf/instance_gen.hpp"

using namespace bpmf;
using namespace bpmf::gen;

TEST_CASE("single unary factor: joint equals normalized potential") {
  std::vector<Variable> vars{{"x", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"f", {0}, TablePotential{Table::from_linear({0}, {2}, {2, 6})}}};
  FactorGraph g = build_graph(vars, fs);
  auto em = oracle::exact_marginals(g);
  CHECK(em.var_marginals[0].linear_at(0) == doctest::Approx(0.25));
  CHECK(em.var_marginals[0].linear_at(1) == doctest::Approx(0.75));
}

TEST_CASE("parity triangle: uniform over even-parity configurations") {
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0},
                             {"c", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"pab", {0, 1}, TablePotential{parity_table({0, 1})}},
      {"pbc", {1, 2}, TablePotential{parity_table({1, 2})}},
      {"pca", {2, 0}, TablePotential{parity_table({2, 0})}}};
  FactorGraph g = build_graph(vars, fs);
  Table joint = oracle::enumerate_joint(g);
  // valid configurations: 000 and 111... pairwise even parity means a=b,
  // b=c, c=a, so exactly 000 and 111 survive.
  for (std::size_t k = 0; k < joint.size(); ++k) {
    double expect = (k == 0 || k == 7) ? 0.5 : 0.0;
    CHECK(joint.linear_at(k) == doctest::Approx(expect));
  }
}

TEST_CASE("three-variable chain: pairwise marginals respect the chain rule") {
  std::mt19937_64 rng(3);
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 3, 0},
                             {"c", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"pa", {0}, TablePotential{random_cpt(rng, {}, {}, 0, 2)}},
      {"pb", {0, 1}, TablePotential{random_cpt(rng, {0}, {2}, 1, 3)}},
      {"pc", {1, 2}, TablePotential{random_cpt(rng, {1}, {3}, 2, 2)}}};
  FactorGraph g = build_graph(vars, fs);
  auto em = oracle::exact_marginals(g);
  // the pairwise factor marginal sums to the singleton marginals
  Table from_pair = marginalize(em.factor_marginals[1], 1);
  CHECK(max_abs_diff(from_pair, em.var_marginals[1]) < 1e-12);
  Table from_pair2 = marginalize(em.factor_marginals[2], 2);
  CHECK(max_abs_diff(from_pair2, em.var_marginals[2]) < 1e-12);
}

TEST_CASE("enumerate_joint rejects contradictions and oversized spaces") {
  std::vector<Variable> vars{{"x", VarKind::Discrete, 2, 0}};
  std::vector<FactorSpec> fs{
      {"f0", {0}, TablePotential{Table::from_linear({0}, {2}, {1, 0})}},
      {"f1", {0}, TablePotential{Table::from_linear({0}, {2}, {0, 1})}}};
  FactorGraph g = build_graph(vars, fs);
  CHECK_THROWS_AS(oracle::enumerate_joint(g), ContradictionError);

  std::vector<Variable> big;
  std::vector<FactorSpec> bigf;
  for (int i = 0; i < 21; ++i) {
    big.push_back({"v" + std::to_string(i), VarKind::Discrete, 2, 0});
    bigf.push_back({"f" + std::to_string(i),
                    {i},
                    TablePotential{Table::ones({i}, {2})}});
  }
  FactorGraph gb = build_graph(big, bigf);
  CHECK_THROWS_AS(oracle::enumerate_joint(gb), Error);
}

TEST_CASE("mf minimization recovers exact marginals of product-form joints") {
  std::mt19937_64 rng(9);
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 3, 0}};
  std::vector<FactorSpec> fs{
      {"fa", {0}, TablePotential{random_positive_table(rng, {0}, {2})}},
      {"fb", {1}, TablePotential{random_positive_table(rng, {1}, {3})}}};
  FactorGraph g = build_graph(vars, fs);
  auto res = oracle::grid_mf_minimize(g, 3, 17);
  auto em = oracle::exact_marginals(g);
  CHECK(max_abs_diff(res.beliefs[0], em.var_marginals[0]) < 1e-9);
  CHECK(max_abs_diff(res.beliefs[1], em.var_marginals[1]) < 1e-9);
  CHECK(res.free_energy == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("frustrated pair exposes multiple mean-field fixed points") {
  // strong attraction with a symmetric prior: coordinate descent commits to
  // one of the two modes depending on the start
  std::vector<Variable> vars{{"a", VarKind::Discrete, 2, 0},
                             {"b", VarKind::Discrete, 2, 0}};
  Table coupling = Table::from_linear({0, 1}, {2, 2}, {5.0, 0.2, 0.2, 5.0});
  std::vector<FactorSpec> fs{{"fab", {0, 1}, TablePotential{coupling}}};
  FactorGraph g = build_graph(vars, fs);

  std::vector<int> modes_seen(2, 0);
  for (int r = 0; r < 20; ++r) {
    auto res = oracle::grid_mf_minimize(g, 1, 100 + r);
    int mode = res.beliefs[0].linear_at(0) > 0.5 ? 0 : 1;
    modes_seen[mode]++;
  }
  CHECK(modes_seen[0] > 0);
  CHECK(modes_seen[1] > 0);
}

TEST_CASE("tree reconstruction of exact marginals reproduces the joint") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    FactorGraph g = random_tree_bayes_net(rng, 6, 3);
    Table joint = oracle::enumerate_joint(g);
    auto em = oracle::exact_marginals(g);
    Table rebuilt =
        oracle::tree_reconstruction(g, em.var_marginals, em.factor_marginals);
    CHECK(max_abs_diff(joint, rebuilt) < 1e-10);
  }
}
