#pragma once

// Seeded random instances for the verification suite and the tests.

#include <random>
#include <string>
#include <vector>

#include "bpmf/factor_graph.hpp"

namespace bpmf {
namespace gen {

inline Table random_positive_table(std::mt19937_64& rng,
                                   std::vector<VarId> scope,
                                   std::vector<int> sizes, double lo = 0.1,
                                   double hi = 2.0) {
  std::size_t n = 1;
  for (int s : sizes) n *= static_cast<std::size_t>(s);
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = unif(rng);
  return Table::from_linear(std::move(scope), std::move(sizes), std::move(v));
}

// Conditional-probability table p(child | parents): each parent configuration
// column sums to one. Scope order: parents..., child (child axis fastest).
inline Table random_cpt(std::mt19937_64& rng, std::vector<VarId> parents,
                        std::vector<int> parent_sizes, VarId child,
                        int child_size) {
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  std::size_t rows = 1;
  for (int s : parent_sizes) rows *= static_cast<std::size_t>(s);
  std::vector<double> v(rows * static_cast<std::size_t>(child_size));
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < child_size; ++c) {
      double x = unif(rng);
      v[r * child_size + c] = x;
      sum += x;
    }
    for (int c = 0; c < child_size; ++c) v[r * child_size + c] /= sum;
  }
  std::vector<VarId> scope = std::move(parents);
  scope.push_back(child);
  std::vector<int> sizes = std::move(parent_sizes);
  sizes.push_back(child_size);
  return Table::from_linear(std::move(scope), std::move(sizes), std::move(v));
}

// Random tree-structured factor graph whose factor product is a normalized
// joint (chain-rule construction): strictly positive factors, acyclic, and
// total mass exactly one.
inline FactorGraph random_tree_bayes_net(std::mt19937_64& rng, int max_vars = 8,
                                         int max_alpha = 4) {
  int nv = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_vars - 1));
  std::vector<Variable> vars;
  std::vector<int> sizes(nv);
  for (int i = 0; i < nv; ++i) {
    sizes[i] = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_alpha - 1));
    vars.push_back({"v" + std::to_string(i), VarKind::Discrete, sizes[i], 0});
  }
  std::vector<FactorSpec> fs;
  // var 0 is a root with a prior; each later variable hangs off an earlier one
  fs.push_back({"prior0", {0}, TablePotential{random_cpt(rng, {}, {}, 0, sizes[0])}});
  for (VarId i = 1; i < nv; ++i) {
    VarId parent = static_cast<VarId>(rng() % static_cast<unsigned>(i));
    fs.push_back({"cpt" + std::to_string(i),
                  {parent, i},
                  TablePotential{random_cpt(rng, {parent}, {sizes[parent]}, i,
                                            sizes[i])}});
  }
  return build_graph(vars, fs);
}

// Even-parity indicator over `scope` (all binary).
inline Table parity_table(std::vector<VarId> scope) {
  std::size_t n = std::size_t(1) << scope.size();
  std::vector<double> v(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    int bits = __builtin_popcountll(k);
    if (bits % 2 == 0) v[k] = 1.0;
  }
  std::vector<int> sizes(scope.size(), 2);
  return Table::from_linear(std::move(scope), std::move(sizes), std::move(v));
}

struct MixedInstance {
  FactorGraph graph;
  std::vector<FactorId> bp_ids;
};

// Random instance satisfying the convergent-schedule conditions: a tree BP
// part plus strictly positive MF factors, each touching at most one BP
// variable.
inline MixedInstance random_applicable_instance(std::mt19937_64& rng,
                                                int max_bp_vars = 5,
                                                int max_mf_vars = 3,
                                                int max_alpha = 3) {
  int nbp = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_bp_vars));
  int nmf = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_mf_vars));
  std::vector<Variable> vars;
  std::vector<int> sizes;
  for (int i = 0; i < nbp + nmf; ++i) {
    int sz = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_alpha - 1));
    sizes.push_back(sz);
    vars.push_back({"v" + std::to_string(i), VarKind::Discrete, sz, 0});
  }
  std::vector<FactorSpec> fs;
  std::vector<FactorId> bp_ids;
  // tree BP part over variables [0, nbp)
  fs.push_back({"bp_prior",
                {0},
                TablePotential{random_positive_table(rng, {0}, {sizes[0]})}});
  bp_ids.push_back(0);
  for (VarId i = 1; i < nbp; ++i) {
    VarId parent = static_cast<VarId>(rng() % static_cast<unsigned>(i));
    bp_ids.push_back(static_cast<FactorId>(fs.size()));
    fs.push_back({"bp" + std::to_string(i),
                  {parent, i},
                  TablePotential{random_positive_table(
                      rng, {parent, i}, {sizes[parent], sizes[i]})}});
  }
  // MF factors: unary on MF variables, pairwise MF-MF, pairwise MF-BP
  for (int k = 0; k < nmf; ++k) {
    VarId mf = nbp + k;
    fs.push_back({"mf_u" + std::to_string(k),
                  {mf},
                  TablePotential{random_positive_table(rng, {mf}, {sizes[mf]})}});
    unsigned pick = rng() % 3;
    if (pick == 0) {
      VarId bp = static_cast<VarId>(rng() % static_cast<unsigned>(nbp));
      fs.push_back({"mf_b" + std::to_string(k),
                    {bp, mf},
                    TablePotential{random_positive_table(
                        rng, {bp, mf}, {sizes[bp], sizes[mf]})}});
    } else if (pick == 1 && k > 0) {
      VarId other = nbp + static_cast<int>(rng() % static_cast<unsigned>(k));
      fs.push_back({"mf_m" + std::to_string(k),
                    {other, mf},
                    TablePotential{random_positive_table(
                        rng, {other, mf}, {sizes[other], sizes[mf]})}});
    }
  }
  MixedInstance inst;
  inst.graph = build_graph(vars, fs);
  inst.bp_ids = bp_ids;
  return inst;
}

}  // namespace gen
}  // namespace bpmf
