#pragma once

#include <cstdint>
#include <vector>

#include "bpmf/factor_graph.hpp"

namespace bpmf {
namespace oracle {

// Brute-force ground truth for small discrete graphs. State space is capped
// at 2^20 joint configurations.
inline constexpr std::size_t kMaxJointStates = std::size_t(1) << 20;

// Normalized product of all factor tables over the full variable set
// (ascending variable id order).
Table enumerate_joint(const FactorGraph& g);

struct ExactMarginals {
  std::vector<Table> var_marginals;
  std::vector<Table> factor_marginals;  // over each factor's scope
};

ExactMarginals exact_marginals(const FactorGraph& g);

// Sum a joint table down to a subset of its scope.
Table marginalize_scope(const Table& joint, const std::vector<VarId>& keep,
                        const std::vector<int>& keep_sizes);

// Joint distribution a tree factorization induces from locally consistent
// beliefs: prod_a b_a / prod_i b_i^(|N(i)|-1).
Table tree_reconstruction(const FactorGraph& g,
                          const std::vector<Table>& var_beliefs,
                          const std::vector<Table>& factor_beliefs);

struct MfMinimizeResult {
  std::vector<Table> beliefs;
  double free_energy = 0.0;
  int restarts_used = 0;
};

// Multi-start coordinate descent on the fully factorized free energy,
// written against the free-energy definition directly (independent of the
// message-passing kernels).
MfMinimizeResult grid_mf_minimize(const FactorGraph& g, int restarts,
                                  std::uint64_t seed, int max_sweeps = 500);

}  // namespace oracle
}  // namespace bpmf
