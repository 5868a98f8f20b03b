#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/table.hpp"

namespace bpmf {

enum class VarKind { Discrete, GaussianVec };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Discrete;
  int states = 0;  // alphabet size (discrete)
  int dim = 0;     // vector dimension (Gaussian)
};

// Potential attached to a factor node. Structure-only graphs may omit it.
struct NoPotential {};

struct TablePotential {
  Table table;  // scope order matches the factor's neighbor list
};

// CN(x; mean, precision^-1) prior over a single Gaussian variable.
struct GaussianPriorPotential {
  Eigen::VectorXcd mean;
  Eigen::MatrixXcd precision;
};

// f(h, x) = (gamma/pi) exp(-gamma |y - h_coord * s(x)|^2): a scalar noisy
// observation of one coordinate of a Gaussian variable, optionally scaled by
// a discrete neighbor through the symbol map s. When the factor has no
// discrete neighbor, `symbols` holds the single known (pilot) value.
struct ScalarObservationPotential {
  std::complex<double> y;
  double gamma = 1.0;
  int coord = 0;
  std::vector<std::complex<double>> symbols;
};

using Potential = std::variant<NoPotential, TablePotential,
                               GaussianPriorPotential,
                               ScalarObservationPotential>;

struct FactorSpec {
  std::string name;
  std::vector<VarId> scope;  // ordered; table axes follow this order
  Potential potential;
};

class FactorGraph {
 public:
  FactorGraph() = default;

  VarId add_discrete(std::string name, int states);
  VarId add_gaussian(std::string name, int dim);

  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_factors() const { return static_cast<int>(factors_.size()); }
  const Variable& var(VarId i) const { return vars_.at(i); }
  const FactorSpec& factor(FactorId a) const { return factors_.at(a); }

  const std::vector<VarId>& neighbors(FactorId a) const {
    return factors_.at(a).scope;
  }
  const std::vector<FactorId>& var_neighbors(VarId i) const {
    return var_neighbors_.at(i);
  }

  bool has_table(FactorId a) const {
    return std::holds_alternative<TablePotential>(factors_.at(a).potential);
  }
  const Table& table(FactorId a) const;

  std::vector<int> scope_sizes(FactorId a) const;

  friend FactorGraph build_graph(std::vector<Variable> vars,
                                 std::vector<FactorSpec> factors);

 private:
  std::vector<Variable> vars_;
  std::vector<FactorSpec> factors_;
  std::vector<std::vector<FactorId>> var_neighbors_;

  void add_factor_checked(FactorSpec f);
};

// Materializes adjacency in both directions; validates scopes and potentials.
FactorGraph build_graph(std::vector<Variable> vars,
                        std::vector<FactorSpec> factors);

// Disjoint split of the factor set with all derived index sets.
struct BpMfPartition {
  std::vector<FactorId> bp_factors;  // A_BP
  std::vector<FactorId> mf_factors;  // A_MF
  std::vector<char> is_bp;           // per factor
  std::vector<char> in_ibp;          // per variable
  std::vector<char> in_imf;          // per variable
  std::vector<std::vector<FactorId>> nbp;  // N_BP(i)
  std::vector<std::vector<FactorId>> nmf;  // N_MF(i)

  int bp_degree(VarId i) const { return static_cast<int>(nbp[i].size()); }
};

BpMfPartition partition(const FactorGraph& g,
                        const std::vector<FactorId>& bp_factor_ids);

inline BpMfPartition all_bp_partition(const FactorGraph& g) {
  std::vector<FactorId> all(g.num_factors());
  for (int a = 0; a < g.num_factors(); ++a) all[a] = a;
  return partition(g, all);
}
inline BpMfPartition all_mf_partition(const FactorGraph& g) {
  return partition(g, {});
}

struct Region {
  std::vector<VarId> vars;
  std::vector<FactorId> factors;
  int counting_number = 0;
};

struct RegionSet {
  std::vector<Region> regions;
};

RegionSet region_set_mf(const FactorGraph& g);
RegionSet region_set_bethe(const FactorGraph& g);
RegionSet region_set_bpmf(const FactorGraph& g, const BpMfPartition& p);

// True iff counting numbers sum to one over the regions containing each
// variable and each factor, and every region is closed (a in A_R implies
// N(a) subset of I_R).
bool region_set_valid(const FactorGraph& g, const RegionSet& rs);

struct Applicability {
  bool applicable = false;
  bool bp_part_has_cycle = false;
  std::vector<FactorId> cycle_witness;   // BP factors on a witness cycle
  std::optional<FactorId> bad_mf_factor; // MF factor touching >1 BP variable
  std::string reason;
};

// Convergent-schedule preconditions: the BP subgraph is a forest and every
// MF factor touches at most one BP variable.
Applicability check_algorithm1_applicable(const FactorGraph& g,
                                          const BpMfPartition& p);

}  // namespace bpmf
