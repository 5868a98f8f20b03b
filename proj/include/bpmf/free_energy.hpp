#pragma once

#include "bpmf/factor_graph.hpp"
#include "bpmf/message_passing.hpp"

namespace bpmf {

// KL(b || p) of a joint belief against the target distribution (same scope).
// Nonnegative; may be +inf.
double variational_free_energy(const Table& b_joint, const Table& p);

// sum_a KL(b_a || f_a) + sum_i (|N(i)|-1) H(b_i). Exact on trees; +inf when
// some b_a puts mass on a zero of f_a.
double bethe_free_energy(const FactorGraph& g, const BeliefState& st);

// Fully factorized free energy: -sum_i H(b_i) - sum_a E_b[ln f_a], with
// differential entropies and closed-form expected log-factors on the
// Gaussian side.
double mf_free_energy(const FactorGraph& g, const BeliefState& st);

// Region-based approximation of the combined split:
//   sum_{A_BP} KL(b_a||f_a) - sum_{A_MF} E_b[ln f_a]
//   + sum_i (|N_BP(i)|-1) H(b_i).
// Extended real; finite iff every BP factor belief vanishes wherever its
// factor does.
double combined_free_energy(const FactorGraph& g, const BpMfPartition& p,
                            const BeliefState& st);

struct ConstraintResiduals {
  double max_norm_residual = 0.0;  // |mass(b) - 1| over stored beliefs
  double max_marg_residual = 0.0;  // ||b_i - marg_i(b_a)||_inf over BP edges
};

ConstraintResiduals constraint_residuals(const FactorGraph& g,
                                         const BpMfPartition& p,
                                         const BeliefState& st);

// Max relative change when every message and belief is recomputed once from
// the others via the combined fixed-point equations. EM-constrained
// variables are excluded (their beliefs are point masses by construction).
double stationarity_residual(const FactorGraph& g, const BpMfPartition& p,
                             const BeliefState& st,
                             const EmConstraintSet* em = nullptr);

// E_b[ln f_a] for a discrete table factor under fully factorized beliefs.
double expected_log_table(const Table& f, const std::vector<Table>& beliefs);

}  // namespace bpmf
