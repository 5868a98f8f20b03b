#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bpmf/factor_graph.hpp"
#include "bpmf/gaussian.hpp"
#include "bpmf/table.hpp"

namespace bpmf {

// Scaling convention for BP factor-to-variable updates: either the exact
// z-normalized system (z_a chosen so that b_a has unit mass) or the
// unnormalized variant scaled by fixed positive constants omega.
enum class NormalizationMode { ZNormalized, Unnormalized };

enum class ZeroSupportPolicy { Strict, Partial };

struct UpdateConfig {
  NormalizationMode mode = NormalizationMode::ZNormalized;
  double damping = 0.0;  // in [0,1); geometric damping in the log domain
  double omega = 1.0;    // scale for unnormalized updates
  ZeroSupportPolicy zero_support = ZeroSupportPolicy::Strict;

  void check() const {
    if (!(damping >= 0.0 && damping < 1.0))
      throw Error("config: damping must lie in [0,1)");
    if (mode == NormalizationMode::Unnormalized && !(omega > 0.0))
      throw Error("config: omega must be positive");
  }
};

// Variables whose beliefs are constrained to point masses (they must live in
// the MF part).
struct EmConstraintSet {
  std::vector<VarId> vars;
  std::vector<int> estimates;  // current point estimates, parallel to vars

  bool contains(VarId i) const {
    for (VarId v : vars)
      if (v == i) return true;
    return false;
  }
};

// Gaussian message in canonical (information) form; `lambda` may be
// singular for partial evidence.
struct GaussianCanon {
  Eigen::MatrixXcd lambda;
  Eigen::VectorXcd eta;  // lambda * mu
};

// Full message set of one iteration snapshot, keyed by (factor, scope slot).
struct EdgeMessages {
  std::vector<std::vector<Message>> n;  // variable -> factor
  std::vector<std::vector<Message>> m;  // factor -> variable (BP or MF kind)
  // message toward a factor's Gaussian neighbor, if it has one
  std::vector<std::optional<GaussianCanon>> m_gauss;

  static EdgeMessages sized(const FactorGraph& g);
};

// One snapshot of the iteration: beliefs, messages, and normalizers.
struct BeliefState {
  std::vector<Table> var_beliefs;               // discrete variables
  std::vector<ComplexGaussian> gauss_beliefs;   // Gaussian variables
  std::vector<Table> factor_beliefs;            // BP factors only
  EdgeMessages messages;
  std::vector<double> z_factor;  // per factor (BP factors meaningful)
  std::vector<double> z_var;     // per variable; 1 for the BP part
};

// --- update kernels -------------------------------------------------------

// Sum-product contraction f * prod_{j != target} n_j summed onto the target
// slot. In z-normalized mode the result is scaled so that the factor belief
// built from all incoming messages has unit mass; in unnormalized mode it is
// scaled by cfg.omega. Throws ContradictionError if the result (or, in
// z-mode, the factor belief) is identically zero.
Message bp_factor_to_var(const Table& f, const std::vector<Message>& n_in,
                         int target_slot, const UpdateConfig& cfg);

// Theorem-1 style variable update: product of incoming factor messages with
// the message from `exclude_idx` left out (pass -1 to keep all).
Message bp_var_to_factor(VarId var, int states,
                         const std::vector<Message>& incoming_m,
                         int exclude_idx);

// Combined update toward factor `a`: extrinsic in the BP part (the reply of
// `a` itself is excluded when a is a BP factor), full APP toward MF factors.
// `normalize_result` applies z_i; the convention is z_i = 1 on the BP part.
Message combined_var_to_factor(VarId var, int states,
                               const std::vector<Message>& m_bp,
                               int exclude_bp_idx,
                               const std::vector<Message>& m_mf,
                               bool normalize_result);

// exp( sum_{x_a \ x_i} prod_{j != i} n_j ln f_a ): exponentiated expected
// log-factor. Incoming messages are treated as beliefs and normalized before
// the expectation. Throws if f has a zero inside the support of the
// expectation (MF factors must be strictly positive there).
Message mf_factor_to_var(const Table& f, const std::vector<Message>& n_in,
                         int target_slot);

// Closed forms for the scalar-observation potential.
// Message to the discrete neighbor given moments of the Gaussian coordinate.
Message mf_observation_to_symbol(const ScalarObservationPotential& obs,
                                 VarId symbol_var, CoordMoments h_moments);
// Canonical-form message to the Gaussian variable given symbol statistics of
// the discrete neighbor (or the known pilot value when there is none).
GaussianCanon mf_observation_to_gaussian(const ScalarObservationPotential& obs,
                                         int gauss_dim, SymbolStats stats);
GaussianCanon mf_prior_to_gaussian(const GaussianPriorPotential& prior);

// E_b[ln f] for the Gaussian-compatible potentials under factorized beliefs.
double expected_log_observation(const ScalarObservationPotential& obs,
                                CoordMoments h_moments, SymbolStats stats);
double expected_log_gaussian_prior(const GaussianPriorPotential& prior,
                                   const ComplexGaussian& belief);

// Point-mass update for an EM-constrained variable: argmax of the product of
// incoming messages, ties resolved to the lowest state index.
int em_var_update(const std::vector<Message>& incoming_m);

// Rebuild all beliefs from a message set. Factor beliefs are computed for BP
// factors, variable beliefs for every variable. Throws ContradictionError on
// a non-normalizable belief.
BeliefState compute_beliefs(const FactorGraph& g, const BpMfPartition& p,
                            EdgeMessages messages);

// --- rescaling checker ----------------------------------------------------

struct UnnormalizedSolution {
  std::vector<std::vector<Message>> n;      // [factor][slot]
  std::vector<std::vector<double>> omega;   // [factor][slot]
};

struct RescalingReport {
  bool rescalable = false;
  std::vector<double> g;        // per variable; any valid assignment
  std::vector<double> z_tilde;  // per factor
  std::optional<std::pair<FactorId, int>> violation;  // factor, slot
};

// Checks whether a solution of the omega-scaled system can be rescaled to
// the z-normalized one: omega_{a,i} = g_i * z_tilde_a must admit positive
// g_i consistent across the factors of each variable.
RescalingReport rescaling_check(const FactorGraph& g,
                                const UnnormalizedSolution& sol,
                                double rel_tol = 1e-9);

// --- helpers shared with the scheduler -------------------------------------

// Assemble the Gaussian belief of variable `i` from the canonical messages of
// its (MF) neighbor factors.
ComplexGaussian gaussian_belief_from_messages(const FactorGraph& g,
                                              const BpMfPartition& p,
                                              const EdgeMessages& msgs, VarId i);

}  // namespace bpmf
