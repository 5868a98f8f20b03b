#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bpmf/free_energy.hpp"
#include "bpmf/message_passing.hpp"

namespace bpmf {

struct StopRule {
  int max_outer = 200;
  double rel_fe_tol = 1e-9;    // relative free-energy change
  double msg_delta_tol = 1e-8; // max message/belief delta

  void check() const {
    if (max_outer < 1) throw Error("stop rule: max_outer must be >= 1");
    if (!(rel_fe_tol > 0.0) || !(msg_delta_tol > 0.0))
      throw Error("stop rule: tolerances must be positive");
  }
};

struct TraceRow {
  int iteration = 0;
  double free_energy = 0.0;
  double marg_residual = 0.0;
  double stat_residual = 0.0;
  double max_delta = 0.0;
  double wall_seconds = 0.0;
};

struct ScheduleTrace {
  std::vector<TraceRow> rows;
  bool converged = false;
  bool diverged = false;
  bool contradiction = false;
  std::string stop_reason;
};

struct RunResult {
  BeliefState state;
  ScheduleTrace trace;
};

struct LoopyOptions {
  int n_inner = 5;  // flooding sweeps of the BP part per outer iteration
};

// Exact sum-product on the (forest) BP part. `evidence` holds one unary
// log-table per variable (empty table = no evidence); MF inputs enter the
// products as fixed evidence. On return the BP-factor entries of `msgs`
// carry the z-normalized fixed-point messages. Throws on a cycle.
void forward_backward(const FactorGraph& g, const BpMfPartition& p,
                      const std::vector<Table>& evidence, EdgeMessages& msgs);

// Convergent schedule: exact forward/backward in the BP part alternated with
// sequential coordinate updates of the MF-only beliefs (ascending variable
// id). Requires check_algorithm1_applicable to pass. The recorded free
// energy is non-increasing across outer iterations.
RunResult run_algorithm1(const FactorGraph& g, const BpMfPartition& p,
                         const UpdateConfig& cfg, const StopRule& stop,
                         const EmConstraintSet* em = nullptr);

// Same outer loop with the exact BP pass replaced by damped flooding sweeps;
// cycles in the BP part are allowed and the free-energy column is recorded
// without any monotonicity guarantee. MF factors must still touch at most
// one BP variable. Divergence (message deltas growing for 10 consecutive
// sweeps) stops the run and returns the partial state.
RunResult run_loopy(const FactorGraph& g, const BpMfPartition& p,
                    const UpdateConfig& cfg, const StopRule& stop,
                    const LoopyOptions& opts = {},
                    const EmConstraintSet* em = nullptr);

// Columns: iteration,free_energy,marg_residual,stat_residual,max_delta.
// Values are printed with 17 significant digits.
void write_trace_csv(const ScheduleTrace& trace, std::ostream& os);

}  // namespace bpmf
