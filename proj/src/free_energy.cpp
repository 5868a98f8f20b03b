#include "bpmf/free_energy.hpp"

#include <algorithm>
#include <cmath>

namespace bpmf {

double variational_free_energy(const Table& b_joint, const Table& p) {
  if (b_joint.scope() != p.scope())
    throw Error("variational_free_energy: scope mismatch");
  return kl(b_joint, p);
}

namespace {

SymbolStats stats_for_observation(const FactorGraph& g, FactorId a,
                                  const ScalarObservationPotential& obs,
                                  const BeliefState& st) {
  for (VarId i : g.neighbors(a))
    if (g.var(i).kind == VarKind::Discrete)
      return symbol_statistics(st.var_beliefs[i], obs.symbols);
  return {obs.symbols[0], 0.0};  // pilot: known symbol
}

CoordMoments gauss_moments_for_observation(const FactorGraph& g, FactorId a,
                                           const ScalarObservationPotential& obs,
                                           const BeliefState& st) {
  for (VarId i : g.neighbors(a))
    if (g.var(i).kind == VarKind::GaussianVec)
      return coordinate_moments(st.gauss_beliefs[i], obs.coord);
  throw Error("observation factor without a Gaussian neighbor");
}

double expected_log_factor(const FactorGraph& g, FactorId a,
                           const BeliefState& st) {
  const Potential& pot = g.factor(a).potential;
  if (const auto* tp = std::get_if<TablePotential>(&pot)) {
    std::vector<Table> bs;
    for (VarId i : g.neighbors(a)) bs.push_back(st.var_beliefs[i]);
    return expected_log_table(tp->table, bs);
  }
  if (const auto* gp = std::get_if<GaussianPriorPotential>(&pot))
    return expected_log_gaussian_prior(*gp, st.gauss_beliefs[g.neighbors(a)[0]]);
  if (const auto* op = std::get_if<ScalarObservationPotential>(&pot))
    return expected_log_observation(*op,
                                    gauss_moments_for_observation(g, a, *op, st),
                                    stats_for_observation(g, a, *op, st));
  throw Error("factor '" + g.factor(a).name + "' has no potential");
}

double belief_entropy(const FactorGraph& g, VarId i, const BeliefState& st) {
  if (g.var(i).kind == VarKind::GaussianVec) return st.gauss_beliefs[i].entropy();
  return entropy(st.var_beliefs[i]);
}

}  // namespace

double expected_log_table(const Table& f, const std::vector<Table>& beliefs) {
  std::vector<Table> lin;
  lin.reserve(beliefs.size());
  for (const Table& b : beliefs) lin.push_back(b.to_domain(Domain::Linear));
  double acc = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    double w = 1.0;
    for (std::size_t s = 0; s < lin.size(); ++s)
      w *= lin[s].raw()[static_cast<std::size_t>(f.digit_of(k, static_cast<int>(s)))];
    if (w == 0.0) continue;
    double lf = f.log_at(k);
    if (lf == kNegInf) return kNegInf;
    acc += w * lf;
  }
  return acc;
}

double bethe_free_energy(const FactorGraph& g, const BeliefState& st) {
  double fe = 0.0;
  for (FactorId a = 0; a < g.num_factors(); ++a)
    fe += kl(st.factor_beliefs[a], g.table(a));
  for (VarId i = 0; i < g.num_vars(); ++i) {
    double c = static_cast<double>(g.var_neighbors(i).size()) - 1.0;
    fe += c * belief_entropy(g, i, st);
  }
  return fe;
}

double mf_free_energy(const FactorGraph& g, const BeliefState& st) {
  double fe = 0.0;
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    double e = expected_log_factor(g, a, st);
    if (e == kNegInf) return kPosInf;
    fe += -1.0 * e;
  }
  for (VarId i = 0; i < g.num_vars(); ++i)
    fe += -1.0 * belief_entropy(g, i, st);
  return fe;
}

double combined_free_energy(const FactorGraph& g, const BpMfPartition& p,
                            const BeliefState& st) {
  double fe = 0.0;
  for (FactorId a : p.bp_factors) fe += kl(st.factor_beliefs[a], g.table(a));
  for (FactorId a : p.mf_factors) {
    double e = expected_log_factor(g, a, st);
    if (e == kNegInf) return kPosInf;
    fe += -1.0 * e;
  }
  if (fe == kPosInf) return kPosInf;
  for (VarId i = 0; i < g.num_vars(); ++i) {
    double c = static_cast<double>(p.bp_degree(i)) - 1.0;
    fe += c * belief_entropy(g, i, st);
  }
  return fe;
}

ConstraintResiduals constraint_residuals(const FactorGraph& g,
                                         const BpMfPartition& p,
                                         const BeliefState& st) {
  ConstraintResiduals r;
  for (FactorId a : p.bp_factors) {
    r.max_norm_residual = std::max(
        r.max_norm_residual, std::abs(st.factor_beliefs[a].mass() - 1.0));
    const auto& nb = g.neighbors(a);
    for (VarId i : nb) {
      Table marg = marginalize(st.factor_beliefs[a], i);
      r.max_marg_residual =
          std::max(r.max_marg_residual, max_abs_diff(st.var_beliefs[i], marg));
    }
  }
  for (VarId i = 0; i < g.num_vars(); ++i) {
    if (g.var(i).kind != VarKind::Discrete) continue;
    if (st.var_beliefs[i].size() == 0) continue;
    r.max_norm_residual =
        std::max(r.max_norm_residual, std::abs(st.var_beliefs[i].mass() - 1.0));
  }
  return r;
}

namespace {

double rel_change(const Table& oldm, const Table& newm) {
  double scale = std::max(oldm.max_linear(), newm.max_linear());
  if (scale <= 0.0) return 0.0;
  return max_abs_diff(oldm, newm) / scale;
}

double rel_change(const GaussianCanon& a, const GaussianCanon& b) {
  double sl = std::max(a.lambda.cwiseAbs().maxCoeff(),
                       b.lambda.cwiseAbs().maxCoeff());
  double se = std::max(a.eta.cwiseAbs().maxCoeff(), b.eta.cwiseAbs().maxCoeff());
  double dl = (a.lambda - b.lambda).cwiseAbs().maxCoeff();
  double de = (a.eta - b.eta).cwiseAbs().maxCoeff();
  double r = 0.0;
  if (sl > 0.0) r = std::max(r, dl / sl);
  if (se > 0.0) r = std::max(r, de / se);
  return r;
}

int slot_of(const FactorGraph& g, FactorId a, VarId i) {
  const auto& nb = g.neighbors(a);
  for (std::size_t s = 0; s < nb.size(); ++s)
    if (nb[s] == i) return static_cast<int>(s);
  throw Error("slot_of: variable not in factor scope");
}

}  // namespace

double stationarity_residual(const FactorGraph& g, const BpMfPartition& p,
                             const BeliefState& st,
                             const EmConstraintSet* em) {
  const EdgeMessages& msgs = st.messages;
  double res = 0.0;
  UpdateConfig zcfg;  // z-normalized, no damping

  // factor-to-variable messages
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const auto& nb = g.neighbors(a);
    const Potential& pot = g.factor(a).potential;
    if (p.is_bp[a]) {
      for (std::size_t s = 0; s < nb.size(); ++s) {
        Message fresh = bp_factor_to_var(g.table(a), msgs.n[a],
                                         static_cast<int>(s), zcfg);
        res = std::max(res, rel_change(msgs.m[a][s], fresh));
      }
      continue;
    }
    if (const auto* tp = std::get_if<TablePotential>(&pot)) {
      for (std::size_t s = 0; s < nb.size(); ++s) {
        Message fresh = mf_factor_to_var(tp->table, msgs.n[a],
                                         static_cast<int>(s));
        res = std::max(res, rel_change(msgs.m[a][s], fresh));
      }
    } else if (const auto* gp = std::get_if<GaussianPriorPotential>(&pot)) {
      if (msgs.m_gauss[a])
        res = std::max(res, rel_change(*msgs.m_gauss[a],
                                       mf_prior_to_gaussian(*gp)));
    } else if (const auto* op = std::get_if<ScalarObservationPotential>(&pot)) {
      // toward the Gaussian variable
      if (msgs.m_gauss[a]) {
        VarId gv = -1;
        for (VarId i : nb)
          if (g.var(i).kind == VarKind::GaussianVec) gv = i;
        SymbolStats stats{op->symbols[0], 0.0};
        for (VarId i : nb)
          if (g.var(i).kind == VarKind::Discrete)
            stats = symbol_statistics(normalize(msgs.n[a][slot_of(g, a, i)]).table,
                                      op->symbols);
        GaussianCanon fresh =
            mf_observation_to_gaussian(*op, g.var(gv).dim, stats);
        res = std::max(res, rel_change(*msgs.m_gauss[a], fresh));
      }
      // toward the discrete variable
      for (std::size_t s = 0; s < nb.size(); ++s) {
        if (g.var(nb[s]).kind != VarKind::Discrete) continue;
        CoordMoments mom = gauss_moments_for_observation(g, a, *op, st);
        Message fresh = mf_observation_to_symbol(*op, nb[s], mom);
        res = std::max(res, rel_change(msgs.m[a][s], fresh));
      }
    }
  }

  // variable-to-factor messages
  for (VarId i = 0; i < g.num_vars(); ++i) {
    if (g.var(i).kind != VarKind::Discrete) continue;
    if (em && em->contains(i)) continue;
    int states = g.var(i).states;
    std::vector<Message> m_bp, m_mf;
    for (FactorId c : p.nbp[i]) m_bp.push_back(msgs.m[c][slot_of(g, c, i)]);
    for (FactorId c : p.nmf[i]) m_mf.push_back(msgs.m[c][slot_of(g, c, i)]);
    bool normalize_n = !p.in_ibp[i];
    for (std::size_t k = 0; k < p.nbp[i].size(); ++k) {
      FactorId a = p.nbp[i][k];
      Message fresh = combined_var_to_factor(i, states, m_bp,
                                             static_cast<int>(k), m_mf,
                                             normalize_n);
      res = std::max(res, rel_change(msgs.n[a][slot_of(g, a, i)], fresh));
    }
    for (FactorId a : p.nmf[i]) {
      Message fresh =
          combined_var_to_factor(i, states, m_bp, -1, m_mf, normalize_n);
      res = std::max(res, rel_change(msgs.n[a][slot_of(g, a, i)], fresh));
    }
  }

  // beliefs rebuilt from the same messages
  BeliefState fresh = compute_beliefs(g, p, st.messages);
  for (FactorId a : p.bp_factors)
    res = std::max(res, rel_change(st.factor_beliefs[a], fresh.factor_beliefs[a]));
  for (VarId i = 0; i < g.num_vars(); ++i) {
    if (g.var(i).kind == VarKind::GaussianVec) {
      const ComplexGaussian& b0 = st.gauss_beliefs[i];
      const ComplexGaussian& b1 = fresh.gauss_beliefs[i];
      if (b0.dim() == 0) continue;
      double sp = std::max(b0.precision.cwiseAbs().maxCoeff(),
                           b1.precision.cwiseAbs().maxCoeff());
      double sm = std::max(b0.mean.cwiseAbs().maxCoeff(),
                           b1.mean.cwiseAbs().maxCoeff());
      if (sp > 0.0)
        res = std::max(res,
                       (b0.precision - b1.precision).cwiseAbs().maxCoeff() / sp);
      if (sm > 0.0)
        res = std::max(res, (b0.mean - b1.mean).cwiseAbs().maxCoeff() / sm);
      continue;
    }
    if (em && em->contains(i)) continue;
    if (st.var_beliefs[i].size() == 0) continue;
    res = std::max(res, rel_change(st.var_beliefs[i], fresh.var_beliefs[i]));
  }
  return res;
}

}  // namespace bpmf
