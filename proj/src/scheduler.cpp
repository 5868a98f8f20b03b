#include "bpmf/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace bpmf {

namespace {

int slot_of(const FactorGraph& g, FactorId a, VarId i) {
  const auto& nb = g.neighbors(a);
  for (std::size_t s = 0; s < nb.size(); ++s)
    if (nb[s] == i) return static_cast<int>(s);
  throw Error("slot_of: variable not in factor scope");
}

// n_{i->a} = evidence_i * prod_{c in N_BP(i) \ a} m_{c->i}, raw (z_i = 1).
Message bp_var_message(const FactorGraph& g, const BpMfPartition& p,
                       const std::vector<Table>& evidence,
                       const EdgeMessages& msgs, VarId i, FactorId a) {
  int states = g.var(i).states;
  std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
  if (evidence[i].size() != 0)
    for (int x = 0; x < states; ++x)
      acc[x] += evidence[i].log_at(static_cast<std::size_t>(x));
  for (FactorId c : p.nbp[i]) {
    if (c == a) continue;
    const Message& m = msgs.m[c][slot_of(g, c, i)];
    for (int x = 0; x < states; ++x)
      acc[x] += m.log_at(static_cast<std::size_t>(x));
  }
  Message out = Table::from_log({i}, {states}, std::move(acc));
  if (out.all_zero())
    throw ContradictionError("variable '" + g.var(i).name +
                             "' has an all-zero message product");
  return out;
}

Message raw_contraction(const FactorGraph& g, FactorId a, int slot,
                        const EdgeMessages& msgs) {
  UpdateConfig cfg;
  cfg.mode = NormalizationMode::Unnormalized;
  cfg.omega = 1.0;
  return bp_factor_to_var(g.table(a), msgs.n[a], slot, cfg);
}

struct BpForest {
  // BFS order over the bipartite BP subgraph; vars are 0..nv-1, factors are
  // nv + a.
  std::vector<int> order;
  std::vector<int> parent;     // -1 for roots
  std::vector<int> component;  // component id per node (-1 if not in BP part)
  int num_components = 0;
};

BpForest build_forest(const FactorGraph& g, const BpMfPartition& p) {
  int nv = g.num_vars(), nf = g.num_factors();
  BpForest f;
  f.parent.assign(nv + nf, -1);
  f.component.assign(nv + nf, -1);
  std::vector<char> seen(nv + nf, 0);
  for (FactorId a0 : p.bp_factors) {
    if (seen[nv + a0]) continue;
    int comp = f.num_components++;
    std::vector<int> queue{nv + a0};
    seen[nv + a0] = 1;
    f.parent[nv + a0] = -1;
    std::size_t head = 0;
    std::vector<int> local;
    while (head < queue.size()) {
      int u = queue[head++];
      local.push_back(u);
      f.component[u] = comp;
      if (u < nv) {
        for (FactorId a : p.nbp[u]) {
          if (seen[nv + a]) {
            if (f.parent[u] != nv + a)
              throw Error("forward_backward: bp part has a cycle");
            continue;
          }
          seen[nv + a] = 1;
          f.parent[nv + a] = u;
          queue.push_back(nv + a);
        }
      } else {
        for (VarId i : g.neighbors(u - nv)) {
          if (seen[i]) {
            if (f.parent[u] != i)
              throw Error("forward_backward: bp part has a cycle");
            continue;
          }
          seen[i] = 1;
          f.parent[i] = u;
          queue.push_back(i);
        }
      }
    }
    f.order.insert(f.order.end(), local.begin(), local.end());
  }
  return f;
}

}  // namespace

void forward_backward(const FactorGraph& g, const BpMfPartition& p,
                      const std::vector<Table>& evidence, EdgeMessages& msgs) {
  int nv = g.num_vars();
  BpForest forest = build_forest(g, p);

  auto send = [&](int from, int to) {
    if (from < nv) {
      VarId i = from;
      FactorId a = to - nv;
      msgs.n[a][slot_of(g, a, i)] = bp_var_message(g, p, evidence, msgs, i, a);
    } else {
      FactorId a = from - nv;
      VarId i = to;
      int s = slot_of(g, a, i);
      msgs.m[a][s] = raw_contraction(g, a, s, msgs);
    }
  };

  // leaves inward
  for (auto it = forest.order.rbegin(); it != forest.order.rend(); ++it)
    if (forest.parent[*it] != -1) send(*it, forest.parent[*it]);
  // root outward
  for (int u : forest.order)
    if (forest.parent[u] != -1) send(forest.parent[u], u);

  // Per-component mass of the evidence-weighted factorization; the raw
  // messages are rescaled into the z-normalized system so that factor
  // beliefs normalize and variable products carry no extra constant.
  std::vector<double> logz(forest.num_components, 0.0);
  std::vector<char> have(forest.num_components, 0);
  for (FactorId a : p.bp_factors) {
    int comp = forest.component[nv + a];
    if (have[comp]) continue;
    const Table& f = g.table(a);
    std::vector<Table> ops;
    ops.push_back(f.to_domain(Domain::Log));
    for (std::size_t s = 0; s < g.neighbors(a).size(); ++s)
      ops.push_back(msgs.n[a][s].to_domain(Domain::Log));
    Table joint = product(std::span<const Table>(ops), f.scope(), f.sizes());
    double lz = log_sum_exp(joint.raw());
    if (lz == kNegInf)
      throw ContradictionError("forward_backward: zero total mass");
    logz[comp] = lz;
    have[comp] = 1;
  }
  for (FactorId a : p.bp_factors) {
    double lz = logz[forest.component[nv + a]];
    const auto& nb = g.neighbors(a);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      double d = static_cast<double>(p.bp_degree(nb[s]));
      for (double& v : msgs.m[a][s].raw()) v -= lz / d;
    }
  }
  for (FactorId a : p.bp_factors) {
    const auto& nb = g.neighbors(a);
    for (std::size_t s = 0; s < nb.size(); ++s)
      msgs.n[a][s] = bp_var_message(g, p, evidence, msgs, nb[s], a);
  }
}

namespace {

// Outer-loop driver shared by the convergent and the loopy schedules.
struct OuterLoop {
  const FactorGraph& g;
  const BpMfPartition& p;
  UpdateConfig cfg;
  StopRule stop;
  bool loopy;
  LoopyOptions opts;
  EmConstraintSet em;
  bool has_em = false;

  EdgeMessages msgs;
  std::vector<Table> evidence;  // per variable, product of inbound MF messages
  std::vector<Table> var_beliefs;
  std::vector<ComplexGaussian> gauss_beliefs;
  std::vector<Table> factor_beliefs;
  std::vector<double> z_var, z_factor;

  // previous-iteration snapshot for the delta metric
  EdgeMessages prev_msgs;
  std::vector<Table> prev_var_beliefs;
  bool have_prev = false;

  ScheduleTrace trace;

  OuterLoop(const FactorGraph& g_, const BpMfPartition& p_,
            const UpdateConfig& cfg_, const StopRule& stop_, bool loopy_,
            const LoopyOptions& opts_, const EmConstraintSet* em_)
      : g(g_), p(p_), cfg(cfg_), stop(stop_), loopy(loopy_), opts(opts_) {
    cfg.check();
    stop.check();
    if (em_) {
      em = *em_;
      has_em = true;
      if (em.estimates.empty()) em.estimates.assign(em.vars.size(), 0);
      if (em.estimates.size() != em.vars.size())
        throw Error("em: estimates must parallel the constrained variables");
      for (VarId i : em.vars) {
        if (p.in_ibp[i])
          throw Error("em: constrained variables must live in the MF part");
        if (g.var(i).kind != VarKind::Discrete)
          throw Error("em: constrained variables must be discrete");
      }
    }
    if (!loopy) {
      Applicability ap = check_algorithm1_applicable(g, p);
      if (!ap.applicable)
        throw Error("run_algorithm1: " + ap.reason);
      cfg.damping = 0.0;  // the convergence argument needs exact updates
    } else {
      for (FactorId a : p.mf_factors) {
        int touch = 0;
        for (VarId i : g.neighbors(a)) touch += p.in_ibp[i] ? 1 : 0;
        if (touch > 1)
          throw Error("run_loopy: mf factor '" + g.factor(a).name +
                      "' touches more than one bp variable");
      }
      if (opts.n_inner < 1) throw Error("run_loopy: n_inner must be >= 1");
    }
  }

  int em_index(VarId i) const {
    for (std::size_t k = 0; k < em.vars.size(); ++k)
      if (em.vars[k] == i) return static_cast<int>(k);
    return -1;
  }

  void init() {
    msgs = EdgeMessages::sized(g);
    evidence.assign(g.num_vars(), Table());
    var_beliefs.assign(g.num_vars(), Table());
    gauss_beliefs.assign(g.num_vars(), ComplexGaussian{});
    factor_beliefs.assign(g.num_factors(), Table());
    z_var.assign(g.num_vars(), 1.0);
    z_factor.assign(g.num_factors(), 1.0);

    for (VarId i = 0; i < g.num_vars(); ++i) {
      if (g.var(i).kind == VarKind::GaussianVec) {
        // prior if one is attached, otherwise unit precision
        const GaussianPriorPotential* prior = nullptr;
        for (FactorId a : p.nmf[i])
          if (const auto* gp =
                  std::get_if<GaussianPriorPotential>(&g.factor(a).potential))
            prior = gp;
        int d = g.var(i).dim;
        if (prior)
          gauss_beliefs[i] = ComplexGaussian{prior->mean, prior->precision};
        else
          gauss_beliefs[i] = ComplexGaussian{Eigen::VectorXcd::Zero(d),
                                             Eigen::MatrixXcd::Identity(d, d)};
        continue;
      }
      if (p.in_imf[i] && !p.in_ibp[i]) {
        int states = g.var(i).states;
        int ei = has_em ? em_index(i) : -1;
        var_beliefs[i] = ei >= 0
                             ? Table::point_mass(i, states, em.estimates[ei])
                             : Table::uniform({i}, {states});
        for (FactorId a : p.nmf[i])
          msgs.n[a][slot_of(g, a, i)] = var_beliefs[i];
      } else if (p.in_ibp[i]) {
        var_beliefs[i] = Table::uniform({i}, {g.var(i).states});
      }
    }
    // gaussian prior messages are constant; set them once
    for (FactorId a : p.mf_factors)
      if (const auto* gp =
              std::get_if<GaussianPriorPotential>(&g.factor(a).potential))
        msgs.m_gauss[a] = mf_prior_to_gaussian(*gp);

    if (loopy) {
      for (FactorId a : p.bp_factors) {
        const auto& nb = g.neighbors(a);
        for (std::size_t s = 0; s < nb.size(); ++s) {
          msgs.m[a][s] = Table::uniform({nb[s]}, {g.var(nb[s]).states});
          msgs.n[a][s] = Table::uniform({nb[s]}, {g.var(nb[s]).states});
        }
      }
    }
  }

  // one MF message toward a discrete variable
  Message mf_message_to_discrete(FactorId a, VarId i) {
    const Potential& pot = g.factor(a).potential;
    if (const auto* tp = std::get_if<TablePotential>(&pot))
      return mf_factor_to_var(tp->table, msgs.n[a], slot_of(g, a, i));
    if (const auto* op = std::get_if<ScalarObservationPotential>(&pot)) {
      VarId gv = -1;
      for (VarId j : g.neighbors(a))
        if (g.var(j).kind == VarKind::GaussianVec) gv = j;
      return mf_observation_to_symbol(
          *op, i, coordinate_moments(gauss_beliefs[gv], op->coord));
    }
    throw Error("mf factor '" + g.factor(a).name +
                "' cannot send to a discrete variable");
  }

  void step2_mf_inputs() {
    for (VarId i = 0; i < g.num_vars(); ++i) {
      if (!p.in_ibp[i] || !p.in_imf[i]) continue;
      int states = g.var(i).states;
      std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
      for (FactorId a : p.nmf[i]) {
        int s = slot_of(g, a, i);
        msgs.m[a][s] = mf_message_to_discrete(a, i);
        for (int x = 0; x < states; ++x)
          acc[x] += msgs.m[a][s].log_at(static_cast<std::size_t>(x));
      }
      evidence[i] = Table::from_log({i}, {states}, std::move(acc));
    }
  }

  void bp_beliefs_from_messages() {
    for (VarId i = 0; i < g.num_vars(); ++i) {
      if (!p.in_ibp[i]) continue;
      int states = g.var(i).states;
      std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
      if (evidence[i].size() != 0)
        for (int x = 0; x < states; ++x)
          acc[x] += evidence[i].log_at(static_cast<std::size_t>(x));
      for (FactorId c : p.nbp[i]) {
        const Message& m = msgs.m[c][slot_of(g, c, i)];
        for (int x = 0; x < states; ++x)
          acc[x] += m.log_at(static_cast<std::size_t>(x));
      }
      Table prod = Table::from_log({i}, {states}, std::move(acc));
      if (prod.all_zero())
        throw ContradictionError("belief of '" + g.var(i).name +
                                 "' has no mass");
      auto nr = normalize(prod);
      var_beliefs[i] = std::move(nr.table);
      z_var[i] = nr.normalizer;
    }
    for (FactorId a : p.bp_factors) {
      const Table& f = g.table(a);
      std::vector<Table> ops;
      ops.push_back(f.to_domain(Domain::Log));
      for (std::size_t s = 0; s < g.neighbors(a).size(); ++s)
        ops.push_back(msgs.n[a][s].to_domain(Domain::Log));
      Table joint = product(std::span<const Table>(ops), f.scope(), f.sizes());
      auto nr = normalize(joint);
      factor_beliefs[a] = std::move(nr.table);
      z_factor[a] = nr.normalizer;
    }
  }

  // returns false if the sweep deltas grew for 10 consecutive sweeps
  bool loopy_sweeps() {
    double prev_delta = kPosInf;
    int grow = 0;
    for (int sweep = 0; sweep < opts.n_inner; ++sweep) {
      for (FactorId a : p.bp_factors) {
        const auto& nb = g.neighbors(a);
        for (std::size_t s = 0; s < nb.size(); ++s)
          msgs.n[a][s] = bp_var_message(g, p, evidence, msgs, nb[s], a);
      }
      double delta = 0.0;
      for (FactorId a : p.bp_factors) {
        const auto& nb = g.neighbors(a);
        for (std::size_t s = 0; s < nb.size(); ++s) {
          Message fresh =
              normalize(raw_contraction(g, a, static_cast<int>(s), msgs)).table;
          if (cfg.damping > 0.0) {
            const Message& old = msgs.m[a][s];
            std::vector<double> lg(fresh.size());
            for (std::size_t k = 0; k < fresh.size(); ++k)
              lg[k] = cfg.damping * old.log_at(k) +
                      (1.0 - cfg.damping) * fresh.log_at(k);
            fresh = normalize(Table::from_log({nb[s]}, {g.var(nb[s]).states},
                                              std::move(lg)))
                        .table;
          }
          delta = std::max(delta, max_abs_diff(fresh, msgs.m[a][s]));
          msgs.m[a][s] = std::move(fresh);
        }
      }
      if (delta > prev_delta) {
        if (++grow >= 10) return false;
      } else {
        grow = 0;
      }
      prev_delta = delta;
    }
    return true;
  }

  void step4_mf_coordinates() {
    for (VarId i = 0; i < g.num_vars(); ++i) {
      if (!p.in_imf[i] || p.in_ibp[i]) continue;
      if (g.var(i).kind == VarKind::GaussianVec) {
        for (FactorId a : p.nmf[i]) {
          const Potential& pot = g.factor(a).potential;
          if (const auto* op = std::get_if<ScalarObservationPotential>(&pot)) {
            SymbolStats stats{op->symbols[0], 0.0};
            for (VarId j : g.neighbors(a))
              if (g.var(j).kind == VarKind::Discrete)
                stats = symbol_statistics(
                    normalize(msgs.n[a][slot_of(g, a, j)]).table, op->symbols);
            msgs.m_gauss[a] =
                mf_observation_to_gaussian(*op, g.var(i).dim, stats);
          }
          // gaussian prior messages are constant
        }
        gauss_beliefs[i] = gaussian_belief_from_messages(g, p, msgs, i);
        continue;
      }
      int states = g.var(i).states;
      std::vector<Message> incoming;
      for (FactorId a : p.nmf[i]) {
        int s = slot_of(g, a, i);
        msgs.m[a][s] = mf_message_to_discrete(a, i);
        incoming.push_back(msgs.m[a][s]);
      }
      int ei = has_em ? em_index(i) : -1;
      if (ei >= 0) {
        em.estimates[ei] = em_var_update(incoming);
        var_beliefs[i] = Table::point_mass(i, states, em.estimates[ei]);
      } else {
        std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
        for (const Message& m : incoming)
          for (int x = 0; x < states; ++x)
            acc[x] += m.log_at(static_cast<std::size_t>(x));
        Table prod = Table::from_log({i}, {states}, std::move(acc));
        if (prod.all_zero())
          throw ContradictionError("mf belief of '" + g.var(i).name +
                                   "' has no mass");
        auto nr = normalize(prod);
        var_beliefs[i] = std::move(nr.table);
        z_var[i] = nr.normalizer;
      }
      for (FactorId a : p.nmf[i])
        msgs.n[a][slot_of(g, a, i)] = var_beliefs[i];
    }
  }

  double message_delta() const {
    if (!have_prev) return kPosInf;
    double d = 0.0;
    for (FactorId a = 0; a < g.num_factors(); ++a) {
      for (std::size_t s = 0; s < msgs.m[a].size(); ++s) {
        if (msgs.m[a][s].size() == 0 || prev_msgs.m[a][s].size() == 0) continue;
        d = std::max(d, max_abs_diff(msgs.m[a][s], prev_msgs.m[a][s]));
      }
      if (msgs.m_gauss[a] && prev_msgs.m_gauss[a]) {
        d = std::max(d, (msgs.m_gauss[a]->lambda - prev_msgs.m_gauss[a]->lambda)
                            .cwiseAbs()
                            .maxCoeff());
        d = std::max(d, (msgs.m_gauss[a]->eta - prev_msgs.m_gauss[a]->eta)
                            .cwiseAbs()
                            .maxCoeff());
      }
    }
    for (VarId i = 0; i < g.num_vars(); ++i) {
      if (var_beliefs[i].size() == 0 || prev_var_beliefs[i].size() == 0)
        continue;
      d = std::max(d, max_abs_diff(var_beliefs[i], prev_var_beliefs[i]));
    }
    return d;
  }

  BeliefState snapshot() const {
    BeliefState st;
    st.var_beliefs = var_beliefs;
    st.gauss_beliefs = gauss_beliefs;
    st.factor_beliefs = factor_beliefs;
    st.messages = msgs;
    st.z_factor = z_factor;
    st.z_var = z_var;
    return st;
  }

  RunResult run() {
    init();
    auto t0 = std::chrono::steady_clock::now();
    double prev_fe = kPosInf;
    bool contradiction = false;
    std::string contradiction_what;

    for (int it = 1; it <= stop.max_outer; ++it) {
      bool sweeps_ok = true;
      try {
        step2_mf_inputs();
        if (loopy)
          sweeps_ok = loopy_sweeps();
        else
          forward_backward(g, p, evidence, msgs);
        bp_beliefs_from_messages();
        // step 3: APP messages from the shared variables into the MF part
        for (VarId i = 0; i < g.num_vars(); ++i) {
          if (!p.in_ibp[i] || !p.in_imf[i]) continue;
          for (FactorId a : p.nmf[i])
            msgs.n[a][slot_of(g, a, i)] = var_beliefs[i];
        }
        step4_mf_coordinates();
      } catch (const ContradictionError& e) {
        contradiction = true;
        contradiction_what = e.what();
        if (cfg.zero_support == ZeroSupportPolicy::Strict) throw;
      }

      BeliefState st = snapshot();
      TraceRow row;
      row.iteration = it;
      row.free_energy = contradiction ? kPosInf : combined_free_energy(g, p, st);
      ConstraintResiduals cr = contradiction
                                   ? ConstraintResiduals{}
                                   : constraint_residuals(g, p, st);
      row.marg_residual = cr.max_marg_residual;
      row.stat_residual =
          contradiction ? kPosInf
                        : stationarity_residual(g, p, st,
                                                has_em ? &em : nullptr);
      row.max_delta = message_delta();
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      trace.rows.push_back(row);

      if (!loopy && !contradiction && trace.rows.size() >= 2) {
        double before = trace.rows[trace.rows.size() - 2].free_energy;
        if (before < kPosInf && row.free_energy > before + 1e-12)
          throw Error("run_algorithm1: free energy increased");
      }

      prev_msgs = msgs;
      prev_var_beliefs = var_beliefs;
      have_prev = true;

      if (contradiction) {
        trace.contradiction = true;
        trace.stop_reason = "contradiction: " + contradiction_what;
        break;
      }
      if (!sweeps_ok) {
        trace.diverged = true;
        trace.stop_reason = "divergence detected in the bp sweeps";
        break;
      }
      if (it >= 2) {
        double dfe = std::abs(prev_fe - row.free_energy);
        if (dfe <= stop.rel_fe_tol * std::max(1.0, std::abs(row.free_energy))) {
          trace.converged = true;
          trace.stop_reason = "free-energy change below tolerance";
        } else if (row.max_delta <= stop.msg_delta_tol) {
          trace.converged = true;
          trace.stop_reason = "message delta below tolerance";
        }
      }
      prev_fe = row.free_energy;
      if (trace.converged) break;
    }
    if (!trace.converged && !trace.diverged && !trace.contradiction)
      trace.stop_reason = "max outer iterations reached";

    RunResult res;
    res.state = snapshot();
    res.state.messages = std::move(msgs);
    res.trace = std::move(trace);
    return res;
  }
};

}  // namespace

RunResult run_algorithm1(const FactorGraph& g, const BpMfPartition& p,
                         const UpdateConfig& cfg, const StopRule& stop,
                         const EmConstraintSet* em) {
  OuterLoop loop(g, p, cfg, stop, /*loopy=*/false, LoopyOptions{}, em);
  return loop.run();
}

RunResult run_loopy(const FactorGraph& g, const BpMfPartition& p,
                    const UpdateConfig& cfg, const StopRule& stop,
                    const LoopyOptions& opts, const EmConstraintSet* em) {
  OuterLoop loop(g, p, cfg, stop, /*loopy=*/true, opts, em);
  return loop.run();
}

void write_trace_csv(const ScheduleTrace& trace, std::ostream& os) {
  os << "iteration,free_energy,marg_residual,stat_residual,max_delta\n";
  char buf[128];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                  r.free_energy, r.marg_residual, r.stat_residual, r.max_delta);
    os << buf;
  }
}

}  // namespace bpmf
