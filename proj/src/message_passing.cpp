#include "bpmf/message_passing.hpp"

#include <algorithm>
#include <cmath>

namespace bpmf {

EdgeMessages EdgeMessages::sized(const FactorGraph& g) {
  EdgeMessages em;
  em.n.resize(g.num_factors());
  em.m.resize(g.num_factors());
  em.m_gauss.resize(g.num_factors());
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    em.n[a].resize(g.neighbors(a).size());
    em.m[a].resize(g.neighbors(a).size());
  }
  return em;
}

namespace {

// Contraction of f with the incoming messages of every slot except `target`,
// summed onto the target variable. Works in the log domain.
Message contract_excluding(const Table& f, const std::vector<Message>& n_in,
                           int target_slot) {
  const auto& scope = f.scope();
  std::vector<Table> ops;
  ops.reserve(scope.size());
  ops.push_back(f.domain() == Domain::Log ? f : f.to_domain(Domain::Log));
  for (std::size_t s = 0; s < scope.size(); ++s) {
    if (static_cast<int>(s) == target_slot) continue;
    ops.push_back(n_in[s].domain() == Domain::Log
                      ? n_in[s]
                      : n_in[s].to_domain(Domain::Log));
  }
  Table joint = product(std::span<const Table>(ops), f.scope(), f.sizes());
  return marginalize(joint, scope[target_slot]);
}

}  // namespace

Message bp_factor_to_var(const Table& f, const std::vector<Message>& n_in,
                         int target_slot, const UpdateConfig& cfg) {
  cfg.check();
  if (target_slot < 0 || target_slot >= static_cast<int>(f.scope().size()))
    throw Error("bp_factor_to_var: bad target slot");
  Message raw = contract_excluding(f, n_in, target_slot);
  if (raw.all_zero())
    throw ContradictionError(
        "bp_factor_to_var: message is identically zero (conflicting hard "
        "constraints)");
  if (cfg.mode == NormalizationMode::Unnormalized) {
    if (cfg.omega != 1.0) raw.scale_inplace(cfg.omega);
    return raw;
  }
  // z_a makes b_a = z_a f prod_j n_j sum to one; its mass equals
  // sum_x_i raw(x_i) n_i(x_i).
  std::vector<double> terms(raw.size());
  const Message& ni = n_in[target_slot];
  for (std::size_t k = 0; k < raw.size(); ++k)
    terms[k] = raw.log_at(k) + ni.log_at(k);
  double log_mass = log_sum_exp(terms);
  if (log_mass == kNegInf)
    throw ContradictionError("bp_factor_to_var: factor belief has no mass");
  for (double& v : raw.raw()) v -= log_mass;
  return raw;
}

Message bp_var_to_factor(VarId var, int states,
                         const std::vector<Message>& incoming_m,
                         int exclude_idx) {
  std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
  for (std::size_t j = 0; j < incoming_m.size(); ++j) {
    if (static_cast<int>(j) == exclude_idx) continue;
    for (int x = 0; x < states; ++x)
      acc[x] += incoming_m[j].log_at(static_cast<std::size_t>(x));
  }
  Message out = Table::from_log({var}, {states}, std::move(acc));
  if (out.all_zero())
    throw ContradictionError("bp_var_to_factor: all-zero product");
  return out;
}

Message combined_var_to_factor(VarId var, int states,
                               const std::vector<Message>& m_bp,
                               int exclude_bp_idx,
                               const std::vector<Message>& m_mf,
                               bool normalize_result) {
  std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
  for (std::size_t j = 0; j < m_bp.size(); ++j) {
    if (static_cast<int>(j) == exclude_bp_idx) continue;
    for (int x = 0; x < states; ++x)
      acc[x] += m_bp[j].log_at(static_cast<std::size_t>(x));
  }
  for (const Message& m : m_mf)
    for (int x = 0; x < states; ++x)
      acc[x] += m.log_at(static_cast<std::size_t>(x));
  Message out = Table::from_log({var}, {states}, std::move(acc));
  if (out.all_zero())
    throw ContradictionError("combined_var_to_factor: all-zero product");
  if (normalize_result) out = normalize(out).table;
  return out;
}

Message mf_factor_to_var(const Table& f, const std::vector<Message>& n_in,
                         int target_slot) {
  const auto& scope = f.scope();
  if (target_slot < 0 || target_slot >= static_cast<int>(scope.size()))
    throw Error("mf_factor_to_var: bad target slot");
  // normalized incoming beliefs, linear domain
  std::vector<Table> b;
  b.reserve(scope.size());
  for (std::size_t s = 0; s < scope.size(); ++s) {
    if (static_cast<int>(s) == target_slot) {
      b.push_back(Table());
      continue;
    }
    b.push_back(normalize(n_in[s]).table.to_domain(Domain::Linear));
  }
  int ts = f.sizes()[target_slot];
  std::vector<double> acc(static_cast<std::size_t>(ts), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    double w = 1.0;
    for (std::size_t s = 0; s < scope.size(); ++s) {
      if (static_cast<int>(s) == target_slot) continue;
      w *= b[s].raw()[static_cast<std::size_t>(f.digit_of(k, static_cast<int>(s)))];
    }
    if (w == 0.0) continue;
    double lf = f.log_at(k);
    if (lf == kNegInf)
      throw Error(
          "mf_factor_to_var: factor has a zero inside the expectation "
          "support (hard constraints are not allowed in the MF part)");
    acc[static_cast<std::size_t>(f.digit_of(k, target_slot))] += w * lf;
  }
  return Table::from_log({scope[target_slot]}, {ts}, std::move(acc));
}

Message mf_observation_to_symbol(const ScalarObservationPotential& obs,
                                 VarId symbol_var, CoordMoments h_moments) {
  // E_h |y - h s|^2 = |y|^2 - 2 Re(y* mu_h s) + |s|^2 (var_h + |mu_h|^2)
  double eh2 = h_moments.var + std::norm(h_moments.mean);
  std::vector<double> lg(obs.symbols.size());
  double c = std::log(obs.gamma / M_PI);
  for (std::size_t k = 0; k < obs.symbols.size(); ++k) {
    const cplx s = obs.symbols[k];
    double e = std::norm(obs.y) -
               2.0 * std::real(std::conj(obs.y) * h_moments.mean * s) +
               std::norm(s) * eh2;
    lg[k] = c - obs.gamma * e;
  }
  return Table::from_log({symbol_var}, {static_cast<int>(lg.size())},
                         std::move(lg));
}

GaussianCanon mf_observation_to_gaussian(const ScalarObservationPotential& obs,
                                         int gauss_dim, SymbolStats stats) {
  double es2 = stats.var + std::norm(stats.mean);
  GaussianCanon c{Eigen::MatrixXcd::Zero(gauss_dim, gauss_dim),
                  Eigen::VectorXcd::Zero(gauss_dim)};
  c.lambda(obs.coord, obs.coord) = obs.gamma * es2;
  c.eta(obs.coord) = obs.gamma * obs.y * std::conj(stats.mean);
  return c;
}

GaussianCanon mf_prior_to_gaussian(const GaussianPriorPotential& prior) {
  return {prior.precision, prior.precision * prior.mean};
}

double expected_log_observation(const ScalarObservationPotential& obs,
                                CoordMoments h_moments, SymbolStats stats) {
  double eh2 = h_moments.var + std::norm(h_moments.mean);
  double es2 = stats.var + std::norm(stats.mean);
  double e = std::norm(obs.y) -
             2.0 * std::real(std::conj(obs.y) * h_moments.mean * stats.mean) +
             eh2 * es2;
  return std::log(obs.gamma / M_PI) - obs.gamma * e;
}

double expected_log_gaussian_prior(const GaussianPriorPotential& prior,
                                   const ComplexGaussian& belief) {
  int d = belief.dim();
  Eigen::MatrixXcd cov = belief.covariance();
  Eigen::VectorXcd dm = belief.mean - prior.mean;
  double quad = std::real((prior.precision * cov).trace()) +
                std::real(dm.dot(prior.precision * dm));
  Eigen::LLT<Eigen::MatrixXcd> llt(prior.precision);
  if (llt.info() != Eigen::Success)
    throw Error("expected_log_gaussian_prior: prior precision not PD");
  double logdet = 0.0;
  for (int i = 0; i < d; ++i)
    logdet += 2.0 * std::log(std::real(llt.matrixL()(i, i)));
  return logdet - d * std::log(M_PI) - quad;
}

int em_var_update(const std::vector<Message>& incoming_m) {
  if (incoming_m.empty()) throw Error("em_var_update: no incoming messages");
  std::size_t states = incoming_m[0].size();
  int best = 0;
  double best_val = kNegInf;
  for (std::size_t x = 0; x < states; ++x) {
    double v = 0.0;
    for (const Message& m : incoming_m) v += m.log_at(x);
    if (v > best_val) {  // strict: ties keep the lowest index
      best_val = v;
      best = static_cast<int>(x);
    }
  }
  return best;
}

ComplexGaussian gaussian_belief_from_messages(const FactorGraph& g,
                                              const BpMfPartition& p,
                                              const EdgeMessages& msgs,
                                              VarId i) {
  int d = g.var(i).dim;
  Eigen::MatrixXcd lam = Eigen::MatrixXcd::Zero(d, d);
  Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(d);
  for (FactorId a : p.nmf[i]) {
    if (!msgs.m_gauss[a]) continue;
    lam += msgs.m_gauss[a]->lambda;
    eta += msgs.m_gauss[a]->eta;
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(lam);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian belief: combined precision not positive definite");
  return {llt.solve(eta), std::move(lam)};
}

BeliefState compute_beliefs(const FactorGraph& g, const BpMfPartition& p,
                            EdgeMessages messages) {
  BeliefState st;
  st.var_beliefs.resize(g.num_vars());
  st.gauss_beliefs.resize(g.num_vars());
  st.factor_beliefs.resize(g.num_factors());
  st.z_factor.assign(g.num_factors(), 1.0);
  st.z_var.assign(g.num_vars(), 1.0);

  for (FactorId a : p.bp_factors) {
    const Table& f = g.table(a);
    std::vector<Table> ops;
    ops.push_back(f.to_domain(Domain::Log));
    for (std::size_t s = 0; s < g.neighbors(a).size(); ++s)
      ops.push_back(messages.n[a][s].to_domain(Domain::Log));
    Table joint = product(std::span<const Table>(ops), f.scope(), f.sizes());
    auto nr = normalize(joint);
    st.factor_beliefs[a] = std::move(nr.table);
    st.z_factor[a] = nr.normalizer;
  }

  for (VarId i = 0; i < g.num_vars(); ++i) {
    if (g.var(i).kind == VarKind::GaussianVec) {
      st.gauss_beliefs[i] = gaussian_belief_from_messages(g, p, messages, i);
      continue;
    }
    int states = g.var(i).states;
    std::vector<double> acc(static_cast<std::size_t>(states), 0.0);
    bool any = false;
    auto fold = [&](const std::vector<FactorId>& fs) {
      for (FactorId a : fs) {
        int slot = -1;
        const auto& nb = g.neighbors(a);
        for (std::size_t s = 0; s < nb.size(); ++s)
          if (nb[s] == i) slot = static_cast<int>(s);
        for (int x = 0; x < states; ++x)
          acc[x] += messages.m[a][slot].log_at(static_cast<std::size_t>(x));
        any = true;
      }
    };
    fold(p.nbp[i]);
    fold(p.nmf[i]);
    Table prodt = Table::from_log({i}, {states}, std::move(acc));
    if (!any) prodt = Table::uniform({i}, {states});
    if (prodt.all_zero())
      throw ContradictionError("compute_beliefs: belief of '" + g.var(i).name +
                               "' has no mass");
    auto nr = normalize(prodt);
    st.var_beliefs[i] = std::move(nr.table);
    st.z_var[i] = nr.normalizer;
  }
  st.messages = std::move(messages);
  return st;
}

RescalingReport rescaling_check(const FactorGraph& g,
                                const UnnormalizedSolution& sol,
                                double rel_tol) {
  RescalingReport rep;
  rep.z_tilde.assign(g.num_factors(), 0.0);
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const Table& f = g.table(a);
    std::vector<Table> ops;
    ops.push_back(f.to_domain(Domain::Log));
    for (std::size_t s = 0; s < g.neighbors(a).size(); ++s) {
      if (sol.n[a][s].all_zero())
        throw Error("rescaling_check: messages must be strictly positive");
      ops.push_back(sol.n[a][s].to_domain(Domain::Log));
    }
    Table joint = product(std::span<const Table>(ops), f.scope(), f.sizes());
    double mass = joint.to_domain(Domain::Linear).mass();
    if (!(mass > 0.0))
      throw Error("rescaling_check: factor belief has no mass");
    rep.z_tilde[a] = 1.0 / mass;
  }

  rep.g.assign(g.num_vars(), 1.0);
  std::vector<char> have_g(g.num_vars(), 0);
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const auto& nb = g.neighbors(a);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      VarId i = nb[s];
      double cand = sol.omega[a][s] / rep.z_tilde[a];
      if (!have_g[i]) {
        rep.g[i] = cand;
        have_g[i] = 1;
      } else if (std::abs(cand - rep.g[i]) >
                 rel_tol * std::max(std::abs(cand), std::abs(rep.g[i]))) {
        rep.rescalable = false;
        rep.violation = {a, static_cast<int>(s)};
        return rep;
      }
    }
  }
  rep.rescalable = true;
  return rep;
}

}  // namespace bpmf
