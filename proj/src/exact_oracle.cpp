#include "bpmf/exact_oracle.hpp"

#include <cmath>
#include <random>

namespace bpmf {
namespace oracle {

namespace {

std::vector<VarId> all_vars(const FactorGraph& g) {
  std::vector<VarId> v(g.num_vars());
  for (int i = 0; i < g.num_vars(); ++i) v[i] = i;
  return v;
}

std::vector<int> var_sizes(const FactorGraph& g) {
  std::vector<int> sz(g.num_vars());
  for (int i = 0; i < g.num_vars(); ++i) {
    if (g.var(i).kind != VarKind::Discrete)
      throw Error("oracle: continuous variables are not enumerable");
    sz[i] = g.var(i).states;
  }
  return sz;
}

}  // namespace

Table enumerate_joint(const FactorGraph& g) {
  std::vector<int> sz = var_sizes(g);
  std::size_t total = 1;
  for (int s : sz) {
    total *= static_cast<std::size_t>(s);
    if (total > kMaxJointStates)
      throw Error("oracle: joint state space exceeds the 2^20 limit");
  }
  std::vector<Table> fs;
  for (FactorId a = 0; a < g.num_factors(); ++a)
    fs.push_back(g.table(a).to_domain(Domain::Log));
  Table joint = product(std::span<const Table>(fs), all_vars(g), sz);
  if (joint.to_domain(Domain::Linear).mass() <= 0.0)
    throw ContradictionError("oracle: all factor products are zero");
  return normalize(joint).table.to_domain(Domain::Linear);
}

Table marginalize_scope(const Table& joint, const std::vector<VarId>& keep,
                        const std::vector<int>& keep_sizes) {
  std::vector<int> pos(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    int p = joint.scope_pos(keep[k]);
    if (p < 0) throw Error("marginalize_scope: variable not in joint scope");
    pos[k] = p;
  }
  std::size_t n = 1;
  for (int s : keep_sizes) n *= static_cast<std::size_t>(s);
  std::vector<double> out(n, 0.0);
  Table lin = joint.to_domain(Domain::Linear);
  for (std::size_t idx = 0; idx < lin.size(); ++idx) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < keep.size(); ++k)
      o = o * static_cast<std::size_t>(keep_sizes[k]) +
          static_cast<std::size_t>(lin.digit_of(idx, pos[k]));
    out[o] += lin.raw()[idx];
  }
  return Table::from_linear(keep, keep_sizes, std::move(out));
}

ExactMarginals exact_marginals(const FactorGraph& g) {
  Table joint = enumerate_joint(g);
  ExactMarginals em;
  for (VarId i = 0; i < g.num_vars(); ++i)
    em.var_marginals.push_back(marginalize(joint, i));
  for (FactorId a = 0; a < g.num_factors(); ++a)
    em.factor_marginals.push_back(
        marginalize_scope(joint, g.neighbors(a), g.scope_sizes(a)));
  return em;
}

Table tree_reconstruction(const FactorGraph& g,
                          const std::vector<Table>& var_beliefs,
                          const std::vector<Table>& factor_beliefs) {
  std::vector<int> sz = var_sizes(g);
  std::vector<VarId> scope = all_vars(g);
  std::size_t total = 1;
  for (int s : sz) total *= static_cast<std::size_t>(s);
  if (total > kMaxJointStates)
    throw Error("tree_reconstruction: state space too large");

  std::vector<double> lg(total, 0.0);
  Table shape = Table::from_log(scope, sz, std::vector<double>(total, 0.0));
  for (std::size_t idx = 0; idx < total; ++idx) {
    double acc = 0.0;
    for (FactorId a = 0; a < g.num_factors(); ++a) {
      const Table& ba = factor_beliefs[a];
      std::vector<int> sub(ba.scope().size());
      for (std::size_t s = 0; s < ba.scope().size(); ++s)
        sub[s] = shape.digit_of(idx, ba.scope()[s]);
      acc += ba.log_at(ba.index_of(sub));
    }
    for (VarId i = 0; i < g.num_vars(); ++i) {
      double deg = static_cast<double>(g.var_neighbors(i).size());
      int x = shape.digit_of(idx, i);
      acc -= (deg - 1.0) * var_beliefs[i].log_at(static_cast<std::size_t>(x));
    }
    lg[idx] = acc;
  }
  return Table::from_log(scope, sz, std::move(lg)).to_domain(Domain::Linear);
}

namespace {

// F_MF evaluated straight from its definition.
double mf_energy(const FactorGraph& g, const std::vector<Table>& beliefs) {
  double fe = 0.0;
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    const Table& f = g.table(a);
    const auto& nb = g.neighbors(a);
    for (std::size_t k = 0; k < f.size(); ++k) {
      double w = 1.0;
      for (std::size_t s = 0; s < nb.size(); ++s)
        w *= beliefs[nb[s]].linear_at(
            static_cast<std::size_t>(f.digit_of(k, static_cast<int>(s))));
      if (w == 0.0) continue;
      double lf = f.log_at(k);
      if (lf == kNegInf) return kPosInf;
      fe -= w * lf;
    }
  }
  for (VarId i = 0; i < g.num_vars(); ++i)
    for (std::size_t x = 0; x < beliefs[i].size(); ++x)
      fe += xlogx(beliefs[i].linear_at(x));
  return fe;
}

}  // namespace

MfMinimizeResult grid_mf_minimize(const FactorGraph& g, int restarts,
                                  std::uint64_t seed, int max_sweeps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  MfMinimizeResult best;
  best.free_energy = kPosInf;

  for (int r = 0; r < restarts; ++r) {
    std::vector<Table> b(g.num_vars());
    for (VarId i = 0; i < g.num_vars(); ++i) {
      int states = g.var(i).states;
      std::vector<double> v(static_cast<std::size_t>(states));
      for (double& x : v) x = unif(rng);
      b[i] = normalize(Table::from_linear({i}, {states}, std::move(v))).table;
    }
    double prev = mf_energy(g, b);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      for (VarId i = 0; i < g.num_vars(); ++i) {
        int states = g.var(i).states;
        std::vector<double> lg(static_cast<std::size_t>(states), 0.0);
        for (FactorId a : g.var_neighbors(i)) {
          const Table& f = g.table(a);
          int slot = -1;
          const auto& nb = g.neighbors(a);
          for (std::size_t s = 0; s < nb.size(); ++s)
            if (nb[s] == i) slot = static_cast<int>(s);
          for (std::size_t k = 0; k < f.size(); ++k) {
            double w = 1.0;
            for (std::size_t s = 0; s < nb.size(); ++s) {
              if (static_cast<int>(s) == slot) continue;
              w *= b[nb[s]].linear_at(
                  static_cast<std::size_t>(f.digit_of(k, static_cast<int>(s))));
            }
            if (w == 0.0) continue;
            lg[static_cast<std::size_t>(f.digit_of(k, slot))] += w * f.log_at(k);
          }
        }
        b[i] = normalize(Table::from_log({i}, {states}, std::move(lg))).table
                   .to_domain(Domain::Linear);
      }
      double cur = mf_energy(g, b);
      if (std::abs(prev - cur) < 1e-13 * std::max(1.0, std::abs(cur))) break;
      prev = cur;
    }
    double fe = mf_energy(g, b);
    if (fe < best.free_energy) {
      best.free_energy = fe;
      best.beliefs = b;
      best.restarts_used = r + 1;
    }
  }
  return best;
}

}  // namespace oracle
}  // namespace bpmf
