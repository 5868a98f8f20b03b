#include "bpmf/factor_graph.hpp"

#include <algorithm>
#include <numeric>

namespace bpmf {

VarId FactorGraph::add_discrete(std::string name, int states) {
  if (states < 1) throw Error("variable '" + name + "': alphabet size must be >= 1");
  vars_.push_back({std::move(name), VarKind::Discrete, states, 0});
  var_neighbors_.emplace_back();
  return static_cast<VarId>(vars_.size() - 1);
}

VarId FactorGraph::add_gaussian(std::string name, int dim) {
  if (dim < 1) throw Error("variable '" + name + "': dimension must be >= 1");
  vars_.push_back({std::move(name), VarKind::GaussianVec, 0, dim});
  var_neighbors_.emplace_back();
  return static_cast<VarId>(vars_.size() - 1);
}

const Table& FactorGraph::table(FactorId a) const {
  const auto* tp = std::get_if<TablePotential>(&factors_.at(a).potential);
  if (!tp) throw Error("factor '" + factors_.at(a).name + "' has no table potential");
  return tp->table;
}

std::vector<int> FactorGraph::scope_sizes(FactorId a) const {
  std::vector<int> sz;
  for (VarId i : factors_.at(a).scope) {
    if (vars_.at(i).kind != VarKind::Discrete)
      throw Error("scope_sizes: factor touches a continuous variable");
    sz.push_back(vars_.at(i).states);
  }
  return sz;
}

void FactorGraph::add_factor_checked(FactorSpec f) {
  if (f.scope.empty()) throw Error("factor '" + f.name + "': empty scope");
  for (VarId i : f.scope)
    if (i < 0 || i >= num_vars())
      throw Error("factor '" + f.name + "': unknown variable id");
  for (std::size_t p = 0; p < f.scope.size(); ++p)
    for (std::size_t q = p + 1; q < f.scope.size(); ++q)
      if (f.scope[p] == f.scope[q])
        throw Error("factor '" + f.name + "': duplicate variable in scope");

  if (const auto* tp = std::get_if<TablePotential>(&f.potential)) {
    if (tp->table.size() > Table::kMaxFactorStates)
      throw Error("factor '" + f.name + "': table exceeds the 2^16 state limit");
    if (tp->table.scope().size() != f.scope.size())
      throw Error("factor '" + f.name + "': table arity does not match scope");
    for (std::size_t p = 0; p < f.scope.size(); ++p) {
      const Variable& v = vars_[f.scope[p]];
      if (v.kind != VarKind::Discrete)
        throw Error("factor '" + f.name + "': table over a continuous variable");
      if (tp->table.sizes()[p] != v.states)
        throw Error("factor '" + f.name + "': table shape does not match alphabets");
    }
  } else if (const auto* gp = std::get_if<GaussianPriorPotential>(&f.potential)) {
    if (f.scope.size() != 1 || vars_[f.scope[0]].kind != VarKind::GaussianVec)
      throw Error("factor '" + f.name +
                  "': gaussian prior must cover exactly one Gaussian variable");
    int d = vars_[f.scope[0]].dim;
    if (gp->mean.size() != d || gp->precision.rows() != d ||
        gp->precision.cols() != d)
      throw Error("factor '" + f.name + "': gaussian prior dimension mismatch");
  } else if (const auto* op = std::get_if<ScalarObservationPotential>(&f.potential)) {
    int n_gauss = 0, n_disc = 0;
    for (VarId i : f.scope) {
      if (vars_[i].kind == VarKind::GaussianVec) {
        ++n_gauss;
        if (op->coord < 0 || op->coord >= vars_[i].dim)
          throw Error("factor '" + f.name + "': observation coordinate out of range");
      } else {
        ++n_disc;
        if (static_cast<int>(op->symbols.size()) != vars_[i].states)
          throw Error("factor '" + f.name + "': symbol map size mismatch");
      }
    }
    if (n_gauss != 1 || n_disc > 1)
      throw Error("factor '" + f.name +
                  "': observation needs one Gaussian variable and at most one "
                  "discrete variable");
    if (n_disc == 0 && op->symbols.size() != 1)
      throw Error("factor '" + f.name +
                  "': pilot observation needs exactly one known symbol");
    if (!(op->gamma > 0.0))
      throw Error("factor '" + f.name + "': noise precision must be positive");
  }

  FactorId a = static_cast<FactorId>(factors_.size());
  for (VarId i : f.scope) var_neighbors_[i].push_back(a);
  factors_.push_back(std::move(f));
}

FactorGraph build_graph(std::vector<Variable> vars,
                        std::vector<FactorSpec> factors) {
  FactorGraph g;
  for (auto& v : vars) {
    if (v.kind == VarKind::Discrete) {
      if (v.states < 1)
        throw Error("variable '" + v.name + "': alphabet size must be >= 1");
    } else if (v.dim < 1) {
      throw Error("variable '" + v.name + "': dimension must be >= 1");
    }
    g.vars_.push_back(v);
    g.var_neighbors_.emplace_back();
  }
  for (auto& f : factors) g.add_factor_checked(std::move(f));
  return g;
}

BpMfPartition partition(const FactorGraph& g,
                        const std::vector<FactorId>& bp_factor_ids) {
  BpMfPartition p;
  p.is_bp.assign(g.num_factors(), 0);
  for (FactorId a : bp_factor_ids) {
    if (a < 0 || a >= g.num_factors())
      throw Error("partition: unknown factor id");
    p.is_bp[a] = 1;
  }
  for (FactorId a = 0; a < g.num_factors(); ++a)
    (p.is_bp[a] ? p.bp_factors : p.mf_factors).push_back(a);

  p.in_ibp.assign(g.num_vars(), 0);
  p.in_imf.assign(g.num_vars(), 0);
  p.nbp.assign(g.num_vars(), {});
  p.nmf.assign(g.num_vars(), {});
  for (FactorId a = 0; a < g.num_factors(); ++a) {
    for (VarId i : g.neighbors(a)) {
      if (p.is_bp[a]) {
        p.in_ibp[i] = 1;
        p.nbp[i].push_back(a);
      } else {
        p.in_imf[i] = 1;
        p.nmf[i].push_back(a);
      }
    }
  }
  for (VarId i = 0; i < g.num_vars(); ++i)
    if (p.in_ibp[i] && g.var(i).kind != VarKind::Discrete)
      throw Error("partition: continuous variable '" + g.var(i).name +
                  "' cannot be attached to a BP factor");
  return p;
}

RegionSet region_set_mf(const FactorGraph& g) {
  Region r;
  for (VarId i = 0; i < g.num_vars(); ++i) r.vars.push_back(i);
  for (FactorId a = 0; a < g.num_factors(); ++a) r.factors.push_back(a);
  r.counting_number = 1;
  return RegionSet{{std::move(r)}};
}

RegionSet region_set_bethe(const FactorGraph& g) {
  RegionSet rs;
  for (FactorId a = 0; a < g.num_factors(); ++a)
    rs.regions.push_back({g.neighbors(a), {a}, 1});
  for (VarId i = 0; i < g.num_vars(); ++i)
    rs.regions.push_back(
        {{i}, {}, 1 - static_cast<int>(g.var_neighbors(i).size())});
  return rs;
}

RegionSet region_set_bpmf(const FactorGraph& g, const BpMfPartition& p) {
  RegionSet rs;
  // large regions, one per BP factor
  for (FactorId a : p.bp_factors) rs.regions.push_back({g.neighbors(a), {a}, 1});
  // small regions for BP variables
  for (VarId i = 0; i < g.num_vars(); ++i) {
    if (!p.in_ibp[i]) continue;
    int c = 1 - p.bp_degree(i) - (p.in_imf[i] ? 1 : 0);
    rs.regions.push_back({{i}, {}, c});
  }
  // one MF region covering the whole MF part
  if (!p.mf_factors.empty()) {
    Region r;
    for (VarId i = 0; i < g.num_vars(); ++i)
      if (p.in_imf[i]) r.vars.push_back(i);
    r.factors = p.mf_factors;
    r.counting_number = 1;
    rs.regions.push_back(std::move(r));
  }
  return rs;
}

bool region_set_valid(const FactorGraph& g, const RegionSet& rs) {
  std::vector<int> var_sum(g.num_vars(), 0), fac_sum(g.num_factors(), 0);
  for (const Region& r : rs.regions) {
    std::vector<char> in_region(g.num_vars(), 0);
    for (VarId i : r.vars) {
      if (i < 0 || i >= g.num_vars()) return false;
      in_region[i] = 1;
      var_sum[i] += r.counting_number;
    }
    for (FactorId a : r.factors) {
      if (a < 0 || a >= g.num_factors()) return false;
      fac_sum[a] += r.counting_number;
      for (VarId i : g.neighbors(a))
        if (!in_region[i]) return false;  // region not closed
    }
  }
  for (int s : var_sum)
    if (s != 1) return false;
  for (int s : fac_sum)
    if (s != 1) return false;
  return true;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  // returns false if already in the same set
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// DFS cycle extraction on the bipartite BP subgraph; returns factor ids on
// one cycle. Only called after union-find has established a cycle exists.
std::vector<FactorId> find_cycle_witness(const FactorGraph& g,
                                         const BpMfPartition& p) {
  int nv = g.num_vars(), nf = g.num_factors();
  // node encoding: [0, nv) variables, [nv, nv+nf) factors
  std::vector<int> parent(nv + nf, -2);  // -2 unvisited, -1 root
  std::vector<int> stack;
  for (int start = 0; start < nv + nf; ++start) {
    if (parent[start] != -2) continue;
    bool start_is_factor = start >= nv;
    if (start_is_factor && !p.is_bp[start - nv]) continue;
    parent[start] = -1;
    stack.assign(1, start);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      auto visit = [&](int w) -> std::vector<FactorId> {
        if (parent[w] == -2) {
          parent[w] = u;
          stack.push_back(w);
          return {};
        }
        if (w != parent[u]) {
          // back edge u-w closes a cycle; walk both chains up to the root
          // and splice at the first common ancestor
          std::vector<int> pu, pw;
          for (int x = u; x != -1; x = parent[x]) pu.push_back(x);
          for (int x = w; x != -1; x = parent[x]) pw.push_back(x);
          std::vector<char> on_pu(nv + nf, 0);
          for (int x : pu) on_pu[x] = 1;
          int meet = -1;
          for (int x : pw)
            if (on_pu[x]) { meet = x; break; }
          std::vector<FactorId> cyc;
          for (int x = u; x != meet; x = parent[x])
            if (x >= nv) cyc.push_back(x - nv);
          for (int x = w; x != meet; x = parent[x])
            if (x >= nv) cyc.push_back(x - nv);
          if (meet >= nv) cyc.push_back(meet - nv);
          return cyc;
        }
        return {};
      };
      if (u < nv) {
        for (FactorId a : p.nbp[u]) {
          auto c = visit(a + nv);
          if (!c.empty()) return c;
        }
      } else {
        for (VarId i : g.neighbors(u - nv)) {
          auto c = visit(i);
          if (!c.empty()) return c;
        }
      }
    }
  }
  return {};
}

}  // namespace

Applicability check_algorithm1_applicable(const FactorGraph& g,
                                          const BpMfPartition& p) {
  Applicability res;
  for (FactorId a : p.mf_factors) {
    int bp_touch = 0;
    for (VarId i : g.neighbors(a)) bp_touch += p.in_ibp[i] ? 1 : 0;
    if (bp_touch > 1) {
      res.bad_mf_factor = a;
      res.reason = "mf factor '" + g.factor(a).name +
                   "' touches more than one variable of the bp part";
      return res;
    }
  }
  UnionFind uf(g.num_vars() + g.num_factors());
  bool cycle = false;
  for (FactorId a : p.bp_factors)
    for (VarId i : g.neighbors(a))
      if (!uf.unite(i, g.num_vars() + a)) cycle = true;
  if (cycle) {
    res.bp_part_has_cycle = true;
    res.cycle_witness = find_cycle_witness(g, p);
    res.reason = "bp part has a cycle; loopy variant required";
    return res;
  }
  res.applicable = true;
  return res;
}

}  // namespace bpmf
