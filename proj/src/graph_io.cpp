#include "bpmf/graph_io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace bpmf {

namespace {

using nlohmann::json;

cplx parse_complex(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(where + ": expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

LoadedGraph parse_graph_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph spec: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("graph spec: top level must be an object");
  if (!doc.contains("variables") || !doc["variables"].is_array())
    throw ParseError("graph spec: missing 'variables' array");
  if (!doc.contains("factors") || !doc["factors"].is_array())
    throw ParseError("graph spec: missing 'factors' array");

  std::vector<Variable> vars;
  std::map<std::string, VarId> var_ids;
  for (std::size_t k = 0; k < doc["variables"].size(); ++k) {
    const json& jv = doc["variables"][k];
    std::string where = "variables[" + std::to_string(k) + "]";
    if (!jv.is_object() || !jv.contains("name") || !jv["name"].is_string())
      throw ParseError(where + ": expected an object with a 'name'");
    std::string name = jv["name"].get<std::string>();
    if (var_ids.count(name)) throw ParseError(where + ": duplicate name '" + name + "'");
    Variable v;
    v.name = name;
    if (jv.contains("states")) {
      if (!jv["states"].is_number_integer() || jv["states"].get<int>() < 1)
        throw ParseError(where + ".states: expected a positive integer");
      v.kind = VarKind::Discrete;
      v.states = jv["states"].get<int>();
    } else if (jv.contains("gaussian_dim")) {
      if (!jv["gaussian_dim"].is_number_integer() ||
          jv["gaussian_dim"].get<int>() < 1)
        throw ParseError(where + ".gaussian_dim: expected a positive integer");
      v.kind = VarKind::GaussianVec;
      v.dim = jv["gaussian_dim"].get<int>();
    } else {
      throw ParseError(where + ": needs 'states' or 'gaussian_dim'");
    }
    var_ids[name] = static_cast<VarId>(vars.size());
    vars.push_back(std::move(v));
  }

  std::vector<FactorSpec> factors;
  std::map<std::string, FactorId> factor_ids;
  for (std::size_t k = 0; k < doc["factors"].size(); ++k) {
    const json& jf = doc["factors"][k];
    std::string where = "factors[" + std::to_string(k) + "]";
    if (!jf.is_object() || !jf.contains("scope") || !jf["scope"].is_array())
      throw ParseError(where + ": expected an object with a 'scope' array");
    FactorSpec f;
    f.name = jf.contains("name") ? jf["name"].get<std::string>()
                                 : "f" + std::to_string(k);
    if (factor_ids.count(f.name))
      throw ParseError(where + ": duplicate factor name '" + f.name + "'");
    std::vector<int> sizes;
    for (const json& js : jf["scope"]) {
      if (!js.is_string() || !var_ids.count(js.get<std::string>()))
        throw ParseError(where + ".scope: unknown variable '" +
                         (js.is_string() ? js.get<std::string>() : "?") + "'");
      VarId i = var_ids[js.get<std::string>()];
      f.scope.push_back(i);
      if (vars[i].kind == VarKind::Discrete) sizes.push_back(vars[i].states);
    }
    if (jf.contains("table")) {
      if (!jf["table"].is_array())
        throw ParseError(where + ".table: expected an array");
      std::vector<double> v;
      for (const json& jx : jf["table"]) {
        if (!jx.is_number()) throw ParseError(where + ".table: expected numbers");
        v.push_back(jx.get<double>());
      }
      std::size_t expect = 1;
      for (int s : sizes) expect *= static_cast<std::size_t>(s);
      if (sizes.size() != f.scope.size())
        throw ParseError(where + ".table: scope has a continuous variable");
      if (v.size() != expect)
        throw ParseError(where + ".table: expected " + std::to_string(expect) +
                         " values, got " + std::to_string(v.size()));
      try {
        f.potential = TablePotential{Table::from_linear(f.scope, sizes, v)};
      } catch (const Error& e) {
        throw ParseError(where + ".table: " + e.what());
      }
    } else if (jf.contains("gaussian_prior")) {
      const json& jg = jf["gaussian_prior"];
      if (!jg.is_object() || !jg.contains("mean") || !jg.contains("precision"))
        throw ParseError(where + ".gaussian_prior: needs 'mean' and 'precision'");
      int d = static_cast<int>(jg["mean"].size());
      GaussianPriorPotential gp;
      gp.mean.resize(d);
      for (int i = 0; i < d; ++i)
        gp.mean[i] = parse_complex(jg["mean"][i], where + ".gaussian_prior.mean");
      if (static_cast<int>(jg["precision"].size()) != d)
        throw ParseError(where + ".gaussian_prior.precision: wrong row count");
      gp.precision.resize(d, d);
      for (int i = 0; i < d; ++i) {
        if (static_cast<int>(jg["precision"][i].size()) != d)
          throw ParseError(where + ".gaussian_prior.precision: wrong column count");
        for (int j = 0; j < d; ++j)
          gp.precision(i, j) = parse_complex(jg["precision"][i][j],
                                             where + ".gaussian_prior.precision");
      }
      f.potential = gp;
    } else if (jf.contains("observation")) {
      const json& jo = jf["observation"];
      if (!jo.is_object() || !jo.contains("y") || !jo.contains("gamma") ||
          !jo.contains("coord") || !jo.contains("symbols"))
        throw ParseError(where +
                         ".observation: needs 'y', 'gamma', 'coord', 'symbols'");
      ScalarObservationPotential op;
      op.y = parse_complex(jo["y"], where + ".observation.y");
      op.gamma = jo["gamma"].get<double>();
      op.coord = jo["coord"].get<int>();
      for (const json& js : jo["symbols"])
        op.symbols.push_back(parse_complex(js, where + ".observation.symbols"));
      f.potential = op;
    } else {
      f.potential = NoPotential{};
    }
    factor_ids[f.name] = static_cast<FactorId>(factors.size());
    factors.push_back(std::move(f));
  }

  LoadedGraph out;
  try {
    out.graph = build_graph(std::move(vars), std::move(factors));
  } catch (const Error& e) {
    throw ParseError(std::string("graph spec: ") + e.what());
  }

  if (doc.contains("bp_factors")) {
    if (!doc["bp_factors"].is_array())
      throw ParseError("bp_factors: expected an array of factor names");
    for (const json& jn : doc["bp_factors"]) {
      if (!jn.is_string() || !factor_ids.count(jn.get<std::string>()))
        throw ParseError("bp_factors: unknown factor '" +
                         (jn.is_string() ? jn.get<std::string>() : "?") + "'");
      out.bp_factors.push_back(factor_ids[jn.get<std::string>()]);
    }
  }
  if (doc.contains("em_vars")) {
    EmConstraintSet em;
    for (const json& jn : doc["em_vars"]) {
      if (!jn.is_string() || !var_ids.count(jn.get<std::string>()))
        throw ParseError("em_vars: unknown variable");
      em.vars.push_back(var_ids[jn.get<std::string>()]);
    }
    em.estimates.assign(em.vars.size(), 0);
    out.em = std::move(em);
  }
  return out;
}

LoadedGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph spec '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_graph_json(text);
}

}  // namespace bpmf
